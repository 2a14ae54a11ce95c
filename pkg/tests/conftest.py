import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings
from hypothesis import strategies as st

from cvrealign.gaussian_core import SymmetricCCM, physicality_check

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.filter_too_much]
)
settings.load_profile("default")

# complex-form -> quadrature change of basis, written out independently of the package
T_MAT = np.block([[np.eye(2), -1j * np.eye(2)], [np.eye(2), 1j * np.eye(2)]]) / math.sqrt(2.0)
T_INV = np.linalg.inv(T_MAT)
OMEGA = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


def dense_gamma(b1, b2, c1, c2):
    """CCM of (a1^dag, a2^dag, a1, a2) written out entry by entry."""
    return np.array(
        [
            [0.0, c1, b1, c2],
            [c1, 0.0, c2, b2],
            [b1, c2, 0.0, c1],
            [c2, b2, c1, 0.0],
        ]
    )


def dense_nu_minus(gamma, partial_transpose=False):
    """Smallest symplectic eigenvalue from |eig(i Omega sigma)|."""
    sigma = (T_INV @ gamma @ T_INV.T).real
    if partial_transpose:
        flip = np.diag([1.0, 1.0, 1.0, -1.0])
        sigma = flip @ sigma @ flip
    return float(np.min(np.abs(np.linalg.eigvals(1j * OMEGA @ sigma))))


coeff = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


@st.composite
def physical_ccms(draw, b0_max=3.0, c_max=2.0, b0_min=0.5):
    b0 = draw(st.floats(b0_min, b0_max))
    c1 = draw(st.floats(-c_max, c_max))
    c2 = draw(st.floats(-c_max, c_max))
    ccm = SymmetricCCM(b0, c1, c2)
    assume(physicality_check(ccm))
    # keep away from the degenerate realigned determinant
    assume(min(abs((b0 + c1) ** 2 - c2**2), abs((b0 - c1) ** 2 - c2**2)) > 1e-3)
    return ccm


@st.composite
def sigma_matrices(draw, scale=2.0):
    from cvrealign.gaussian_core import SigmaBasisMatrix

    vals = [draw(st.floats(-scale, scale)) for _ in range(4)]
    return SigmaBasisMatrix(*vals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_physical(rng, n, b0_range=(0.5, 3.0), c_range=2.0):
    out = []
    while len(out) < n:
        b0 = rng.uniform(*b0_range)
        c1, c2 = rng.uniform(-c_range, c_range, 2)
        ccm = SymmetricCCM(b0, c1, c2)
        if physicality_check(ccm) and min(abs((b0 + c1) ** 2 - c2**2), abs((b0 - c1) ** 2 - c2**2)) > 1e-3:
            out.append(ccm)
    return out


def sympy_derivative(A, L, c0, idx):
    """Mixed derivative of exp(x A x^T / 2 + L x + c0) at 0 by symbolic differentiation."""
    sp = pytest.importorskip("sympy")
    n = len(idx)
    xs = sp.symbols(f"x0:{n}")
    expo = sum(sp.Rational(1, 2) * sp.nsimplify(A[i][j]) * xs[i] * xs[j] for i in range(n) for j in range(n))
    expo += sum(sp.nsimplify(L[i]) * xs[i] for i in range(n)) + sp.nsimplify(c0)
    expr = sp.exp(expo)
    for i, k in enumerate(idx):
        if k:
            expr = sp.diff(expr, xs[i], k)
    return float(expr.subs({x: 0 for x in xs}))
