"""
Realignment criteria for non-Gaussian states built from a Gaussian kernel.

A non-Gaussian state is written as derivatives of the generating operator

    W = exp(eps a^dag) exp(xi a) rho exp(eta a^dag) exp(zeta a)

with respect to eight real parameters, ordered here as

    (eps1, eps2, xi1, xi2, eta1, eta2, zeta1, zeta2).

The trace of ``W`` and of its realignment are exponentials of quadratic
forms in these parameters, so every criterion reduces to a mixed partial
derivative of ``exp(x A x^T / 2 + L x)`` at the origin.  Those derivatives
are sums over pairings (loop hafnians) and are evaluated by
``gaussian_moment``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, OverflowGuard
from .gaussian_core import (
    S3_I,
    X_I,
    SigmaBasisMatrix,
    SymmetricCCM,
    gamma_prime,
)
from .realign import (
    CriterionReport,
    RealignBranch,
    realigned_inverse,
    tau_value,
)

PARAM_NAMES = ("eps1", "eps2", "xi1", "xi2", "eta1", "eta2", "zeta1", "zeta2")
EPS = (0, 1)
XI = (2, 3)
ETA = (4, 5)
ZETA = (6, 7)

#: Largest total derivative order accepted by ``gaussian_moment``.
MAX_ORDER = 24
#: Largest photon number per mode for the m-photon criteria.
MAX_PHOTONS = 6


@dataclass(frozen=True)
class QuadraticExponent:
    """``exp(x A x^T / 2 + L x + c0)`` in ``n`` real variables."""

    A: np.ndarray
    L: np.ndarray = None
    c0: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
        if not np.allclose(A, A.T, atol=1e-10 * scale, rtol=0.0):
            raise ValueError("A must be symmetric")
        A = 0.5 * (A + A.T)
        L = np.zeros(A.shape[0]) if self.L is None else np.array(self.L, dtype=float)
        if L.shape != (A.shape[0],):
            raise ValueError("L has the wrong length")
        A.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def transformed(self, T) -> "QuadraticExponent":
        """Exponent in variables ``y`` where the old variables are ``x = T y``."""
        T = np.asarray(T, dtype=float)
        return QuadraticExponent(T.T @ self.A @ T, self.L @ T, self.c0)

    def __add__(self, other: "QuadraticExponent") -> "QuadraticExponent":
        return QuadraticExponent(self.A + other.A, self.L + other.L, self.c0 + other.c0)

    def __neg__(self) -> "QuadraticExponent":
        return QuadraticExponent(-self.A, -self.L, -self.c0)

    def __sub__(self, other: "QuadraticExponent") -> "QuadraticExponent":
        return self + (-other)


@dataclass(frozen=True)
class DerivativeSpec:
    """Multi-index of derivative orders over the eight generating parameters.

    ``normalization`` of ``None`` means "fix it from unit trace".
    """

    orders: tuple
    normalization: float | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        orders = tuple(int(k) for k in self.orders)
        if len(orders) != 8 or any(k < 0 for k in orders):
            raise ValueError("orders must be eight non-negative integers")
        if self.normalization is not None and not self.normalization > 0:
            raise ValueError("normalization must be positive")
        object.__setattr__(self, "orders", orders)

    @classmethod
    def photon(cls, sign: str, m: int = 1) -> "DerivativeSpec":
        """``a1^m a2^m rho a1^dag^m a2^dag^m`` (subtract) or its added counterpart."""
        sign = _check_sign(sign)
        orders = [0] * 8
        slots = XI + ETA if sign == "subtract" else EPS + ZETA
        for i in slots:
            orders[i] = m
        return cls(tuple(orders), label=f"{sign}{m}")

    @property
    def total_order(self) -> int:
        return sum(self.orders)


def _check_sign(sign: str) -> str:
    s = str(sign).lower()
    if s in ("subtract", "sub", "-", "minus"):
        return "subtract"
    if s in ("add", "+", "plus"):
        return "add"
    raise ValueError(f"unknown photon operation {sign!r}")


# ---------------------------------------------------------------------------
# pairing sums
# ---------------------------------------------------------------------------


def gaussian_moment(q: QuadraticExponent, idx) -> float:
    """Mixed derivative of ``exp(x A x^T/2 + L x + c0)`` at ``x = 0``.

    ``idx[i]`` is the derivative order in variable ``i``.  The result is the
    sum, over all ways of splitting the multiset of differentiated variables
    into pairs and singletons, of ``prod A_ij * prod L_i``, times
    ``exp(c0)``.  Partial sums are memoized on the remaining multiset, so
    the cost is polynomial in the orders rather than ``(2k-1)!!``.

    Raises
    ------
    OverflowGuard
        If the total order exceeds ``MAX_ORDER``.
    """
    idx = tuple(int(k) for k in idx)
    if len(idx) != q.n:
        raise ValueError(f"multi-index of length {len(idx)} for {q.n} variables")
    if any(k < 0 for k in idx):
        raise ValueError("negative derivative order")
    if sum(idx) > MAX_ORDER:
        raise OverflowGuard(f"total order {sum(idx)} exceeds {MAX_ORDER}")

    active = [i for i, k in enumerate(idx) if k]
    A = q.A[np.ix_(active, active)]
    L = q.L[active]
    has_linear = bool(np.any(L != 0.0))

    @lru_cache(maxsize=None)
    def pair_sum(counts):
        # pick the first remaining variable and decide what it is paired with
        try:
            i = next(j for j, k in enumerate(counts) if k)
        except StopIteration:
            return 1.0
        rest = list(counts)
        rest[i] -= 1
        total = 0.0
        if has_linear and L[i] != 0.0:
            total += L[i] * pair_sum(tuple(rest))
        for j, k in enumerate(rest):
            if k and A[i, j] != 0.0:
                nxt = rest.copy()
                nxt[j] -= 1
                total += k * A[i, j] * pair_sum(tuple(nxt))
        return total

    counts = tuple(idx[i] for i in active)
    if not has_linear and sum(counts) % 2:
        return 0.0
    return pair_sum(counts) * math.exp(q.c0)


def f_moment(m: int, V: SigmaBasisMatrix) -> float:
    """``d^m/dk1^m ... d^m/dk4^m exp(-k V k^T / 2)`` at ``k = 0``."""
    return gaussian_moment(QuadraticExponent(-V.dense()), (m, m, m, m))


def f2_closed_form(V: SigmaBasisMatrix) -> float:
    """Closed form of ``f_moment(2, V)``."""
    v1, v2, v3, v4 = V.v1, V.v2, V.v3, V.v4
    return (
        (v1**2 + 2.0 * (v2**2 + v3**2 + v4**2)) ** 2
        + 32.0 * v1 * v2 * v3 * v4
        + 8.0 * (v2**2 * v3**2 + v2**2 * v4**2 + v3**2 * v4**2)
    )


# ---------------------------------------------------------------------------
# generating-functional exponents
# ---------------------------------------------------------------------------

# u = (eps + eta, xi + zeta) as a 4x8 map
_U = np.zeros((4, 8))
for _k in range(2):
    _U[_k, EPS[_k]] = _U[_k, ETA[_k]] = 1.0
    _U[2 + _k, XI[_k]] = _U[2 + _k, ZETA[_k]] = 1.0

# -zeta.eta - eps.xi - eta.xi as (1/2) x C x^T
_CROSS = np.zeros((8, 8))
for _a, _b in ((ZETA, ETA), (EPS, XI), (ETA, XI)):
    for _k in range(2):
        _CROSS[_a[_k], _b[_k]] = _CROSS[_b[_k], _a[_k]] = -1.0


def _realign_map() -> np.ndarray:
    """8x8 matrix ``R`` with ``x^R = R x``.

    ``(xi^R, eta^R) = (xi, eta) Z`` and ``(eps^R, zeta^R) = (eps, zeta) Z``,
    i.e. the ket-side mode-2 parameter trades places with the bra-side
    mode-1 parameter.
    """
    perm = list(range(8))
    perm[EPS[1]], perm[ZETA[0]] = ZETA[0], EPS[1]
    perm[XI[1]], perm[ETA[0]] = ETA[0], XI[1]
    return np.eye(8)[perm]


REALIGN_PARAMS = _realign_map()


def p_exponent(beta_inv) -> QuadraticExponent:
    """Exponent of ``P = Tr W`` as a quadratic form in the eight parameters.

    ``beta_inv`` is ``beta^-1 = (s3 (x) I) gamma' (s3 (x) I)`` (dense or sigma basis).
    """
    bi = beta_inv.dense() if isinstance(beta_inv, SigmaBasisMatrix) else np.asarray(beta_inv)
    return QuadraticExponent(-_U.T @ bi @ _U + _CROSS)


def beta_inverse(gp) -> np.ndarray:
    g = gp.dense() if isinstance(gp, SigmaBasisMatrix) else np.asarray(gp)
    return S3_I @ g @ S3_I


def realigned_p_exponent(gp_realigned) -> QuadraticExponent:
    """Exponent of ``P^R`` in the original (un-realigned) parameters."""
    return p_exponent(beta_inverse(gp_realigned)).transformed(REALIGN_PARAMS)


def realigned_ccm_prime(ccm: SymmetricCCM, branch: str = "plain") -> SigmaBasisMatrix:
    """Closed form of ``gamma_R'`` (the realigned, shifted covariance).

    With ``tau = 1 / (4[(b0+c1)^2 - c2^2])``::

        gamma_R' = 1/2 {c2 (tau-1), (b0+c1) tau - (b0-c1),
                        (b0+c1) tau + (b0-c1) + 1, c2 (tau+1)}

    The ``"pi"`` branch uses the kernel with ``c1, c2`` reversed.
    """
    if branch == "pi":
        ccm = ccm.flipped()
    elif branch != "plain":
        raise ValueError(f"unknown branch {branch!r}")
    b0, c1, c2 = ccm.as_tuple()
    tau = tau_value(b0, c1, c2)
    return SigmaBasisMatrix(
        0.5 * c2 * (tau - 1.0),
        0.5 * ((b0 + c1) * tau - (b0 - c1)),
        0.5 * ((b0 + c1) * tau + (b0 - c1) + 1.0),
        0.5 * c2 * (tau + 1.0),
    )


# ---------------------------------------------------------------------------
# photon subtracted / added states
# ---------------------------------------------------------------------------


def engine_trace(ccm: SymmetricCCM, deriv: DerivativeSpec, branch: str = "plain") -> dict:
    """Trace of the realigned non-Gaussian state by direct differentiation.

    Returns the determinant prefactor, ``O P^R`` (normalized so that
    ``O P = 1``) and their product.  This is the primary code path; the
    closed forms below are cross-checks.
    """
    kernel = ccm.flipped() if branch == "pi" else ccm
    gp = gamma_prime(kernel)
    gp_r = realigned_inverse(kernel, "plain").inverse()
    prefactor = math.sqrt(gp_r.det() / gp.det())
    norm_moment = gaussian_moment(p_exponent(beta_inverse(gp)), deriv.orders)
    if deriv.normalization is None:
        if norm_moment == 0.0:
            raise DomainError(f"{deriv.label or deriv.orders} annihilates the kernel")
        norm = 1.0 / norm_moment
    else:
        norm = deriv.normalization
    op_r = norm * gaussian_moment(realigned_p_exponent(gp_r), deriv.orders)
    return {"prefactor": prefactor, "op_r": op_r, "value": prefactor * op_r, "norm": norm}


def op_r_closed_form(ccm: SymmetricCCM, sign: str) -> float:
    """Single-photon ``O P^R`` in closed form (plain branch)."""
    s = 0.5 if _check_sign(sign) == "subtract" else -0.5
    b0, c1, c2 = ccm.as_tuple()
    tau = tau_value(b0, c1, c2)
    c = 1.0 / ((b0 - s) ** 2 + c1**2 + c2**2)
    return 0.5 * c * (
        (b0 - c1 - s) ** 2 + ((b0 + c1) * tau - s) ** 2 + 0.5 * c2**2 * (tau + 1.0) ** 2
    )


def op_r_ratio(ccm: SymmetricCCM, sign: str, m: int) -> float:
    """``O P^R`` for ``m`` photons per mode as ``f(m, gamma_R -+ X/2) / f(m, gamma -+ X/2)``."""
    s = 0.5 if _check_sign(sign) == "subtract" else -0.5
    gamma_r = realigned_ccm_prime(ccm) - 0.5 * X_I
    num_v = gamma_r - s * X_I
    den_v = ccm.gamma - s * X_I
    if m == 2:
        return f2_closed_form(num_v) / f2_closed_form(den_v)
    return f_moment(m, num_v) / f_moment(m, den_v)


def photon_normalization(ccm: SymmetricCCM, sign: str, m: int = 1) -> float:
    """Normalization ``c_-+m`` of ``a^m rho a^dag^m`` (or the added state)."""
    s = 0.5 if _check_sign(sign) == "subtract" else -0.5
    if m == 1:
        return 1.0 / ((ccm.b0 - s) ** 2 + ccm.c1**2 + ccm.c2**2)
    return 1.0 / f_moment(m, ccm.gamma - s * X_I)


def photon_pm_criterion(ccm: SymmetricCCM, sign: str, m: int = 1) -> CriterionReport:
    """Realignment criterion for ``m`` photons subtracted from / added to each mode.

    The value is ``sqrt(tau) * O P^R`` maximized over the plain and parity
    (``c1, c2`` reversed) branches; both are lower bounds on the trace norm
    of the realigned state.

    Raises
    ------
    DegenerateState
        If the realigned covariance of a branch is degenerate.
    OverflowGuard
        If ``4 m`` exceeds the derivative-order guard.
    """
    sign = _check_sign(sign)
    if not 1 <= m <= MAX_PHOTONS:
        raise DomainError(f"m={m} outside 1..{MAX_PHOTONS}")
    deriv = DerivativeSpec.photon(sign, m)
    branches = []
    for label in ("plain", "pi"):
        kernel = ccm.flipped() if label == "pi" else ccm
        tau = tau_value(*kernel.as_tuple())
        res = engine_trace(ccm, deriv, label)
        branches.append((res["value"], RealignBranch(label, tau, res["value"]), res))
    value, branch, res = max(branches, key=lambda t: t[0])
    return CriterionReport.greater_than(
        value,
        1.0,
        branch=branch,
        detail=f"{sign} {m} photon(s) per mode; O P^R = {res['op_r']:.12g}",
        extras={
            "op_r": res["op_r"],
            "prefactor": res["prefactor"],
            "normalization": res["norm"],
            "other_branch_value": min(b[0] for b in branches),
        },
    )


# ---------------------------------------------------------------------------
# mixtures of two-mode squeezed thermal states
# ---------------------------------------------------------------------------


def mixture_criteria(w1: float, w2: float, p: float) -> dict:
    """Second-moment, Fock-space and realignment tests for ``p rho1 + (1-p) rho2``.

    ``w = b0 + c1 - 1/2`` of each TMST component; each test reports entangled
    when its left-hand side is negative.
    """
    if not (-0.5 < w1 < 0.0 and w2 >= 0.0 and 0.0 <= p <= 1.0):
        warnings.warn(
            f"mixture inputs (w1={w1}, w2={w2}, p={p}) outside the entangled/separable setting",
            stacklevel=2,
        )
    base = p * w1 + (1.0 - p) * w2
    out = {}
    for name, k in (("second_moment", 0.0), ("fock", 1.0), ("realignment", 2.0)):
        out[name] = CriterionReport.less_than(
            base + k * w1 * w2, 0.0, detail=f"p w1 + (1-p) w2 + {k:g} w1 w2 < 0"
        )
    return out


def mixture_realignment_trace(w1: float, w2: float, p: float) -> float:
    """``Tr rho^R`` of the TMST mixture; exceeds 1 exactly when the realignment test fires."""
    return p / (1.0 + 2.0 * w1) + (1.0 - p) / (1.0 + 2.0 * w2)


__all__ = [
    "DerivativeSpec",
    "QuadraticExponent",
    "engine_trace",
    "f2_closed_form",
    "f_moment",
    "gaussian_moment",
    "mixture_criteria",
    "mixture_realignment_trace",
    "op_r_closed_form",
    "op_r_ratio",
    "p_exponent",
    "photon_normalization",
    "photon_pm_criterion",
    "realigned_ccm_prime",
    "realigned_p_exponent",
]
