"""
Covariance-matrix algebra for symmetric two-mode Gaussian states.

Second moments are written in the complex form, i.e. over the operator
vector ``(a1^dag, a2^dag, a1, a2)``.  Every 4x4 matrix that appears in the
realignment calculus of a *symmetric* state is a real combination of four
commuting generators,

    X = v1 I(x)I + v2 I(x)s1 + v3 s1(x)I + v4 s1(x)s1,

with ``s1`` the first Pauli matrix.  ``SigmaBasisMatrix`` stores the four
coefficients (which are also the first row of the dense matrix) and does
all arithmetic in closed form.  Dense 4x4 arrays are produced on request,
mostly for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrix

#: Eigenvalues of a SigmaBasisMatrix are ``_SIGNS @ coeffs``; rows follow
#: (s1, s2) = (+,+), (+,-), (-,+), (-,-) with lambda = v1 + v2 s2 + v3 s1 + v4 s1 s2.
_SIGNS = np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ]
)

#: An eigenvalue below this magnitude counts as zero.
SINGULAR_TOL = 1e-12

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
ID2 = np.eye(2)

#: sigma_3 (x) I_2, the "dagger-block" sign flip.
S3_I = np.kron(PAULI_Z, ID2)

#: Index permutation implementing the realignment k2 <-> m1 on 4-vectors.
Z_SWAP = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
Z_PRIME = S3_I @ Z_SWAP @ S3_I

#: II, IX, XI, XX stacked for fast dense assembly.
_BASIS = np.stack(
    [np.eye(4), np.kron(ID2, PAULI_X), np.kron(PAULI_X, ID2), np.kron(PAULI_X, PAULI_X)]
)


@dataclass(frozen=True)
class SigmaBasisMatrix:
    """Real 4x4 matrix ``v1 II + v2 IX + v3 XI + v4 XX`` stored by coefficients."""

    v1: float
    v2: float
    v3: float
    v4: float

    @classmethod
    def from_coeffs(cls, coeffs) -> "SigmaBasisMatrix":
        a, b, c, d = (float(x) for x in coeffs)
        return cls(a, b, c, d)

    @classmethod
    def from_eigenvalues(cls, eig) -> "SigmaBasisMatrix":
        # the sign table is symmetric and squares to 4 I
        a, b, c, d = (float(x) for x in eig)
        return cls(
            0.25 * (a + b + c + d),
            0.25 * (a - b + c - d),
            0.25 * (a + b - c - d),
            0.25 * (a - b - c + d),
        )

    @classmethod
    def from_dense(cls, m, atol: float = 1e-10) -> "SigmaBasisMatrix":
        """Project a dense 4x4 matrix on the basis, checking it lies inside it."""
        m = np.asarray(m, dtype=float)
        out = cls.from_coeffs(m[0])
        if not np.allclose(out.dense(), m, atol=atol, rtol=0.0):
            raise ValueError("matrix is not in the span of the sigma basis")
        return out

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([self.v1, self.v2, self.v3, self.v4])

    def dense(self) -> np.ndarray:
        return np.tensordot(self.coeffs, _BASIS, axes=1)

    def _eig(self) -> tuple:
        a, b, c, d = self.v1, self.v2, self.v3, self.v4
        return (a + b + c + d, a - b + c - d, a + b - c - d, a - b - c + d)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in the order of the rows of the sign table."""
        return np.array(self._eig())

    def det(self) -> float:
        e0, e1, e2, e3 = self._eig()
        return e0 * e1 * e2 * e3

    def is_singular(self, tol: float = SINGULAR_TOL) -> bool:
        return bool(np.any(np.abs(self.eigenvalues()) < tol))

    def inverse(self) -> "SigmaBasisMatrix":
        eig = self._eig()
        for e in eig:
            if abs(e) < SINGULAR_TOL:
                raise SingularMatrix(
                    f"sigma-basis matrix {self.coeffs.tolist()} is singular", eigenvalue=float(e)
                )
        return SigmaBasisMatrix.from_eigenvalues([1.0 / e for e in eig])

    def __matmul__(self, other):
        if isinstance(other, SigmaBasisMatrix):
            return SigmaBasisMatrix.from_eigenvalues(self.eigenvalues() * other.eigenvalues())
        return self.dense() @ other

    def __add__(self, other: "SigmaBasisMatrix") -> "SigmaBasisMatrix":
        return SigmaBasisMatrix(self.v1 + other.v1, self.v2 + other.v2, self.v3 + other.v3, self.v4 + other.v4)

    def __sub__(self, other: "SigmaBasisMatrix") -> "SigmaBasisMatrix":
        return SigmaBasisMatrix(self.v1 - other.v1, self.v2 - other.v2, self.v3 - other.v3, self.v4 - other.v4)

    def __neg__(self) -> "SigmaBasisMatrix":
        return SigmaBasisMatrix(-self.v1, -self.v2, -self.v3, -self.v4)

    def __mul__(self, scalar: float) -> "SigmaBasisMatrix":
        k = float(scalar)
        return SigmaBasisMatrix(k * self.v1, k * self.v2, k * self.v3, k * self.v4)

    __rmul__ = __mul__

    def s3_conjugate(self) -> "SigmaBasisMatrix":
        """``(s3 (x) I) X (s3 (x) I)``: flips the sign of the block-swapping terms."""
        return SigmaBasisMatrix(self.v1, self.v2, -self.v3, -self.v4)

    def z_conjugate(self) -> "SigmaBasisMatrix":
        """``Z X Z`` with ``Z`` the realignment swap of entries 2 and 3."""
        return SigmaBasisMatrix(self.v1, self.v3, self.v2, self.v4)

    def zprime_conjugate(self) -> "SigmaBasisMatrix":
        """``Z' X Z'`` with ``Z' = (s3 (x) I) Z (s3 (x) I)``."""
        return SigmaBasisMatrix(self.v1, -self.v3, -self.v2, self.v4)

    def allclose(self, other: "SigmaBasisMatrix", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.coeffs, other.coeffs, atol=atol, rtol=0.0))


IDENTITY = SigmaBasisMatrix(1.0, 0.0, 0.0, 0.0)
#: I_2 (x) sigma_1
I_X = SigmaBasisMatrix(0.0, 1.0, 0.0, 0.0)
#: sigma_1 (x) I_2
X_I = SigmaBasisMatrix(0.0, 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class SymmetricCCM:
    """Standard-form second moments ``(b0, c1, c2)`` of a symmetric two-mode state.

    ``b0`` is the mean photon number per mode plus one half, ``c1`` the
    two-mode squeezing correlation and ``c2`` the beam-splitter type
    correlation.  The sign of ``c1`` follows the Fock-space generating
    formula used throughout, in which a two-mode squeezed vacuum with
    positive Schmidt coefficients has ``c1 < 0``.
    """

    b0: float
    c1: float
    c2: float = 0.0

    @classmethod
    def vacuum(cls) -> "SymmetricCCM":
        return cls(0.5, 0.0, 0.0)

    @classmethod
    def thermal(cls, nbar: float) -> "SymmetricCCM":
        return cls(nbar + 0.5, 0.0, 0.0)

    @classmethod
    def tmsv(cls, lam: float) -> "SymmetricCCM":
        """Two-mode squeezed vacuum ``sqrt(1-lam^2) sum lam^n |nn>``."""
        return cls(1.0 / (1.0 - lam**2) - 0.5, -lam / (1.0 - lam**2), 0.0)

    @classmethod
    def tmst(cls, b0: float, w: float) -> "SymmetricCCM":
        """Two-mode squeezed thermal state with ``w = b0 + c1 - 1/2``."""
        return cls(b0, w + 0.5 - b0, 0.0)

    @property
    def gamma(self) -> SigmaBasisMatrix:
        return SigmaBasisMatrix(0.0, self.c1, self.b0, self.c2)

    @property
    def b(self) -> float:
        return self.b0 + 0.5

    def flipped(self) -> "SymmetricCCM":
        """Kernel with both correlations reversed (phase flip of one mode)."""
        return SymmetricCCM(self.b0, -self.c1, -self.c2)

    def as_tuple(self) -> tuple:
        return (self.b0, self.c1, self.c2)


@dataclass(frozen=True)
class KVector:
    """Entries of ``gamma'^-1`` in the sigma basis, plus ``det gamma'``."""

    K1: float
    K2: float
    K3: float
    K4: float
    delta2: float

    @property
    def matrix(self) -> SigmaBasisMatrix:
        return SigmaBasisMatrix(self.K1, self.K2, self.K3, self.K4)


def gamma_prime(ccm: SymmetricCCM) -> SigmaBasisMatrix:
    """Shifted covariance ``gamma' = gamma + (1/2) s1 (x) I = {0, c1, b0 + 1/2, c2}``."""
    return SigmaBasisMatrix(0.0, ccm.c1, ccm.b0 + 0.5, ccm.c2)


def k_coefficients(ccm: SymmetricCCM) -> KVector:
    """Closed-form inverse of ``gamma'``.

    Raises
    ------
    SingularMatrix
        If ``gamma'`` has an eigenvalue below ``SINGULAR_TOL`` in magnitude.
    """
    eig = gamma_prime(ccm)._eig()
    for e in eig:
        if abs(e) < SINGULAR_TOL:
            raise SingularMatrix(f"gamma' of {ccm} is singular", eigenvalue=float(e))
    b, c1, c2 = ccm.b, ccm.c1, ccm.c2
    d2 = eig[0] * eig[1] * eig[2] * eig[3]
    return KVector(
        K1=2.0 * b * c1 * c2 / d2,
        K2=c1 * (c1**2 - c2**2 - b**2) / d2,
        K3=b * (b**2 - c1**2 - c2**2) / d2,
        K4=c2 * (c2**2 - c1**2 - b**2) / d2,
        delta2=d2,
    )


def beta(ccm: SymmetricCCM) -> SigmaBasisMatrix:
    """``beta = (s3 (x) I) gamma'^-1 (s3 (x) I)``."""
    return k_coefficients(ccm).matrix.s3_conjugate()


def beta_of(gp: SigmaBasisMatrix) -> SigmaBasisMatrix:
    """``beta`` for an arbitrary shifted covariance ``gp`` in the sigma basis."""
    return gp.inverse().s3_conjugate()


# ---------------------------------------------------------------------------
# quadrature form, physicality and PPT
# ---------------------------------------------------------------------------

#: C = T R with C = (a1^dag, a2^dag, a1, a2) and R = (x1, x2, p1, p2).
_T = np.block([[ID2, -1j * ID2], [ID2, 1j * ID2]]) / math.sqrt(2.0)
_T_INV = np.linalg.inv(_T)
_OMEGA = np.block([[np.zeros((2, 2)), ID2], [-ID2, np.zeros((2, 2))]])
# images of the four basis matrices; all of them are real
_QUAD_BASIS = np.einsum("ij,bjk,lk->bil", _T_INV, _BASIS, _T_INV).real


def quadrature_covariance(gamma) -> np.ndarray:
    """Real covariance of ``(x1, x2, p1, p2)`` from a complex-form CCM.

    Vacuum maps to ``I/2``.  ``gamma`` may be a SigmaBasisMatrix or a dense array.
    """
    if isinstance(gamma, SigmaBasisMatrix):
        return np.tensordot(gamma.coeffs, _QUAD_BASIS, axes=1)
    sigma = _T_INV @ np.asarray(gamma) @ _T_INV.T
    if np.max(np.abs(sigma.imag)) > 1e-10:
        raise ValueError("complex-form matrix does not map to a real covariance")
    return sigma.real


def is_valid_ccm(gamma, tol: float = 1e-10) -> bool:
    """Whether ``gamma`` is the CCM of some physical Gaussian state.

    Checks the uncertainty relation ``sigma + i Omega / 2 >= 0`` on the
    quadrature covariance.
    """
    try:
        sigma = quadrature_covariance(gamma)
    except ValueError:
        return False
    eig = np.linalg.eigvalsh(sigma + 0.5j * _OMEGA)
    return bool(eig.min() >= -tol)


def _nu_squared(ccm: SymmetricCCM, transpose: bool):
    """``(b0, kx, kp, nu_-^2, nu_+^2)`` of the quadrature covariance.

    With equal local blocks ``b0 I`` the modes ``(x1 +- x2)/sqrt 2`` decouple,
    so the squared symplectic eigenvalues are the exact products
    ``(b0 + kx)(b0 + kp)`` and ``(b0 - kx)(b0 - kp)``.  Partial transposition
    flips the sign of ``kp``.
    """
    kx = ccm.c1 + ccm.c2
    kp = ccm.c2 - ccm.c1
    if transpose:
        kp = -kp
    b0 = ccm.b0
    lo, hi = sorted(((b0 + kx) * (b0 + kp), (b0 - kx) * (b0 - kp)))
    return b0, kx, kp, lo, hi


def symplectic_eigenvalues(ccm: SymmetricCCM, transpose: bool = False) -> tuple:
    """``(nu_minus, nu_plus)`` of the quadrature covariance (optionally partially transposed).

    Negative squares, which only occur for unphysical inputs, are clipped to zero.
    """
    _, _, _, lo, hi = _nu_squared(ccm, transpose)
    return math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0))


def _nu_minus_at_least_half(ccm: SymmetricCCM, transpose: bool, tol: float) -> bool:
    b0, kx, kp, lo, _ = _nu_squared(ccm, transpose)
    if b0 < 0.5 - tol or b0 <= abs(kx) or b0 <= abs(kp):
        return False
    return lo >= 0.25 - tol


def physicality_check(ccm: SymmetricCCM, tol: float = 1e-12) -> bool:
    """True iff the smaller symplectic eigenvalue is at least one half."""
    return _nu_minus_at_least_half(ccm, False, tol)


def simon_ppt_check(ccm: SymmetricCCM, tol: float = 1e-12) -> bool:
    """Simon's PPT test: True iff the partial transpose is physical (separable)."""
    return _nu_minus_at_least_half(ccm, True, tol)


def mixture_ccm(p: float, a: SymmetricCCM, b: SymmetricCCM) -> SymmetricCCM:
    """Second moments of the zero-mean mixture ``p a + (1 - p) b``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    q = 1.0 - p
    return SymmetricCCM(p * a.b0 + q * b.b0, p * a.c1 + q * b.c1, p * a.c2 + q * b.c2)
