"""
Realignment of Gaussian second moments and the resulting entanglement test.

Realigning a symmetric Gaussian state (``k2 <-> m1`` in the Fock indices)
gives an operator proportional to another Gaussian.  Its trace is
``sqrt(tau)`` with ``tau = 1 / (4[(b0+c1)^2 - c2^2])``; appending the parity
operator gives the same expression with ``c1, c2`` reversed.  The state is
entangled iff the larger of the two exceeds one, equivalently iff one of the
products ``(b0 +- c1 + c2)(b0 +- c1 - c2)`` is below 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DegenerateState
from .gaussian_core import (
    I_X,
    X_I,
    KVector,
    SigmaBasisMatrix,
    SymmetricCCM,
    is_valid_ccm,
    k_coefficients,
)

#: Values within this distance of the threshold are reported as "boundary".
BOUNDARY_TOL = 1e-10
#: A realigned determinant ``4[(b0+c1)^2 - c2^2]`` below this is degenerate.
DEGENERATE_TOL = 1e-12

BRANCHES = ("plain", "pi")


@dataclass(frozen=True)
class RealignBranch:
    label: str
    tau: float
    trace_value: float


@dataclass(frozen=True)
class CriterionReport:
    """Outcome of one entanglement test.

    ``direction`` says which side of ``threshold`` certifies entanglement:
    ``"greater"`` for trace-norm style tests, ``"less"`` for the product and
    moment inequalities.
    """

    value: float
    threshold: float
    entangled: bool
    boundary: bool = False
    direction: str = "greater"
    branch: RealignBranch | None = None
    lower_bound_only: bool = False
    detail: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    @classmethod
    def greater_than(cls, value, threshold, tol=BOUNDARY_TOL, **kw) -> "CriterionReport":
        value = float(value)
        boundary = abs(value - threshold) <= tol
        return cls(value, threshold, (not boundary) and value > threshold, boundary, "greater", **kw)

    @classmethod
    def less_than(cls, value, threshold, tol=BOUNDARY_TOL, **kw) -> "CriterionReport":
        value = float(value)
        boundary = abs(value - threshold) <= tol
        return cls(value, threshold, (not boundary) and value < threshold, boundary, "less", **kw)

    @property
    def verdict(self) -> str:
        if self.boundary:
            return "boundary"
        return "entangled" if self.entangled else "not_detected"


def tau_value(b0: float, c1: float, c2: float) -> float:
    """``1 / (4[(b0+c1)^2 - c2^2])``; raises DegenerateState at a zero denominator."""
    denom = 4.0 * ((b0 + c1) ** 2 - c2**2)
    if abs(denom) < DEGENERATE_TOL:
        raise DegenerateState(f"realigned covariance degenerate at (b0, c1, c2) = {(b0, c1, c2)}")
    return 1.0 / denom


def realigned_inverse(ccm: SymmetricCCM, branch: str = "plain") -> SigmaBasisMatrix:
    """``gamma_R'^-1 = Z' gamma'^-1 Z' + I (x) s1 + s1 (x) I`` in the sigma basis.

    ``"plain"`` gives ``{K1, 1-K3, 1-K2, K4}``; ``"pi"`` (parity appended)
    gives ``{K1, 1-K3, 1+K2, -K4}``.
    """
    return _realigned_from_k(k_coefficients(ccm), branch)


def _realigned_from_k(k: KVector, branch: str) -> SigmaBasisMatrix:
    if branch == "plain":
        inner = k.matrix.zprime_conjugate()
    elif branch == "pi":
        inner = SigmaBasisMatrix(k.K1, -k.K3, k.K2, -k.K4)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return inner + I_X + X_I


def determinant_trace(ccm: SymmetricCCM, branch: str = "plain") -> float:
    """``Tr rho^R = sqrt(det gamma'^-1 / det gamma_R'^-1)`` via determinants."""
    ratio = k_coefficients(ccm).matrix.det() / realigned_inverse(ccm, branch).det()
    if ratio <= 0.0:
        return math.nan
    return math.sqrt(ratio)


def _branch_data(ccm: SymmetricCCM, label: str, k: KVector) -> dict:
    b0, c1, c2 = ccm.as_tuple()
    s = 1.0 if label == "plain" else -1.0
    product = (b0 + s * c1 + c2) * (b0 + s * c1 - c2)
    tau = tau_value(b0, s * c1, s * c2)
    out = {"product": product, "tau": tau, "valid_ccm": False, "trace": math.nan}
    if tau > 0.0:
        out["trace"] = math.sqrt(tau)
        inv_r = _realigned_from_k(k, label)
        out["valid_ccm"] = is_valid_ccm(inv_r.inverse() - 0.5 * X_I)
        ratio = k.matrix.det() / inv_r.det()
        out["determinant_trace"] = math.sqrt(ratio) if ratio > 0.0 else math.nan
    return out


def gaussian_trace_norm_bound(ccm: SymmetricCCM) -> CriterionReport:
    """Realignment test for a symmetric Gaussian state.

    The reported value is ``max(sqrt(tau_plain), sqrt(tau_pi))``, a lower
    bound on the trace norm of the realigned density matrix (equal to it
    when the realigned covariance of the winning branch is a valid CCM).

    Raises
    ------
    DegenerateState
        If ``(b0 +- c1)^2 = c2^2`` for either branch.
    """
    k = k_coefficients(ccm)
    data = {label: _branch_data(ccm, label, k) for label in BRANCHES}
    usable = [lb for lb in BRANCHES if data[lb]["tau"] > 0.0]
    if not usable:
        raise DegenerateState(f"no branch with positive tau for {ccm}")
    best = max(usable, key=lambda lb: data[lb]["trace"])
    d = data[best]
    branch = RealignBranch(best, d["tau"], d["trace"])
    lower_bound_only = not any(data[lb]["valid_ccm"] for lb in usable)
    min_product = min(data[lb]["product"] for lb in BRANCHES)
    report = CriterionReport.greater_than(
        d["trace"],
        1.0,
        branch=branch,
        lower_bound_only=lower_bound_only,
        detail="product form: min over branches of (b0 +- c1 + c2)(b0 +- c1 - c2) < 1/4",
        extras={
            "product_plain": data["plain"]["product"],
            "product_pi": data["pi"]["product"],
            "product_threshold": 0.25,
            "product_entangled": min_product < 0.25,
            "determinant_trace": d.get("determinant_trace", math.nan),
            "valid_ccm_plain": data["plain"]["valid_ccm"],
            "valid_ccm_pi": data["pi"]["valid_ccm"],
        },
    )
    return report


def gaussian_criterion_nonsymmetric(b1: float, b2: float, c1: float, c2: float) -> CriterionReport:
    """Standard-form state with unequal modes: ``b0`` is replaced by ``sqrt(b1 b2)``."""
    if b1 <= 0 or b2 <= 0:
        raise ValueError("b1 and b2 must be positive")
    report = gaussian_trace_norm_bound(SymmetricCCM(math.sqrt(b1 * b2), c1, c2))
    extras = dict(report.extras, b1=b1, b2=b2)
    return CriterionReport(
        report.value,
        report.threshold,
        report.entangled,
        report.boundary,
        report.direction,
        report.branch,
        report.lower_bound_only,
        "b0 replaced by sqrt(b1 b2); " + report.detail,
        extras,
    )
