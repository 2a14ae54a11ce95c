"""
Amplitude damping with thermal noise, applied identically to both modes.

In the interaction picture the channel maps the characteristic function as
``chi(mu) -> chi(mu e^{-x/2}) exp(-(nbar + 1/2)(1 - e^{-x}) |mu|^2)`` with
``x = Gamma t``.  Gaussian kernels stay Gaussian and the generating
parameters of a non-Gaussian state transform linearly, so the realignment
criterion of the evolved state is again a derivative of an exponential
quadratic form.  Only the product ``Gamma t`` enters any formula.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NonMonotonicWarning, SingularMatrix
from .gaussian_core import (
    PAULI_X,
    SINGULAR_TOL,
    X_I,
    Z_PRIME,
    SigmaBasisMatrix,
    SymmetricCCM,
    beta_of,
    gamma_prime,
)
from .nongaussian import (
    DerivativeSpec,
    QuadraticExponent,
    _check_sign,
    beta_inverse,
    gaussian_moment,
    p_exponent,
    realigned_p_exponent,
)
from .realign import CriterionReport, RealignBranch, realigned_inverse, tau_value

#: Upper end of the Gamma t bracket searched by ``critical_time``.
GAMMA_T_MAX = 50.0
SCAN_POINTS = 1000


@dataclass(frozen=True)
class ChannelParams:
    """Channel after elapsed dimensionless time ``gamma_t = Gamma t`` with thermal occupation ``nbar``."""

    gamma_t: float
    nbar: float = 0.0

    def __post_init__(self):
        if self.gamma_t < 0 or self.nbar < 0:
            raise ValueError("Gamma t and nbar must be non-negative")

    @classmethod
    def from_rate(cls, Gamma: float, t: float, nbar: float = 0.0) -> "ChannelParams":
        if Gamma < 0 or t < 0:
            raise ValueError("Gamma and t must be non-negative")
        return cls(Gamma * t, nbar)

    @property
    def decay(self) -> float:
        """``exp(-Gamma t)``."""
        return math.exp(-self.gamma_t)


@dataclass(frozen=True)
class TmsvChannelScalars:
    """Evolved two-mode squeezed vacuum ``gamma_t' = {0, -LambdaC, N, 0}`` and ``Q``."""

    lam: float
    LambdaC: float
    N: float
    Q: float

    @property
    def gap(self) -> float:
        """``2 (N - LambdaC) - 1``; positive for every physical input."""
        return 2.0 * (self.N - self.LambdaC) - 1.0


def _check_lambda(lam: float) -> None:
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda={lam} outside (0, 1)")


def tmsv_scalars(lam: float, ch: ChannelParams) -> TmsvChannelScalars:
    e = ch.decay
    lam_c = lam * e / (1.0 - lam**2)
    n = lam**2 * e / (1.0 - lam**2) + ch.nbar * (1.0 - e) + 1.0
    q = e / ((1.0 + lam) * (2.0 * (n - lam_c) - 1.0))
    return TmsvChannelScalars(lam, lam_c, n, q)


def evolve_ccm(ccm: SymmetricCCM, ch: ChannelParams) -> SymmetricCCM:
    """``gamma_t = e^{-x} gamma + (nbar + 1/2)(1 - e^{-x}) s1 (x) I``."""
    e = ch.decay
    return SymmetricCCM(e * ccm.b0 + (ch.nbar + 0.5) * (1.0 - e), e * ccm.c1, e * ccm.c2)


# ---------------------------------------------------------------------------
# generating parameters
# ---------------------------------------------------------------------------

_EPS_ZETA = [0, 1, 6, 7]
_ETA_XI = [4, 5, 2, 3]


def param_transform(ccm: SymmetricCCM, ch: ChannelParams) -> np.ndarray:
    """8x8 matrix mapping ``(eps, xi, eta, zeta)`` to their evolved values.

    ``(eps_t, zeta_t) = e^{-x/2} beta_t beta^-1 (eps, zeta)`` and
    ``(eta_t, xi_t) = e^{-x/2} (beta_t^-1 + X)^-1 (beta^-1 + X) (eta, xi)``
    with ``X = s1 (x) I``.

    Raises
    ------
    SingularMatrix
        If ``beta_t^-1 + s1 (x) I`` is singular.
    """
    gp = gamma_prime(ccm)
    gp_t = gamma_prime(evolve_ccm(ccm, ch))
    binv = gp.s3_conjugate()
    binv_t = gp_t.s3_conjugate()
    shifted_t = binv_t + X_I
    eig = shifted_t.eigenvalues()
    if np.any(np.abs(eig) < 1e-12):
        raise SingularMatrix(
            "beta_t^-1 + s1 (x) I is singular",
            eigenvalue=float(eig[np.argmin(np.abs(eig))]),
        )
    half = math.exp(-0.5 * ch.gamma_t)
    first = half * (beta_of(gp_t) @ binv)
    second = half * (shifted_t.inverse() @ (binv + X_I))
    T = np.zeros((8, 8))
    T[np.ix_(_EPS_ZETA, _EPS_ZETA)] = first.dense()
    T[np.ix_(_ETA_XI, _ETA_XI)] = second.dense()
    return T


def evolve_gen_params(params, ccm: SymmetricCCM, ch: ChannelParams) -> np.ndarray:
    """Evolved generating parameters, ordered ``(eps1, eps2, xi1, xi2, eta1, eta2, zeta1, zeta2)``."""
    return param_transform(ccm, ch) @ np.asarray(params, dtype=float)


def gen_params_residual(params, ccm: SymmetricCCM, ch: ChannelParams) -> float:
    """Max-norm residual of the identity defining the parameter map."""
    x = np.asarray(params, dtype=float)
    xt = evolve_gen_params(x, ccm, ch)

    def side(v, gp):
        u = np.array([v[0] + v[4], v[1] + v[5], v[2] + v[6], v[3] + v[7]])
        return gp.s3_conjugate().dense() @ u + np.array([v[2], v[3], v[4], v[5]])

    lhs = math.exp(-0.5 * ch.gamma_t) * side(x, gamma_prime(ccm))
    rhs = side(xt, gamma_prime(evolve_ccm(ccm, ch)))
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# general evolved criterion
# ---------------------------------------------------------------------------


def _prefactor(ccm_t: SymmetricCCM) -> float:
    gp_t = gamma_prime(ccm_t)
    gp_rt = realigned_inverse(ccm_t, "plain").inverse()
    return math.sqrt(gp_rt.det() / gp_t.det())


def product_route_exponent(ccm: SymmetricCCM, ch: ChannelParams) -> QuadraticExponent:
    """Exponent of ``P P_t^-1 P_t^R`` in the initial parameters."""
    ccm_t = evolve_ccm(ccm, ch)
    gp_t = gamma_prime(ccm_t)
    gp_rt = realigned_inverse(ccm_t, "plain").inverse()
    T = param_transform(ccm, ch)
    p = p_exponent(beta_inverse(gamma_prime(ccm)))
    p_t = p_exponent(beta_inverse(gp_t)).transformed(T)
    p_rt = realigned_p_exponent(gp_rt).transformed(T)
    return p - p_t + p_rt


# v = (eps, -zeta, eta, -xi) as an 8x8 signed selection of the parameters
_V = np.zeros((8, 8))
for _row, (_col, _sgn) in enumerate(
    [(0, 1), (1, 1), (6, -1), (7, -1), (4, 1), (5, 1), (2, -1), (3, -1)]
):
    _V[_row, _col] = _sgn


def _reduced(g_t: SigmaBasisMatrix, g_rt: SigmaBasisMatrix) -> np.ndarray:
    """``-g_t^-1 + g_t^-1 Z' g_rt Z' g_t^-1`` as a dense array.

    Everything commutes in the sigma basis, so this is ``(r - g) / g^2`` on
    the shared eigenvalues.  The absolute error grows like the condition
    number of ``g_t``.
    """
    g = g_t.eigenvalues()
    small = np.abs(g) < SINGULAR_TOL
    if np.any(small):
        raise SingularMatrix("gamma_t is singular", eigenvalue=float(g[small][0]))
    r = g_rt.zprime_conjugate().eigenvalues()
    return SigmaBasisMatrix.from_eigenvalues((r - g) / g**2).dense()


def m_matrices(ccm: SymmetricCCM, ch: ChannelParams) -> tuple:
    """``(M, M', K)`` as dense 4x4 arrays.

    ``M = g' + e^{-x} g' R' g'`` with ``R' = -g_t'^-1 + g_t'^-1 Z' g_Rt' Z' g_t'^-1``
    couples ``(eps, -zeta)``.  ``M'`` is the same expression built from the
    double-primed matrices ``g'' = g' - s1 (x) I`` and couples ``(eta, -xi)``;
    the realignment acts on both pairs through ``Z'``.  ``K`` is the cross
    block ``g'' + e^{-x} g' g_t'^-1 (-g_t'' + Z' g_Rt'' Y) g_t''^-1 g''`` with
    ``Y = -Z' (s1 (x) s1)``.

    Raises
    ------
    SingularMatrix
        If ``gamma''`` or ``gamma_t''`` is singular (e.g. a vacuum kernel).
    """
    ccm_t = evolve_ccm(ccm, ch)
    e = ch.decay
    gp = gamma_prime(ccm)
    gp_t = gamma_prime(ccm_t)
    gp_rt = realigned_inverse(ccm_t, "plain").inverse()
    g2, g2_t, g2_rt = gp - X_I, gp_t - X_I, gp_rt - X_I

    def build(g, g_t, g_rt):
        gd = g.dense()
        return gd + e * gd @ _reduced(g_t, g_rt) @ gd

    m = build(gp, gp_t, gp_rt)
    m2 = build(g2, g2_t, g2_rt)
    y = -Z_PRIME @ np.kron(PAULI_X, PAULI_X)
    inner = -g2_t.dense() + Z_PRIME @ g2_rt.dense() @ y
    k = g2.dense() + e * gp.dense() @ gp_t.inverse().dense() @ inner @ g2_t.inverse().dense() @ g2.dense()
    return m, m2, k


def quadratic_route_exponent(ccm: SymmetricCCM, ch: ChannelParams) -> QuadraticExponent:
    """Exponent ``-v [[M, K], [K^T, M']] v^T / 2`` with ``v = (eps, -zeta, eta, -xi)``."""
    m, m2, k = m_matrices(ccm, ch)
    block = np.block([[m, k], [k.T, m2]])
    return QuadraticExponent(-_V.T @ block @ _V)


def reduced_matrices(ccm: SymmetricCCM, ch: ChannelParams) -> tuple:
    """``-g_t'^-1 + g_t'^-1 Z' g_Rt' Z' g_t'^-1`` and its double-primed counterpart.

    For a two-mode squeezed vacuum kernel both equal ``-{0,1,1,0} / (2N - 2Lambda - 1)``.
    """
    ccm_t = evolve_ccm(ccm, ch)
    gp_t = gamma_prime(ccm_t)
    gp_rt = realigned_inverse(ccm_t, "plain").inverse()
    return _reduced(gp_t, gp_rt), _reduced(gp_t - X_I, gp_rt - X_I)


def _branch_value(ccm, deriv, ch, route):
    ccm_t = evolve_ccm(ccm, ch)
    pref = _prefactor(ccm_t)
    p0 = p_exponent(beta_inverse(gamma_prime(ccm)))
    norm_moment = gaussian_moment(p0, deriv.orders)
    if deriv.normalization is not None:
        norm = deriv.normalization
    elif norm_moment == 0.0:
        raise DomainError(f"{deriv.label or deriv.orders} annihilates the kernel")
    else:
        norm = 1.0 / norm_moment
    q = product_route_exponent(ccm, ch) if route == "product" else quadratic_route_exponent(ccm, ch)
    return pref * norm * gaussian_moment(q, deriv.orders), pref


def evolved_criterion_general(
    ccm: SymmetricCCM, deriv: DerivativeSpec, ch: ChannelParams, route: str = "product"
) -> CriterionReport:
    """Realignment test for the evolved state ``O W_t`` of any symmetric kernel.

    ``route="product"`` differentiates ``P P_t^-1 P_t^R`` directly;
    ``route="quadratic"`` uses the ``M, M', K`` block form.  Both the plain and
    the parity branch are evaluated and the larger value reported.  The
    value is a lower bound on the realigned trace norm; it equals it only
    when the realigned operator has non-negative singular values.
    """
    if route not in ("product", "quadratic"):
        raise ValueError(f"unknown route {route!r}")
    values = {}
    for label in ("plain", "pi"):
        kernel = ccm.flipped() if label == "pi" else ccm
        values[label] = _branch_value(kernel, deriv, ch, route)
    best = max(values, key=lambda lb: values[lb][0])
    value, pref = values[best]
    kernel_t = evolve_ccm(ccm.flipped() if best == "pi" else ccm, ch)
    tau_t = tau_value(*kernel_t.as_tuple())
    return CriterionReport.greater_than(
        value,
        1.0,
        branch=RealignBranch(best, tau_t, value),
        lower_bound_only=True,
        detail=f"{route} route; Gamma t = {ch.gamma_t:g}, nbar = {ch.nbar:g}",
        extras={
            "prefactor": pref,
            "plain_value": values["plain"][0],
            "pi_value": values["pi"][0],
        },
    )


# ---------------------------------------------------------------------------
# two-mode squeezed vacuum kernels in closed form
# ---------------------------------------------------------------------------


def photon_normalization_tmsv(lam: float, sign: str) -> float:
    """``c_s`` (subtract) or ``c_a`` (add) for a two-mode squeezed vacuum kernel."""
    _check_lambda(lam)
    if _check_sign(sign) == "subtract":
        return (1.0 - lam**2) ** 2 / (lam**2 * (1.0 + lam**2))
    return (1.0 - lam**2) ** 2 / (1.0 + lam**2)


def evolved_photon_value_tmsv(lam: float, ch: ChannelParams, sign: str) -> float:
    _check_lambda(lam)
    s = tmsv_scalars(lam, ch)
    pref = 1.0 / s.gap
    a = 1.0 / (1.0 - lam)
    if _check_sign(sign) == "add":
        c = photon_normalization_tmsv(lam, "add")
        return pref * c / (1.0 + lam) ** 2 * ((lam * a + s.Q) ** 2 + (a - s.Q) ** 2)
    c = photon_normalization_tmsv(lam, "subtract")
    return pref * c * lam**2 / (1.0 + lam) ** 2 * ((a + lam * s.Q) ** 2 + lam**2 * (a - s.Q) ** 2)


def evolved_photon_criterion_tmsv(lam: float, ch: ChannelParams, sign: str) -> CriterionReport:
    """Closed-form realignment test for photon subtracted/added TMSV after the channel.

    Raises
    ------
    DomainError
        For ``lam`` outside ``(0, 1)``.
    """
    value = evolved_photon_value_tmsv(lam, ch, sign)
    s = tmsv_scalars(lam, ch)
    return CriterionReport.greater_than(
        value,
        1.0,
        branch=RealignBranch("plain", 1.0 / s.gap**2, value),
        lower_bound_only=ch.gamma_t > 0.0,
        detail=f"photon {_check_sign(sign)} TMSV, lambda = {lam:g}",
        extras={"LambdaC": s.LambdaC, "N": s.N, "Q": s.Q, "prefactor": 1.0 / s.gap},
    )


def second_moment_value(lam: float, ch: ChannelParams, sign: str) -> float:
    _check_lambda(lam)
    s = tmsv_scalars(lam, ch)
    k = (1.0 - lam) ** 3 / (1.0 - lam**4) * ch.decay
    if _check_sign(sign) == "add":
        return s.N - s.LambdaC + k
    return s.N - s.LambdaC - lam * k


def second_moment_evolved(lam: float, ch: ChannelParams, sign: str) -> CriterionReport:
    """Second-moment inequality for the evolved photon subtracted/added TMSV (entangled if < 1)."""
    value = second_moment_value(lam, ch, sign)
    return CriterionReport.less_than(
        value, 1.0, detail=f"second moments, photon {_check_sign(sign)} TMSV, lambda = {lam:g}"
    )


# ---------------------------------------------------------------------------
# critical time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalTime:
    gamma_t: float
    t: float | None
    nonmonotonic: bool = False


def _margin(report: CriterionReport) -> float:
    """Positive while the report certifies entanglement."""
    d = report.value - report.threshold
    return d if report.direction == "greater" else -d


def critical_time(
    criterion,
    lam: float,
    Gamma: float | None = None,
    nbar: float = 0.0,
    bracket: float = GAMMA_T_MAX,
    scan_points: int = SCAN_POINTS,
    xtol: float = 1e-12,
    noise: float = 1e-13,
) -> CriticalTime | None:
    """Earliest time at which ``criterion`` stops certifying entanglement.

    ``criterion(lam, ChannelParams)`` must return a CriterionReport.  The
    margin is scanned on ``scan_points`` points of ``Gamma t`` in
    ``[0, bracket]``; the first sign change is refined with Brent's method.
    Margins within ``noise`` of zero count as neither sign, so a criterion
    that only approaches its threshold asymptotically has no crossing.
    Returns None when no crossing lies in the bracket.  A criterion that is
    not satisfied at ``t = 0`` has critical time 0.

    Warns
    -----
    NonMonotonicWarning
        When the scan sees more than one sign change.
    """
    def margin(x):
        return _margin(criterion(lam, ChannelParams(x, nbar)))

    grid = np.linspace(0.0, bracket, scan_points)
    vals = np.array([margin(x) for x in grid])
    # margins that only decay into rounding noise are not crossings
    state = np.where(vals > noise, 1, np.where(vals < -noise, -1, 0))
    if state[0] != 1:
        return CriticalTime(0.0, 0.0 if Gamma else None)
    keep = np.flatnonzero(state != 0)
    flips = np.flatnonzero(state[keep][1:] != state[keep][:-1])
    if flips.size == 0:
        return None
    nonmono = flips.size > 1
    if nonmono:
        warnings.warn(
            f"criterion crosses its threshold {flips.size} times for lambda={lam}",
            NonMonotonicWarning,
            stacklevel=2,
        )
    lo, hi = grid[keep[flips[0]]], grid[keep[flips[0] + 1]]
    x = brentq(margin, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return CriticalTime(x, x / Gamma if Gamma else None, nonmono)


CRITERIA = {
    "realignment": evolved_photon_criterion_tmsv,
    "second-moment": second_moment_evolved,
}


def criterion_for(name: str, sign: str):
    """Evaluator ``(lam, ch) -> CriterionReport`` for a named criterion and photon operation."""
    fn = CRITERIA[name]
    sign = _check_sign(sign)
    return lambda lam, ch: fn(lam, ch, sign)


def critical_times(lam: float, sign: str, nbar: float, Gamma: float | None = None) -> dict:
    """Critical times of the realignment and second-moment tests for one initial state.

    A crossing beyond the search bracket is reported as ``inf``.
    """
    out = {}
    for name in CRITERIA:
        res = critical_time(criterion_for(name, sign), lam, Gamma=Gamma, nbar=nbar)
        out[name] = math.inf if res is None else res.gamma_t
    return out


def crossover_lambda(sign: str, nbar: float, lambdas) -> float | None:
    """Squeezing at which the realignment and second-moment critical times coincide.

    The difference ``t_realign - t_moment`` is evaluated on ``lambdas``; its
    first sign change is refined with Brent's method.  Returns None if the
    difference keeps one sign over the grid.
    """
    def diff(lam):
        t = critical_times(lam, sign, nbar)
        return t["realignment"] - t["second-moment"]

    lambdas = np.asarray(lambdas, dtype=float)
    vals = np.array([diff(lam) for lam in lambdas])
    finite = np.isfinite(vals)
    for i in range(len(lambdas) - 1):
        if finite[i] and finite[i + 1] and vals[i] * vals[i + 1] < 0.0:
            return brentq(diff, lambdas[i], lambdas[i + 1], xtol=1e-10)
    return None
