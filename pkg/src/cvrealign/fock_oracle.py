"""
Brute-force ground truth in a truncated Fock basis.

Density matrices are stored as real 4-index arrays ``rho[k1, k2, m1, m2]``
(``<k1 k2| rho |m1 m2>``) with every index in ``0..cutoff``.  Gaussian
elements come from Taylor coefficients of an exponential quadratic form;
photon operations and channels act directly on the tensor; realignment is
an index permutation followed by an SVD.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln

from .channel import ChannelParams, evolve_ccm, evolved_photon_value_tmsv, param_transform
from .errors import CapacityExceeded, CutoffTooSmall, DomainError
from .gaussian_core import X_I, SymmetricCCM, beta, beta_of, gamma_prime
from .nongaussian import (
    _U,
    DerivativeSpec,
    QuadraticExponent,
    _check_sign,
    gaussian_moment,
    p_exponent,
    beta_inverse,
    photon_pm_criterion,
)
from .realign import gaussian_trace_norm_bound

DEFAULT_CUTOFF = 40
MAX_TENSOR_SIZE = 10**8

MAGIC = b"CVRO"
FORMAT_VERSION = 1


def default_cutoff() -> int:
    """Oracle cutoff, overridable through the ``CVREAL_CUTOFF`` environment variable."""
    return int(os.environ.get("CVREAL_CUTOFF", DEFAULT_CUTOFF))


# ---------------------------------------------------------------------------
# Taylor coefficients of exp(x A x^T / 2 + L x + c0)
# ---------------------------------------------------------------------------


def _coeffs(A, L, caps):
    if not caps:
        return np.array(1.0)
    rest = _coeffs(A[1:, 1:], L[1:], caps[1:])
    out = np.zeros((caps[0] + 1,) + rest.shape)
    out[0] = rest
    couplings = [(j, A[0, j]) for j in range(1, len(caps)) if A[0, j] != 0.0 and caps[j] > 0]
    for k in range(caps[0]):
        # (k+1) c[k+1] = L0 c[k] + A00 c[k-1] + sum_j A0j c[k] shifted by e_j
        nxt = L[0] * out[k]
        if k:
            nxt = nxt + A[0, 0] * out[k - 1]
        for j, a in couplings:
            ax = j - 1
            dst = [slice(None)] * rest.ndim
            src = [slice(None)] * rest.ndim
            dst[ax] = slice(1, None)
            src[ax] = slice(None, -1)
            nxt[tuple(dst)] += a * out[k][tuple(src)]
        out[k + 1] = nxt / (k + 1)
    return out


def taylor_coeffs(q: QuadraticExponent, caps) -> np.ndarray:
    """Coefficients of ``prod x_i^k_i`` in ``exp(x A x^T/2 + L x + c0)`` for ``k_i <= caps[i]``.

    Uses ``(k_i + 1) c_{k+e_i} = L_i c_k + sum_j A_ij c_{k-e_j}``, which
    follows from ``dF/dx_i = (L_i + (A x)_i) F``.

    Raises
    ------
    CapacityExceeded
        If the coefficient tensor would hold more than ``MAX_TENSOR_SIZE`` entries.
    """
    caps = tuple(int(c) for c in caps)
    if len(caps) != q.n or any(c < 0 for c in caps):
        raise ValueError("caps must give one non-negative order per variable")
    size = math.prod(c + 1 for c in caps)
    if size > MAX_TENSOR_SIZE:
        raise CapacityExceeded(f"{size} coefficients requested (limit {MAX_TENSOR_SIZE})")
    return _coeffs(q.A, q.L, caps) * math.exp(q.c0)


def _sqrt_factorial_grid(cutoff: int, ndim: int = 4) -> np.ndarray:
    half_lf = 0.5 * gammaln(np.arange(cutoff + 1) + 1.0)
    grid = np.zeros((cutoff + 1,) * ndim)
    for ax in range(ndim):
        shape = [1] * ndim
        shape[ax] = cutoff + 1
        grid = grid + half_lf.reshape(shape)
    return np.exp(grid)


# ---------------------------------------------------------------------------
# tensors
# ---------------------------------------------------------------------------


@dataclass
class FockTensor:
    """Truncated two-mode operator ``rho[k1, k2, m1, m2]``, indices ``0..cutoff``."""

    cutoff: int
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.cutoff + 1,) * 4:
            raise ValueError(f"data shape {self.data.shape} does not match cutoff {self.cutoff}")

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** 2

    def matrix(self) -> np.ndarray:
        """Rows ``(k1, k2)``, columns ``(m1, m2)``."""
        return self.data.reshape(self.dim, self.dim)

    def realigned_matrix(self) -> np.ndarray:
        """``rho^R[(k1, k2), (m1, m2)] = rho[k1, m1, k2, m2]``."""
        return self.data.transpose(0, 2, 1, 3).reshape(self.dim, self.dim)

    def trace(self) -> float:
        return float(np.einsum("ijij->", self.data))

    def normalized(self) -> "FockTensor":
        return FockTensor(self.cutoff, self.data / self.trace(), dict(self.meta))

    def truncated(self, cutoff: int) -> "FockTensor":
        s = slice(0, cutoff + 1)
        return FockTensor(cutoff, self.data[s, s, s, s].copy(), dict(self.meta))

    def hermiticity_error(self) -> float:
        m = self.matrix()
        return float(np.max(np.abs(m - m.T)))

    def min_eigenvalue(self) -> float:
        m = self.matrix()
        return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])

    def expectation(self, op1: np.ndarray, op2: np.ndarray) -> float:
        """``Tr(rho (op1 (x) op2))`` for single-mode matrices in the same truncation."""
        return float(np.einsum("ijkl,ki,lj->", self.data, op1, op2))

    def moments(self) -> SymmetricCCM:
        """Second moments ``(b0, c1, c2)`` in the sign convention of ``SymmetricCCM``.

        ``b0`` is taken from mode 1; ``c1 = -<a1 a2>`` and ``c2 = <a1^dag a2>``.
        """
        a = annihilation(self.cutoff)
        eye = np.eye(self.cutoff + 1)
        n1 = self.expectation(a.T @ a, eye)
        a1a2 = self.expectation(a, a)
        a1d_a2 = self.expectation(a.T, a)
        return SymmetricCCM(n1 + 0.5, -a1a2, a1d_a2)


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def gaussian_fock(ccm: SymmetricCCM, cutoff: int | None = None) -> FockTensor:
    """Fock elements of the zero-mean symmetric Gaussian state with moments ``ccm``.

    ``rho_k = sqrt(k1! k2! m1! m2!) c_k / sqrt(det gamma')`` where ``c_k`` are
    the Taylor coefficients of ``exp((s, s') (s1 (x) I + beta) (s, s')^T / 2)``.
    """
    cutoff = default_cutoff() if cutoff is None else cutoff
    gp = gamma_prime(ccm)
    q = QuadraticExponent((X_I + beta(ccm)).dense())
    c = taylor_coeffs(q, (cutoff,) * 4)
    data = c * _sqrt_factorial_grid(cutoff) / math.sqrt(gp.det())
    return FockTensor(cutoff, data, {"state": "gaussian", "ccm": ccm.as_tuple()})


def _falling_sqrt(cutoff: int, m: int, raise_: bool) -> np.ndarray:
    """``sqrt(n (n-1) ... (n-m+1))`` (raise_=False) or ``sqrt((n+1)...(n+m))`` (raise_=True)."""
    n = np.arange(cutoff + 1, dtype=float)
    if raise_:
        return np.exp(0.5 * (gammaln(n + m + 1.0) - gammaln(n + 1.0)))
    out = np.zeros(cutoff + 1)
    ok = n >= m
    out[ok] = np.exp(0.5 * (gammaln(n[ok] + 1.0) - gammaln(n[ok] - m + 1.0)))
    return out


def apply_photon_ops(f: FockTensor, sign: str, m: int = 1) -> FockTensor:
    """Subtract (``a^m``) or add (``a^dag^m``) photons on both modes and renormalize.

    Subtraction shortens the cutoff by ``m``.  The removed trace is kept as
    ``meta["normalization"]`` (the inverse of the raw trace).

    Raises
    ------
    CutoffTooSmall
        If ``cutoff < m + 2``.
    DomainError
        If the operation annihilates the state.
    """
    sign = _check_sign(sign)
    if f.cutoff < m + 2:
        raise CutoffTooSmall(f"cutoff {f.cutoff} too small for {m} photon(s)")
    if sign == "subtract":
        n_out = f.cutoff - m
        w = _falling_sqrt(n_out, m, raise_=True)
        s = slice(m, None)
        data = f.data[s, s, s, s] * np.einsum("i,j,k,l->ijkl", w, w, w, w)
    else:
        n_out = f.cutoff
        w = _falling_sqrt(n_out, m, raise_=False)
        data = np.zeros_like(f.data)
        s = slice(0, n_out + 1 - m)
        data[m:, m:, m:, m:] = f.data[s, s, s, s]
        data *= np.einsum("i,j,k,l->ijkl", w, w, w, w)
    raw = float(np.einsum("ijij->", data))
    if not raw > 1e-300:
        raise DomainError(f"photon {sign} annihilates the state")
    meta = dict(f.meta, photon=(sign, m), normalization=1.0 / raw)
    return FockTensor(n_out, data / raw, meta)


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------


def _log_binom(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _loss_mode(data: np.ndarray, eta: float, axes: tuple) -> np.ndarray:
    """Pure-loss Kraus map on one mode; ``axes`` are its (ket, bra) axes."""
    if eta >= 1.0:
        return data.copy()
    d = np.moveaxis(data, axes, (0, 1))
    n_max = d.shape[0] - 1
    out = np.zeros_like(d)
    if eta <= 0.0:
        out[0, 0] = np.einsum("ii...->...", d)
        return np.moveaxis(out, (0, 1), axes)
    n = np.arange(n_max + 1, dtype=float)
    for k in range(n_max + 1):
        # <n'|A_k|n'+k> = sqrt(C(n'+k, k)) eta^(n'/2) (1-eta)^(k/2)
        nn = n[: n_max + 1 - k]
        log_amp = 0.5 * _log_binom(nn + k, k) + 0.5 * nn * math.log(eta)
        if k:
            log_amp = log_amp + 0.5 * k * math.log1p(-eta)
        amp = np.exp(log_amp)
        w = np.multiply.outer(amp, amp)
        out[: n_max + 1 - k, : n_max + 1 - k] += w[:, :, None, None] * d[k:, k:]
    return np.moveaxis(out, (0, 1), axes)


def _amplifier_mode(data: np.ndarray, gain: float, axes: tuple) -> np.ndarray:
    """Quantum-limited amplifier on one mode (exact below the cutoff)."""
    if gain <= 1.0:
        return data.copy()
    d = np.moveaxis(data, axes, (0, 1))
    n_max = d.shape[0] - 1
    out = np.zeros_like(d)
    n = np.arange(n_max + 1, dtype=float)
    r = (gain - 1.0) / gain
    for k in range(n_max + 1):
        # <n+k|B_k|n> = sqrt(C(n+k, k)) g^(-(n+1)/2) r^(k/2)
        nn = n[: n_max + 1 - k]
        amp = np.exp(
            0.5 * _log_binom(nn + k, k) - 0.5 * (nn + 1.0) * math.log(gain) + 0.5 * k * math.log(r)
        )
        w = np.multiply.outer(amp, amp)
        out[k:, k:] += w[:, :, None, None] * d[: n_max + 1 - k, : n_max + 1 - k]
    return np.moveaxis(out, (0, 1), axes)


def evolve_fock_pure_loss(f: FockTensor, ch: ChannelParams) -> FockTensor:
    """Amplitude damping with zero thermal occupation via Kraus operators on both modes."""
    if ch.nbar != 0.0:
        raise DomainError("pure-loss route requires nbar = 0")
    eta = math.exp(-ch.gamma_t)
    data = _loss_mode(f.data, eta, (0, 2))
    data = _loss_mode(data, eta, (1, 3))
    return FockTensor(f.cutoff, data, dict(f.meta, channel=(ch.gamma_t, ch.nbar), route="kraus"))


def evolve_fock_kraus(f: FockTensor, ch: ChannelParams) -> FockTensor:
    """Thermal attenuator as pure loss followed by a quantum-limited amplifier.

    With transmissivity ``eta = exp(-Gamma t)`` the gain is
    ``g = 1 + nbar (1 - eta)`` and the loss stage transmits ``eta / g``;
    the composition reproduces ``b0 -> eta b0 + (nbar + 1/2)(1 - eta)``.
    """
    eta = math.exp(-ch.gamma_t)
    gain = 1.0 + ch.nbar * (1.0 - eta)
    data = f.data
    for axes in ((0, 2), (1, 3)):
        data = _loss_mode(data, eta / gain, axes)
        data = _amplifier_mode(data, gain, axes)
    return FockTensor(f.cutoff, data, dict(f.meta, channel=(ch.gamma_t, ch.nbar), route="kraus"))


# ---------------------------------------------------------------------------
# generating functional in Fock space
# ---------------------------------------------------------------------------

# (xi1, xi2, eta1, eta2) out of the eight parameters
_J = np.zeros((4, 8))
for _k, _i in enumerate((2, 3, 4, 5)):
    _J[_k, _i] = 1.0
# eta . xi as (1/2) x C x^T
_ETA_XI = np.zeros((8, 8))
for _k in range(2):
    _ETA_XI[4 + _k, 2 + _k] = _ETA_XI[2 + _k, 4 + _k] = 1.0


def joint_exponent(ccm: SymmetricCCM, ch: ChannelParams | None = None) -> QuadraticExponent:
    """12-variable exponent ``(s1, s2, s1', s2', eps, xi, eta, zeta)`` of the evolved ``W``.

    Taylor coefficients in ``s`` of its exponential, times
    ``sqrt(k! m!)``, are the Fock elements of ``W_t``; derivatives in the
    eight parameters at zero then give the non-Gaussian state.
    """
    ch = ch or ChannelParams(0.0, 0.0)
    ccm_t = evolve_ccm(ccm, ch)
    gp_t = gamma_prime(ccm_t)
    beta_t = beta_of(gp_t).dense()
    T = param_transform(ccm, ch)
    b_st = (beta_t @ _J + _U) @ T
    a_xx = (
        p_exponent(beta_inverse(gamma_prime(ccm))).A
        - T.T @ p_exponent(beta_inverse(gp_t)).A @ T
        + T.T @ (_J.T @ beta_t @ _J + _ETA_XI) @ T
    )
    A = np.zeros((12, 12))
    A[:4, :4] = (X_I + beta_of(gp_t)).dense()
    A[:4, 4:] = b_st
    A[4:, :4] = b_st.T
    A[4:, 4:] = a_xx
    return QuadraticExponent(A, None, -0.5 * math.log(gp_t.det()))


def joint_quadratic_fock(
    ccm: SymmetricCCM,
    deriv: DerivativeSpec,
    ch: ChannelParams | None = None,
    cutoff: int | None = None,
) -> FockTensor:
    """Fock tensor of the (possibly channel-evolved) non-Gaussian state ``O W_t``.

    The normalization is ``deriv.normalization`` or, if unset, ``1 / O P``
    computed analytically; the truncation leak is ``1 - trace``.
    """
    cutoff = default_cutoff() if cutoff is None else cutoff
    q = joint_exponent(ccm, ch)
    orders = deriv.orders
    active = [4 + i for i, k in enumerate(orders) if k]
    degree = sum(orders)

    gauss = taylor_coeffs(QuadraticExponent(q.A[:4, :4], None, q.c0), (cutoff,) * 4)

    # polynomial prefactor in s produced by the parameter derivatives
    keep = list(range(4)) + active
    a_poly = q.A[np.ix_(keep, keep)].copy()
    a_poly[:4, :4] = 0.0
    sub_orders = [orders[i - 4] for i in active]
    poly = taylor_coeffs(QuadraticExponent(a_poly), (degree,) * 4 + tuple(sub_orders))
    poly = poly[(Ellipsis,) + tuple(sub_orders)] * math.prod(math.factorial(k) for k in sub_orders)

    c = np.zeros_like(gauss)
    for alpha in zip(*np.nonzero(poly)):
        if max(alpha) > cutoff:
            continue
        dst = tuple(slice(a, None) for a in alpha)
        src = tuple(slice(0, cutoff + 1 - a) for a in alpha)
        c[dst] += poly[alpha] * gauss[src]

    if deriv.normalization is None:
        norm = 1.0 / gaussian_moment(p_exponent(beta_inverse(gamma_prime(ccm))), orders)
    else:
        norm = deriv.normalization
    data = norm * c * _sqrt_factorial_grid(cutoff)
    f = FockTensor(cutoff, data, {"state": deriv.label or "derived", "normalization": norm})
    f.meta["leak"] = 1.0 - f.trace()
    return f


def photon_state_fock(
    ccm: SymmetricCCM,
    sign: str | None,
    m: int = 1,
    ch: ChannelParams | None = None,
    cutoff: int | None = None,
    route: str = "auto",
) -> FockTensor:
    """Convenience builder for Gaussian / photon-subtracted / photon-added states.

    ``route="ladder"`` builds the Gaussian tensor, applies ladder operators
    and Kraus maps; ``route="joint"`` uses the generating functional.
    ``"auto"`` picks the ladder route.
    """
    cutoff = default_cutoff() if cutoff is None else cutoff
    if route == "joint" and sign is not None:
        return joint_quadratic_fock(ccm, DerivativeSpec.photon(sign, m), ch, cutoff)
    extra = m if sign is not None and _check_sign(sign) == "subtract" else 0
    f = gaussian_fock(ccm, cutoff + extra)
    if sign is not None:
        f = apply_photon_ops(f, sign, m)
    if ch is not None and ch.gamma_t > 0.0:
        f = evolve_fock_kraus(f, ch)
    return f


# ---------------------------------------------------------------------------
# realignment and trace norm
# ---------------------------------------------------------------------------


def _blocks(mat: np.ndarray):
    rows, cols = np.nonzero(mat)
    n = mat.shape[0]
    if rows.size == 0:
        return []
    graph = coo_matrix((np.ones(rows.size), (rows, cols + n)), shape=(2 * n, 2 * n))
    ncomp, labels = connected_components(graph, directed=False)
    out = []
    for c in range(ncomp):
        r = np.flatnonzero(labels[:n] == c)
        k = np.flatnonzero(labels[n:] == c)
        if r.size and k.size:
            out.append((r, k))
    return out


def singular_values(mat: np.ndarray) -> np.ndarray:
    """Singular values, exploiting any block structure of the sparsity pattern."""
    parts = [np.linalg.svd(mat[np.ix_(r, k)], compute_uv=False) for r, k in _blocks(mat)]
    # zero rows and columns contribute zero singular values
    out = np.zeros(min(mat.shape))
    if parts:
        vals = np.sort(np.concatenate(parts))[::-1]
        out[: vals.size] = vals
    return out


def realign_and_trace_norm(f: FockTensor) -> tuple:
    """``(trace_norm, trace)`` of the realigned operator ``rho^R``."""
    mat = f.realigned_matrix()
    return float(np.sum(singular_values(mat))), float(np.trace(mat))


def converged_trace_norm(builder, start: int = 24, step: int = 8, max_cutoff: int = 48,
                         tol: float = 1e-7) -> dict:
    """Raise the cutoff until the realigned trace norm changes by less than ``tol`` (relative).

    ``builder(cutoff)`` must return a FockTensor.  The result records every
    cutoff tried, whether the sequence was non-decreasing, and whether it
    converged within ``max_cutoff``.
    """
    history = []
    cutoff = start
    while True:
        tn, tr = realign_and_trace_norm(builder(cutoff))
        history.append((cutoff, tn, tr))
        if len(history) > 1 and abs(history[-1][1] - history[-2][1]) < tol * max(1.0, abs(history[-1][1])):
            converged = True
            break
        if cutoff + step > max_cutoff:
            converged = False
            break
        cutoff += step
    values = [h[1] for h in history]
    return {
        "trace_norm": history[-1][1],
        "trace": history[-1][2],
        "cutoff": history[-1][0],
        "converged": converged,
        "monotone": all(b >= a - 1e-12 for a, b in zip(values, values[1:])),
        "history": history,
    }


STATES = {"tmsv": None, "sub": "subtract", "add": "add"}


def analytic_tmsv_value(state: str, lam: float, ch: ChannelParams | None = None) -> float:
    """Closed-form realignment value for a TMSV, or its photon subtracted/added version."""
    if state not in STATES:
        raise ValueError(f"state must be one of {sorted(STATES)}")
    ccm = SymmetricCCM.tmsv(lam)
    sign = STATES[state]
    if sign is None:
        kernel = ccm if ch is None else evolve_ccm(ccm, ch)
        return gaussian_trace_norm_bound(kernel).value
    if ch is None or ch.gamma_t == 0.0:
        return photon_pm_criterion(ccm, sign).value
    return evolved_photon_value_tmsv(lam, ch, sign)


def oracle_comparison(state: str, lam: float, ch: ChannelParams | None = None,
                      cutoff: int | None = None, converge: bool = True, **kw) -> dict:
    """Analytic value against the truncated-Fock trace norm of the same state.

    With ``converge=True`` the cutoff is raised from 24 in steps of 8 up to
    ``cutoff`` (default from ``default_cutoff``) until the trace norm is
    stable; otherwise a single tensor at ``cutoff`` is used.
    """
    analytic = analytic_tmsv_value(state, lam, ch)
    cutoff = default_cutoff() if cutoff is None else cutoff
    sign = STATES[state]

    def builder(n):
        return photon_state_fock(SymmetricCCM.tmsv(lam), sign, 1, ch, n)

    if converge:
        res = converged_trace_norm(builder, start=min(24, cutoff), max_cutoff=cutoff, **kw)
    else:
        tn, tr = realign_and_trace_norm(builder(cutoff))
        res = {"trace_norm": tn, "trace": tr, "cutoff": cutoff, "converged": None}
    dev = abs(res["trace_norm"] - analytic)
    return {
        "analytic": analytic,
        "trace_norm": res["trace_norm"],
        "realigned_trace": res["trace"],
        "abs_deviation": dev,
        "rel_deviation": dev / abs(analytic),
        "cutoff": res["cutoff"],
        "converged": res["converged"],
    }


# ---------------------------------------------------------------------------
# binary dump
# ---------------------------------------------------------------------------


def dump_tensor(f: FockTensor, path) -> None:
    """Write ``"CVRO" | version u32 | cutoff u32 | float64 data`` (little endian, row major)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, f.cutoff))
        fh.write(np.ascontiguousarray(f.data, dtype="<f8").tobytes())


def load_tensor(path) -> FockTensor:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != MAGIC:
            raise ValueError(f"{path} is not a CVRO tensor file")
        version, cutoff = struct.unpack("<II", head[4:])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported CVRO version {version}")
        raw = fh.read()
    n = (cutoff + 1) ** 4
    if len(raw) != 8 * n:
        raise ValueError(f"expected {8 * n} data bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8").reshape((cutoff + 1,) * 4).astype(float)
    return FockTensor(cutoff, data)
