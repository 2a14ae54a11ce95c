"""Realignment entanglement criteria for two-mode continuous-variable states."""

from .errors import (
    CapacityExceeded,
    CutoffTooSmall,
    CVRealignError,
    DegenerateState,
    DomainError,
    NonMonotonicWarning,
    OverflowGuard,
    SingularMatrix,
)
from .gaussian_core import (
    KVector,
    SigmaBasisMatrix,
    SymmetricCCM,
    beta,
    gamma_prime,
    k_coefficients,
    mixture_ccm,
    physicality_check,
    simon_ppt_check,
    symplectic_eigenvalues,
)
from .realign import (
    CriterionReport,
    RealignBranch,
    gaussian_criterion_nonsymmetric,
    gaussian_trace_norm_bound,
    realigned_inverse,
)
from .nongaussian import (
    DerivativeSpec,
    QuadraticExponent,
    f2_closed_form,
    gaussian_moment,
    mixture_criteria,
    photon_pm_criterion,
    realigned_ccm_prime,
)
from .channel import (
    ChannelParams,
    critical_time,
    evolve_ccm,
    evolve_gen_params,
    evolved_criterion_general,
    evolved_photon_criterion_tmsv,
    second_moment_evolved,
    tmsv_scalars,
)
from .fock_oracle import (
    FockTensor,
    apply_photon_ops,
    evolve_fock_kraus,
    evolve_fock_pure_loss,
    gaussian_fock,
    joint_quadratic_fock,
    realign_and_trace_norm,
    taylor_coeffs,
)

__version__ = "0.1.0"
