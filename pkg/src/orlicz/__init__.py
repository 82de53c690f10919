"""Exponential Orlicz spaces: generators, moment functions, norms and experiments."""

__version__ = "0.1.0"

from .config import DEFAULT, Tolerances, with_overrides
from .convex import (
    ClosedFormW,
    GridFunction,
    NFunctionSpec,
    biconjugate_residual,
    fenchel_conjugate,
    n_from_w,
    psi_from_w,
    w_from_psi,
)
from .errors import (
    AliasingError,
    BudgetExceeded,
    DomainError,
    InsufficientTailError,
    OrliczError,
    OutsideSpaceError,
    TruncatedDomainError,
    ValidationError,
)
from .psi import (
    MR,
    Const,
    GridBacked,
    LogPower,
    Product,
    PsiSpec,
    SlowlyVaryingSpec,
    ZBeta,
    essential_order,
    psi_eval,
    slowly_varying_residual,
    tail_profile,
)
from .norms import (
    MomentCurve,
    NormReport,
    Sample,
    g0_membership,
    gpsi_norm,
    lp_norm,
    luxemburg_norm,
    moment_curve,
    tail_exponent_fit,
    ucn_diagnostic,
)
