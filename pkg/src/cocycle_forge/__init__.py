"""Lyapunov exponents and constructive perturbations of SL(2,R) cocycles.

The library computes exponents and Oseledets splittings over finite and
circle base systems, certifies uniform hyperbolicity with invariant cones,
builds Kakutani castles, and constructs verified small-exponent
perturbations together with their continuous repair.
"""

from .base import (
    CircleBase,
    FiniteBase,
    IntervalSet,
    birkhoff_average,
    orbit,
    recurrence_locate,
    recurrence_threshold,
)
from .cocycle import (
    Cocycle,
    ExponentReport,
    FunctionCocycle,
    GridCocycle,
    PerturbedCocycle,
    Splitting,
    TabulatedCocycle,
    delta_ratio,
    finite_time_le,
    integrated_le_exact,
    integrated_le_subadditive,
    mixing_set,
    oseledets,
    product,
    residual_hyperbolicity,
    scaled_product,
)
from .errors import (
    CocycleForgeError,
    InternalContractError,
    InvalidBaseError,
    InvalidInputError,
    NoSplittingError,
    NotInOmegaError,
    NTooSmallError,
    PipelineInfeasibleError,
    PlanBudgetError,
    PreconditionError,
    WrongCaseError,
)
from .linalg2 import (
    Dir,
    SingularData,
    angle_between,
    apply_to_dir,
    direction_of,
    mat2,
    mix_direction,
    norm_bound_from_angles,
    op_norm,
    rotation,
    singular_data,
)

__version__ = "0.1.0"
