"""Online Newton's method (ONM) for time-varying, possibly nonconvex losses.

The package is organised in layers: ``linalg`` (small dense symmetric
solves and spectra), ``oracles`` (loss families, derivative checks,
regularity-constant estimates, round optima), ``algorithms`` (ONM, OGD and
the scalar quadratic map), ``analysis`` (dynamic regret and bound
evaluation), ``bench`` (moving-target localization experiments),
``verification`` (randomized property suites) and ``cli``.
"""

from .algorithms import (
    OgdConfig,
    OnlineGradientDescent,
    OnlineNewton,
    OnmState,
    QuadraticMapParams,
    newton_step,
    ogd_step,
    onm_step,
    quadratic_map_converge,
    quadratic_map_fixed_points,
    quadratic_map_iterate,
)
from .analysis import (
    RegretLedger,
    RoundRecord,
    bound_comparison,
    compute_regret,
    corollary1_bound,
    theorem1_bound,
    total_variation,
)
from .bench import ExperimentConfig, MotionModel, run_experiment, run_replication
from .errors import (
    AssumptionViolated,
    ConditionFailed,
    ConfigError,
    DegenerateOptimum,
    DerivativeMismatch,
    NoInteriorMinimum,
    NoRealFixedPoint,
    OnlineNewtonError,
    PolishFailed,
    SensorCoincidence,
    SingularHessian,
    SingularMatrix,
)
from .linalg import min_singular_value, operator_norm, solve_symmetric
from .oracles import (
    CallableOracle,
    LocalizationOracle,
    LossOracle,
    QuadraticOracle,
    RegularityConstants,
    SensorArray,
    SmoothNonconvexOracle,
    brute_force_optimum,
    check_derivatives,
    estimate_constants,
    localization_loss,
    quadratic_loss,
)

__version__ = "0.1.0"
