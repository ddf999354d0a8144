"""Operator-splitting solver for 3D stochastic Maxwell equations on a PEC cuboid."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BoundaryConsistencyError,
    ConfigurationError,
    DegenerateFitError,
    DimensionError,
    SplitmaxError,
    StatisticsError,
    StencilError,
)
from .grid import (  # noqa: E402
    Cuboid,
    GridSpec,
    StateZ,
    discrete_curl,
    discrete_curl_alpha,
    discrete_div,
    flatten,
    inner_l2,
    norm_l2,
    unflatten,
)
from .noise import (  # noqa: E402
    BrownianLattice,
    ModeBasis,
    NoiseIncrement,
    NoiseSpec,
    grad_increment_field,
    increment_field,
    sample_lattice,
    trace_q,
)
from .subflows import SchemeKind, apply_stochastic_shift, apply_sub_semigroup, sub_flow  # noqa: E402
from .stepper import SplitOrder, StepperConfig, Trajectory, one_step, run_trajectory  # noqa: E402
from .analysis import (  # noqa: E402
    ConvergenceReport,
    CoupledSetup,
    EnergySeries,
    convergence_study,
    divergence_residual,
    divergence_study,
    energy_series,
    fit_order,
    mc_aggregate,
    ms_error,
)
from .presets import make_initial  # noqa: E402
