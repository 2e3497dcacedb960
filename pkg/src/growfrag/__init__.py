"""Growth-fragmentation simulator and spectral toolkit.

Non-dissipative splitting scheme for linear growth with equal binary
fission on a geometric grid, with the dominant-mode machinery needed to
verify the cyclic long-time behaviour of the rescaled solution.
"""

from .config import RunConfig, max_stable_half_extent, parse_config_file
from .diagnostics import (
    EntropyReport,
    OscillationMetrics,
    attractor_distance,
    attractor_distance_series,
    balance_drift,
    cesaro_average,
    entropy_report,
    hinge,
    H_ABS,
    H_QUADRATIC,
    oscillation_metrics,
    quadratic_dissipation,
    relative_entropy,
    weighted_norm,
)
from .errors import (
    BlowupError,
    ConfigError,
    ConvergenceError,
    GrowFragError,
    StabilityError,
)
from .grid import (
    LN2,
    GeometricGrid,
    Profile,
    StateVector,
    custom_profile,
    peak_profile,
    sample_initial,
    smooth_profile,
)
from .scheme import (
    DivisionRate,
    Trajectory,
    diffusive_reference_run,
    diffusive_step,
    diffusive_transport_step,
    fragmentation_step,
    run,
    step,
    transport_step,
)
from .spectral import (
    ModeCoefficients,
    PerronSolution,
    adjoint_moment,
    build_step_matrix,
    dominant_mode,
    e2_norm,
    evaluate_attractor,
    evaluate_attractor_poisson,
    inner_product,
    mode_phase,
    perron_profile,
    project,
)

__version__ = "0.1.0"
