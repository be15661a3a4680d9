"""Aggregation sampling of bandlimited graph signals."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    FrequencyRepresentation,
    ShiftOperator,
    SpectralDecomposition,
    build_psi,
    decompose,
    gft,
    igft,
    node_pattern,
    synthesize_bandlimited,
)
from .sampling import (  # noqa: F401
    AggregationSequence,
    SelectionPlan,
    admissible_selections,
    aggregate,
    aggregate_spectral,
    aggregation_interpolate,
    aggregation_sample,
    build_psi_i,
    check_recovery_conditions,
    selection_interpolate,
)
from .noisy import (  # noqa: F401
    NoiseKind,
    NoiseModel,
    blue_interpolate,
    select_n0,
    select_sampling_node,
    simulate_estimation,
)
from .sparse import (  # noqa: F401
    brute_force_l0,
    check_identifiability,
    coherence,
    is_full_spark,
    l1_recover,
    sensing_system,
)
from .spaceshift import (  # noqa: F401
    ObservationPlan,
    build_stacked_system,
    spaceshift_blue,
    structured_plan,
)
