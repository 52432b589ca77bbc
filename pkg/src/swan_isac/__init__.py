"""Segmented-waveguide pinching-antenna ISAC modelling.

Channel and SNR evaluation for the segment selection (SS), aggregation (SA)
and multiplexing (SM) protocols, closed-form sensing gains with numerical
cross-checks, PA placement and beamforming, single-user rate/sensing fronts
and multi-user TDMA scheduling.
"""

__version__ = "0.1.0"

from .core_model import (  # noqa: E402
    DegenerateGeometryError,
    InvalidSolutionError,
    Position3D,
    Protocol,
    ProtocolSolution,
    ScenarioConfig,
    SnrReport,
    SwanLayout,
    cascaded_channels,
    dbm_to_watt,
    free_space_coeff,
    in_waveguide_coeff,
    snr_and_rate,
    watt_to_dbm,
)
from .sensing_limits import (  # noqa: E402
    GainReport,
    gain_ss_closed,
    gain_ss_oracle,
    optimal_segment_count_sa,
    sa_gain_centered,
    sm_gain_centered,
)
from .placement import (  # noqa: E402
    RefinementStep,
    SearchConfig,
    aggregate_gain,
    coarse_placement,
    elementwise_search,
    refine_rx_chain,
    rx_chain_placement,
)
from .beamforming import (  # noqa: E402
    InfeasibleSensingError,
    SubspaceBeamformer,
    epsilon_beamformer,
    mrc_combiner,
    mrt_beamformer,
    subspace_beamformer,
)
from .pareto import (  # noqa: E402
    ParetoPoint,
    pareto_fronts,
    pareto_sweep,
    solve_sa_single,
    solve_sm_single,
    solve_ss_single,
)
from .multiuser import (  # noqa: E402
    InfeasibleQoSError,
    TdmaProblem,
    TdmaSolution,
    solve_sa_multi,
    solve_sm_multi,
    solve_ss_multi,
    water_fill,
)
from .experiments import default_scenario  # noqa: E402
