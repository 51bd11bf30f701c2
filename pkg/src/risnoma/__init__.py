"""Joint transmit-beamforming and RIS phase-shift optimization for downlink
NOMA power minimization, with SDR and random-phase baselines, four user
ordering schemes, and a reproducible Monte Carlo sweep harness."""

from .channel import (
    BeamformerSet,
    ChannelSet,
    FeasibilityReport,
    ScenarioConfig,
    check_feasible,
    combined_channel,
    dbm_from_mw,
    effective_channels,
    generate_channels,
    mw_from_dbm,
    path_loss,
    sic_power_ordering,
    sinr,
)
from .beamforming import (
    BeamformingResult,
    BeamformingStatus,
    LiftedBeamformers,
    build_beamformer_subproblem,
    solve_beamformers_dc,
    solve_beamformers_sdr,
    spectral_subgradient,
)
from .conic import (
    ConicProblem,
    ConicSolution,
    ConicStatus,
    SolveOptions,
    TraceConstraint,
    dump_problem,
    feasibility_probe,
    solve,
)
from .dc import DcTrace
from .numerics import (
    EigenDecomposition,
    RankToleranceExceeded,
    extract_rank_one,
    hermitian_eig,
    nuclear_minus_spectral,
    real_embed,
)
from .ordering import (
    OrderingResult,
    combined_gain_matrix,
    order_direct_link,
    order_eigen,
    order_exhaustive,
    order_sdr,
)
from .orchestrator import (
    RunResult,
    TerminationReason,
    Variant,
    alternate,
    run_trial,
)
from .phase import (
    LiftedPhase,
    PhaseProblemData,
    PhaseResult,
    PhaseStatus,
    build_phase_data,
    build_phase_subproblem,
    quantize_phases,
    random_phase,
    solve_phase_dc,
    solve_phase_sdr,
)
from .experiments import Scheme, SweepSpec, parse_config, run_sweep

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
