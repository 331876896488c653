"""Scripted handover simulator: receivers, release rules, episodes and suites."""
from .episode import (
    EpisodeConfig,
    EpisodeResult,
    Label,
    ObjectSpec,
    Rates,
    SimParams,
    SimulationDiverged,
    run_episode,
)
from .policies import (
    ReleasePolicy,
    contact_detected,
    release_decision_force_thr,
    release_decision_weight_thr,
)
from .receivers import (
    FirmGrasp,
    IncidentalTouch,
    LateHesitantGrasp,
    NoContact,
    ScriptedReceiver,
    UpwardPull,
    receiver_force,
)
from .suite import (
    DEFAULT_WEIGHTS,
    PolicyMetrics,
    SuiteResult,
    build_matrix,
    default_receivers,
    policy_metrics,
    run_suite,
    success_rate,
)
