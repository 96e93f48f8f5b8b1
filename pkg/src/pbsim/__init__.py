"""Simulator and numerical analysis suite for the block-builder market.

Stochastic order-flow share dynamics, MEV-Boost style auction rounds,
asymmetric first-price auction equilibria, robust-fairness verdicts, and
a deterministic Monte Carlo ensemble runner.
"""

__version__ = "0.1.0"

from .analytic import SandwichReport, SATrace, sa_iterate, sandwich_check
from .auction import (
    BidStrategy,
    empirical_win_prob,
    place_bids,
    sample_valuations,
    select_winner,
)
from .config import (
    BuilderProfile,
    ConfigError,
    FlowModel,
    MarketState,
    RoundOutcome,
    ScenarioConfig,
    initial_state,
    validate,
)
from .dynamics import (
    DriftClassification,
    SABounds,
    SABoundsReport,
    analytic_win_prob,
    classify_fixed_points,
    drift,
    sa_bounds_report,
    step_shares,
)
from .equilibrium import (
    BidEquilibrium,
    NoCompetitionError,
    SolverError,
    ValueDistribution,
    VerificationReport,
    equilibrium_win_prob,
    expected_revenue,
    lower_bound_bid,
    power_pair,
    solve_equilibrium,
    verify_equilibrium,
)
from .fairness import (
    FairnessReport,
    FairnessSpec,
    hhi,
    nearest_rank_percentile,
    percentile_bands,
    profit_margin,
    robust_fairness,
)
from .runner import (
    EnsembleResult,
    Trajectory,
    absorption_round,
    build_scenario,
    repetition_seed,
    run_ensemble,
    run_repetition,
    write_ensemble_json,
    write_trajectories_csv,
)

__all__ = [
    "BidEquilibrium",
    "BidStrategy",
    "BuilderProfile",
    "ConfigError",
    "DriftClassification",
    "EnsembleResult",
    "FairnessReport",
    "FairnessSpec",
    "FlowModel",
    "MarketState",
    "NoCompetitionError",
    "RoundOutcome",
    "SABounds",
    "SABoundsReport",
    "SATrace",
    "SandwichReport",
    "ScenarioConfig",
    "SolverError",
    "Trajectory",
    "ValueDistribution",
    "VerificationReport",
    "absorption_round",
    "analytic_win_prob",
    "build_scenario",
    "classify_fixed_points",
    "drift",
    "empirical_win_prob",
    "equilibrium_win_prob",
    "expected_revenue",
    "hhi",
    "initial_state",
    "lower_bound_bid",
    "nearest_rank_percentile",
    "percentile_bands",
    "place_bids",
    "power_pair",
    "profit_margin",
    "repetition_seed",
    "robust_fairness",
    "run_ensemble",
    "run_repetition",
    "sa_bounds_report",
    "sa_iterate",
    "sample_valuations",
    "sandwich_check",
    "select_winner",
    "solve_equilibrium",
    "step_shares",
    "validate",
    "verify_equilibrium",
    "write_ensemble_json",
    "write_trajectories_csv",
]
