"""Two-period CBDC portfolio model: solver, calibration, sweeps and inference."""

from .analysis import (
    DEFAULT_CBDC_RETURN_GRID,
    DEFAULT_DETERMINISTIC_S_GRID,
    DEFAULT_STOCHASTIC_SMIN_GRID,
    ElasticityEstimate,
    SweepRecord,
    liquidity_limit_ratio,
    share_elasticity,
    substitution_violations,
    sweep_cbdc_return,
    sweep_deterministic,
    sweep_stochastic,
)
from .calibration import (
    DEFAULT_ANNUAL_MARKET,
    DEFAULT_GAMMA,
    AnnualMarket,
    BinomialRow,
    annualize_rate,
    bin_returns,
    binomial_outcomes,
    calibrate_gamma,
    compound_rate,
    default_instance,
    default_preferences,
    default_returns,
    equity_premium,
    income_variance,
    p_eps_for_mean,
)
from .errors import (
    BracketError,
    ConvergenceError,
    EstimationError,
    FeasibilityError,
    InfeasibleModelError,
    ModelError,
    ParameterError,
    RankDeficiencyError,
    SchemaError,
    SeparationError,
)
from .inference import (
    DEFAULT_SYNTH_TRUTH,
    FitResult,
    PanelData,
    Specification,
    SpecKind,
    build_design,
    fit,
    fit_logit,
    inverse_link,
    log_quasi_likelihood,
    logit_link,
    odds_change,
    read_panel_csv,
    synth_panel,
    wald_one_sided,
)
from .model import (
    AgentKind,
    Allocation,
    Economy,
    IncomeProcess,
    ModelInstance,
    Preferences,
    ReturnStructure,
    active_assets,
    expected_utility,
    foc_residuals,
    liquidity_services,
    make_allocation,
    worst_case_wealth,
)
from .solver import Solution, SolverConfig, grid_oracle, solve, solve_path

__all__ = [
    "DEFAULT_ANNUAL_MARKET",
    "DEFAULT_CBDC_RETURN_GRID",
    "DEFAULT_DETERMINISTIC_S_GRID",
    "DEFAULT_GAMMA",
    "DEFAULT_STOCHASTIC_SMIN_GRID",
    "DEFAULT_SYNTH_TRUTH",
    "AgentKind",
    "Allocation",
    "AnnualMarket",
    "BinomialRow",
    "BracketError",
    "ConvergenceError",
    "Economy",
    "ElasticityEstimate",
    "EstimationError",
    "FeasibilityError",
    "FitResult",
    "IncomeProcess",
    "InfeasibleModelError",
    "ModelError",
    "ModelInstance",
    "PanelData",
    "ParameterError",
    "Preferences",
    "RankDeficiencyError",
    "ReturnStructure",
    "SchemaError",
    "SeparationError",
    "Solution",
    "SolverConfig",
    "SpecKind",
    "Specification",
    "SweepRecord",
    "active_assets",
    "annualize_rate",
    "bin_returns",
    "binomial_outcomes",
    "build_design",
    "calibrate_gamma",
    "compound_rate",
    "default_instance",
    "default_preferences",
    "default_returns",
    "equity_premium",
    "expected_utility",
    "fit",
    "fit_logit",
    "foc_residuals",
    "grid_oracle",
    "income_variance",
    "inverse_link",
    "liquidity_limit_ratio",
    "liquidity_services",
    "log_quasi_likelihood",
    "logit_link",
    "make_allocation",
    "odds_change",
    "p_eps_for_mean",
    "read_panel_csv",
    "share_elasticity",
    "solve",
    "solve_path",
    "substitution_violations",
    "sweep_cbdc_return",
    "sweep_deterministic",
    "sweep_stochastic",
    "synth_panel",
    "wald_one_sided",
    "worst_case_wealth",
]
