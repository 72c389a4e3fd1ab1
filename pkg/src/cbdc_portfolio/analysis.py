"""Comparative statics: parameter sweeps, share accounting, and elasticities.

Three sweeps drive the reporting layer: second-period income under
certainty, the worst-case income under a mean-preserving two-point
spread, and the CBDC return.  Each grid point is solved warm-started
from its neighbor (or cold in parallel; the two modes agree within
solver tolerance because the optimum is unique) and recorded with its
portfolio shares, so downstream consumers never re-derive allocations.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibration import p_eps_for_mean
from .errors import EstimationError, ModelError, ParameterError
from .model import (
    AgentKind,
    Allocation,
    Economy,
    IncomeProcess,
    ModelInstance,
    Preferences,
)
from .solver import Solution, SolverConfig, solve, solve_path

#: Default income grid under certainty; the range over which the share
#: bands quoted in the reporting hold.
DEFAULT_DETERMINISTIC_S_GRID = tuple(np.linspace(0.0, 1.25, 50))

#: Default worst-case income grid for the mean-preserving spread, from
#: mild to severe so warm starts track the continuation.
DEFAULT_STOCHASTIC_SMIN_GRID = tuple(np.linspace(0.9, -0.9, 50))

#: Default CBDC return grid.
DEFAULT_CBDC_RETURN_GRID = (1.00, 1.10, 1.15, 1.20)

DEFAULT_STOCHASTIC_S_MAX = 1.25
DEFAULT_TARGET_MEAN = 1.0


@dataclass(frozen=True)
class SweepRecord:
    """One solved grid point of a comparative-statics sweep.

    ``liquid_cbdc_share`` is m/(d+m) and ``portfolio_cbdc_share`` is
    m/(a+d+m).  A point whose solve failed carries the error message and
    holds no allocation or shares.
    """

    sweep_parameter: float
    agent: AgentKind
    economy: Economy
    alloc: Allocation | None
    liquid_cbdc_share: float | None
    portfolio_cbdc_share: float | None
    p_eps_used: float
    converged: bool
    error: str | None = None


@dataclass(frozen=True)
class ElasticityEstimate:
    """Response of per-endowment CBDC and deposit holdings to the CBDC return."""

    at_parameter: float
    elasticity_cbdc_share: float
    elasticity_deposit_share: float


def liquidity_limit_ratio(prefs: Preferences) -> tuple[float, float]:
    """Limiting CBDC/deposit ratio and CBDC share of liquid holdings.

    As the liquidity weight grows without bound the optimal holdings
    approach m/d = lam**(1/sigma); returns that ratio and the implied
    share m/(d+m).  Perfect substitutes (sigma = 0) have no interior
    limit, so they are rejected.
    """
    if prefs.sigma == 0.0:
        raise ParameterError(
            "liquidity limit is undefined for sigma = 0 (perfect substitutes)"
        )
    m_over_d = prefs.lam ** (1.0 / prefs.sigma)
    return m_over_d, m_over_d / (1.0 + m_over_d)


def _record(
    parameter: float,
    agent: AgentKind,
    economy: Economy,
    outcome: Solution | ModelError,
    p_eps: float,
) -> SweepRecord:
    if isinstance(outcome, ModelError):
        return SweepRecord(
            sweep_parameter=parameter,
            agent=agent,
            economy=economy,
            alloc=None,
            liquid_cbdc_share=None,
            portfolio_cbdc_share=None,
            p_eps_used=p_eps,
            converged=False,
            error=str(outcome),
        )
    alloc = outcome.alloc
    liquid = alloc.deposits + alloc.cbdc
    total = alloc.risky + liquid
    return SweepRecord(
        sweep_parameter=parameter,
        agent=agent,
        economy=economy,
        alloc=alloc,
        liquid_cbdc_share=alloc.cbdc / liquid if liquid > 0.0 else None,
        portfolio_cbdc_share=alloc.cbdc / total if total > 0.0 else None,
        p_eps_used=p_eps,
        converged=outcome.converged,
    )


def _cold_solve(args) -> Solution | ModelError:
    instance, agent, config = args
    try:
        return solve(instance, agent, config)
    except ModelError as exc:
        return exc


def _solve_grid(
    instances: list[ModelInstance],
    agent: AgentKind,
    config: SolverConfig | None,
    jobs: int,
) -> list[Solution | ModelError]:
    if jobs <= 1:
        return solve_path(instances, agent, config, collect_errors=True)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_cold_solve, [(inst, agent, config) for inst in instances]))


_PAIRINGS = (
    (AgentKind.HFL, Economy.PRE_CBDC),
    (AgentKind.HFL, Economy.WITH_CBDC),
    (AgentKind.LFL, Economy.PRE_CBDC),
    (AgentKind.LFL, Economy.WITH_CBDC),
)


def sweep_deterministic(
    base: ModelInstance,
    s_values: list[float] | None = None,
    config: SolverConfig | None = None,
    jobs: int = 1,
) -> list[SweepRecord]:
    """Solve all four (agent, economy) problems across certain incomes.

    Each grid value s pins both income points to s; records are grouped
    by (agent, economy) in a fixed order, each group ordered as the
    input grid.
    """
    s_values = list(DEFAULT_DETERMINISTIC_S_GRID if s_values is None else s_values)
    records = []
    for agent, economy in _PAIRINGS:
        instances = [
            dataclasses.replace(
                base, economy=economy, income=IncomeProcess(s, s, 1.0)
            )
            for s in s_values
        ]
        outcomes = _solve_grid(instances, agent, config, jobs)
        records.extend(
            _record(s, agent, economy, out, 1.0)
            for s, out in zip(s_values, outcomes)
        )
    return records


def sweep_stochastic(
    base: ModelInstance,
    s_min_values: list[float] | None = None,
    s_max: float = DEFAULT_STOCHASTIC_S_MAX,
    target_mean: float = DEFAULT_TARGET_MEAN,
    config: SolverConfig | None = None,
    jobs: int = 1,
) -> list[SweepRecord]:
    """Sweep the worst-case income under a mean-preserving spread.

    For each s_min the probability of the good outcome is reset so the
    income mean stays at ``target_mean``; all four (agent, economy)
    problems are solved per point.
    """
    s_min_values = list(
        DEFAULT_STOCHASTIC_SMIN_GRID if s_min_values is None else s_min_values
    )
    probs = [p_eps_for_mean(target_mean, s_max, s_min) for s_min in s_min_values]
    records = []
    for agent, economy in _PAIRINGS:
        instances = [
            dataclasses.replace(
                base, economy=economy, income=IncomeProcess(s_max, s_min, p)
            )
            for s_min, p in zip(s_min_values, probs)
        ]
        outcomes = _solve_grid(instances, agent, config, jobs)
        records.extend(
            _record(s_min, agent, economy, out, p)
            for s_min, p, out in zip(s_min_values, probs, outcomes)
        )
    return records


def sweep_cbdc_return(
    base: ModelInstance,
    r_m_values: list[float] | None = None,
    scenario: float | IncomeProcess = 1.0,
    config: SolverConfig | None = None,
    jobs: int = 1,
) -> list[SweepRecord]:
    """Solve both agents' with-CBDC problems across CBDC returns.

    ``scenario`` fixes the income process: a bare float is a certain
    income at that value.  CBDC returns above the deposit return violate
    the return ordering and are rejected up front.
    """
    r_m_values = list(DEFAULT_CBDC_RETURN_GRID if r_m_values is None else r_m_values)
    income = (
        IncomeProcess(scenario, scenario, 1.0)
        if isinstance(scenario, (int, float))
        else scenario
    )
    too_high = [r for r in r_m_values if r > base.returns.r_deposit]
    if too_high:
        raise ParameterError(
            f"CBDC return(s) {too_high} exceed the deposit return "
            f"{base.returns.r_deposit:.6g}"
        )
    records = []
    for agent in (AgentKind.HFL, AgentKind.LFL):
        instances = [
            dataclasses.replace(
                base,
                economy=Economy.WITH_CBDC,
                income=income,
                returns=dataclasses.replace(base.returns, r_cbdc=r_m),
            )
            for r_m in r_m_values
        ]
        outcomes = _solve_grid(instances, agent, config, jobs)
        records.extend(
            _record(r_m, agent, Economy.WITH_CBDC, out, income.p_eps)
            for r_m, out in zip(r_m_values, outcomes)
        )
    return records


def share_elasticity(
    records: list[SweepRecord],
    lower_r_m: float,
    upper_r_m: float,
) -> ElasticityEstimate:
    """Slope of per-endowment CBDC and deposit holdings on the CBDC return.

    Fits a least-squares line through every converged record of the
    window [lower_r_m, upper_r_m] (endpoints required), one agent at a
    time; holdings are measured relative to a unit endowment.  The CBDC
    holding is convex in its return, so the interior grid points matter:
    an endpoint-only difference quotient overstates the response.
    """
    agents = {r.agent for r in records}
    if len(agents) != 1:
        raise ParameterError(
            f"elasticity needs records for exactly one agent, got {sorted(a.name for a in agents)}"
        )
    window = [
        r
        for r in records
        if lower_r_m <= r.sweep_parameter <= upper_r_m and r.alloc is not None
    ]
    params = {r.sweep_parameter for r in window}
    if not any(np.isclose(p, lower_r_m) for p in params) or not any(
        np.isclose(p, upper_r_m) for p in params
    ):
        raise ParameterError(
            f"window endpoints [{lower_r_m}, {upper_r_m}] not both present in records"
        )
    r_m = np.array([r.sweep_parameter for r in window])
    cbdc = np.array([r.alloc.cbdc for r in window])
    deposits = np.array([r.alloc.deposits for r in window])
    if np.mean(cbdc) == 0.0 or np.mean(deposits) == 0.0:
        raise EstimationError("elasticity undefined: zero mean holding in window")
    slope_cbdc, slope_dep = np.polyfit(r_m, cbdc, 1)[0], np.polyfit(r_m, deposits, 1)[0]
    return ElasticityEstimate(
        at_parameter=0.5 * (lower_r_m + upper_r_m),
        elasticity_cbdc_share=float(slope_cbdc),
        elasticity_deposit_share=float(slope_dep),
    )


def substitution_violations(records: list[SweepRecord]) -> list[float]:
    """Grid points where the LFL deposit drop falls short of CBDC uptake.

    Pairs each LFL pre-CBDC record with its with-CBDC counterpart and
    lists the sweep parameters where (d_pre - d_post) < m_post, i.e.
    where substitution into CBDC is more than one-for-one.  Expected to
    be a minority of points, reported rather than asserted away.
    """
    pre = {
        r.sweep_parameter: r
        for r in records
        if r.agent is AgentKind.LFL and r.economy is Economy.PRE_CBDC and r.alloc
    }
    violations = []
    for r in records:
        if r.agent is not AgentKind.LFL or r.economy is not Economy.WITH_CBDC:
            continue
        mate = pre.get(r.sweep_parameter)
        if mate is None or r.alloc is None:
            continue
        if (mate.alloc.deposits - r.alloc.deposits) < r.alloc.cbdc:
            violations.append(r.sweep_parameter)
    return violations
