"""Shared generators for randomized model tests."""

from __future__ import annotations

import numpy as np

from cbdc_portfolio import (
    AgentKind,
    Economy,
    IncomeProcess,
    ModelInstance,
    Preferences,
    ReturnStructure,
    active_assets,
    make_allocation,
)
from cbdc_portfolio.errors import ParameterError

ALL_PAIRINGS = (
    (AgentKind.HFL, Economy.PRE_CBDC),
    (AgentKind.HFL, Economy.WITH_CBDC),
    (AgentKind.LFL, Economy.PRE_CBDC),
    (AgentKind.LFL, Economy.WITH_CBDC),
)


def random_instance(
    rng: np.random.Generator,
    economy: Economy = Economy.WITH_CBDC,
    stochastic_income: bool = False,
) -> ModelInstance:
    """A random, feasible, well-posed model instance."""
    while True:
        try:
            returns = ReturnStructure(
                r_deposit=rng.uniform(1.05, 1.30),
                r_cbdc=1.0,
                r_risky_high=rng.uniform(2.5, 4.5),
                r_risky_low=rng.uniform(0.5, 0.95),
                p_high=rng.uniform(0.85, 0.97),
            )
        except ParameterError:
            continue
        returns = ReturnStructure(
            r_deposit=returns.r_deposit,
            r_cbdc=rng.uniform(1.0, returns.r_deposit),
            r_risky_high=returns.r_risky_high,
            r_risky_low=returns.r_risky_low,
            p_high=returns.p_high,
        )
        break
    prefs = Preferences(
        beta=rng.uniform(0.70, 0.95),
        gamma=rng.uniform(0.01, 0.50),
        lam=rng.uniform(0.2, 1.0),
        sigma=rng.uniform(0.2, 0.6),
    )
    if stochastic_income:
        s_max = rng.uniform(1.0, 1.3)
        s_min = rng.uniform(0.3, 0.9)
        income = IncomeProcess(s_max=s_max, s_min=s_min, p_eps=rng.uniform(0.2, 0.9))
    else:
        s = rng.uniform(0.5, 1.2)
        income = IncomeProcess(s_max=s, s_min=s, p_eps=1.0)
    return ModelInstance(
        endowment=1.0, prefs=prefs, returns=returns, income=income, economy=economy
    )


def random_interior_allocation(
    rng: np.random.Generator, instance: ModelInstance, agent: AgentKind
):
    """A strictly feasible interior allocation for the instance."""
    assets = active_assets(agent, instance.economy)
    r = instance.returns
    worst = {"risky": r.r_risky_low, "deposits": r.r_deposit, "cbdc": r.r_cbdc}
    for _ in range(1000):
        holdings = {name: rng.uniform(0.02, 0.25) for name in assets}
        c1 = instance.endowment - sum(holdings.values())
        wealth = sum(worst[k] * v for k, v in holdings.items()) + instance.income.s_min
        if c1 > 0.05 and wealth > 0.05:
            return make_allocation(instance, agent, **holdings)
    raise AssertionError("could not sample an interior allocation")
