"""Two-period, two-agent portfolio model with deposits, CBDC and a risky asset.

A household receives an endowment ``y`` in the first period, splits it
between consumption and asset holdings, and in the second period consumes
the gross portfolio return plus an income draw.  Preferences are
logarithmic in both consumptions and in liquidity services produced from
deposit and CBDC balances:

    U = ln(c1) + beta * E[ln(c2)] + gamma * ln(z)

Household kinds differ only in market access: ``HFL`` (high financial
literacy) households may hold the risky asset, ``LFL`` households may not.
Economies differ in whether CBDC exists: before introduction the liquidity
aggregate ``z`` is the deposit balance itself, after introduction it is a
CES aggregate of deposits and CBDC.

Uncertainty is a two-point risky return (HFL only) and a two-point income
draw, treated by exact enumeration of the joint outcomes; nothing in this
module samples.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FeasibilityError, ParameterError

# Interior floor used when checking feasibility of holdings that a solver
# must keep strictly positive.
HOLDING_FLOOR = 1e-12


class AgentKind(enum.Enum):
    """Household kind, distinguished by access to the risky asset."""

    HFL = "HFL"
    LFL = "LFL"


class Economy(enum.Enum):
    """Whether CBDC is available as a second liquid asset."""

    PRE_CBDC = "pre_cbdc"
    WITH_CBDC = "with_cbdc"


@dataclass(frozen=True)
class Preferences:
    """Utility parameters.

    beta   -- discount factor on second-period consumption, in (0, 1)
    gamma  -- weight on liquidity services, >= 0
    lam    -- weight on CBDC inside the liquidity aggregate, >= 0
    sigma  -- inverse elasticity of substitution between deposits and
              CBDC, >= 0; sigma = 1 is outside the parameterization and
              is rejected rather than special-cased
    """

    beta: float
    gamma: float
    lam: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.gamma < 0.0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if self.lam < 0.0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.sigma < 0.0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if self.sigma == 1.0:
            raise ParameterError(
                "sigma = 1 (log aggregator) is not part of the model parameterization"
            )


@dataclass(frozen=True)
class ReturnStructure:
    """Gross returns over one model period.

    The risky asset pays ``r_risky_high`` with probability ``p_high`` and
    ``r_risky_low`` otherwise.  Deposits and CBDC are riskless.
    """

    r_deposit: float
    r_cbdc: float
    r_risky_high: float
    r_risky_low: float
    p_high: float

    def __post_init__(self):
        if not 0.0 <= self.p_high <= 1.0:
            raise ParameterError(f"p_high must lie in [0, 1], got {self.p_high}")
        if not self.r_risky_low < 1.0 < self.r_deposit:
            raise ParameterError(
                "returns must satisfy r_risky_low < 1 < r_deposit, got "
                f"r_risky_low={self.r_risky_low}, r_deposit={self.r_deposit}"
            )
        if not self.r_deposit >= self.r_cbdc >= 1.0:
            raise ParameterError(
                "returns must satisfy r_deposit >= r_cbdc >= 1, got "
                f"r_deposit={self.r_deposit}, r_cbdc={self.r_cbdc}"
            )
        if self.expected_risky <= self.r_deposit:
            raise ParameterError(
                "expected risky return must exceed the deposit return, got "
                f"{self.expected_risky} <= {self.r_deposit}"
            )

    @property
    def expected_risky(self) -> float:
        return self.p_high * self.r_risky_high + (1.0 - self.p_high) * self.r_risky_low


@dataclass(frozen=True)
class IncomeProcess:
    """Two-point second-period income: s_max w.p. p_eps, s_min otherwise.

    A deterministic income s is represented as s_max = s_min = s.
    """

    s_max: float
    s_min: float
    p_eps: float

    def __post_init__(self):
        if self.s_min > self.s_max:
            raise ParameterError(
                f"income support needs s_min <= s_max, got [{self.s_min}, {self.s_max}]"
            )
        if not 0.0 <= self.p_eps <= 1.0:
            raise ParameterError(f"p_eps must lie in [0, 1], got {self.p_eps}")

    @property
    def mean(self) -> float:
        return self.p_eps * self.s_max + (1.0 - self.p_eps) * self.s_min


@dataclass(frozen=True)
class ModelInstance:
    """A fully parameterized economy: endowment, preferences, returns, income."""

    endowment: float
    prefs: Preferences
    returns: ReturnStructure
    income: IncomeProcess
    economy: Economy

    def __post_init__(self):
        if not self.endowment > 0.0:
            raise ParameterError(f"endowment must be > 0, got {self.endowment}")


@dataclass(frozen=True)
class Allocation:
    """First-period portfolio and the consumption it leaves over.

    ``consumption1`` is derived: endowment minus the sum of holdings.
    Build allocations through :func:`make_allocation` so the budget
    identity holds by construction.
    """

    risky: float
    deposits: float
    cbdc: float
    consumption1: float

    def __post_init__(self):
        if not np.isfinite([self.risky, self.deposits, self.cbdc, self.consumption1]).all():
            raise ParameterError("allocation entries must be finite")
        if self.risky < 0.0:
            raise ParameterError(f"risky holding must be >= 0, got {self.risky}")
        if not self.deposits > 0.0:
            raise ParameterError(f"deposit holding must be > 0, got {self.deposits}")
        if self.cbdc < 0.0:
            raise ParameterError(f"CBDC holding must be >= 0, got {self.cbdc}")
        if not self.consumption1 > 0.0:
            raise ParameterError(
                f"first-period consumption must be > 0, got {self.consumption1}"
            )


def make_allocation(
    instance: ModelInstance,
    agent: AgentKind,
    risky: float = 0.0,
    deposits: float = 0.0,
    cbdc: float = 0.0,
) -> Allocation:
    """Build an allocation with consumption1 = endowment - holdings.

    Enforces the access rules: LFL households cannot hold the risky asset
    and nobody holds CBDC before it exists.
    """
    if agent is AgentKind.LFL and risky != 0.0:
        raise ParameterError("LFL households cannot hold the risky asset")
    if instance.economy is Economy.PRE_CBDC and cbdc != 0.0:
        raise ParameterError("CBDC holdings require the with-CBDC economy")
    c1 = instance.endowment - risky - deposits - cbdc
    return Allocation(risky=risky, deposits=deposits, cbdc=cbdc, consumption1=c1)


def active_assets(agent: AgentKind, economy: Economy) -> tuple[str, ...]:
    """Names of the assets the household actually chooses, in solver order."""
    assets = ("deposits",) if agent is AgentKind.LFL else ("risky", "deposits")
    if economy is Economy.WITH_CBDC:
        assets = assets + ("cbdc",)
    return assets


def allocation_vector(alloc: Allocation, assets: tuple[str, ...]) -> np.ndarray:
    """Extract the active holdings as a vector ordered like ``assets``."""
    return np.array([getattr(alloc, name) for name in assets], dtype=float)


def vector_allocation(
    instance: ModelInstance, agent: AgentKind, assets: tuple[str, ...], x: np.ndarray
) -> Allocation:
    """Rebuild an allocation from active holdings, zeros elsewhere."""
    values = dict(zip(assets, (float(v) for v in x)))
    return make_allocation(instance, agent, **values)


def liquidity_services(
    d: float, m: float, prefs: Preferences, economy: Economy
) -> float:
    """Liquidity aggregate z.

    Deposits alone before CBDC; afterwards the CES composite
    ``[d**(1-sigma) + lam * m**(1-sigma)]**(1/(1-sigma))``.  A zero CBDC
    weight or a zero balance collapses the composite to ``d``.
    """
    if not d > 0.0:
        raise FeasibilityError(f"liquidity services need deposits > 0, got {d}")
    if m < 0.0:
        raise FeasibilityError(f"CBDC balance must be >= 0, got {m}")
    if economy is Economy.PRE_CBDC:
        return d
    if prefs.lam == 0.0 or m == 0.0:
        return d
    e = 1.0 - prefs.sigma
    return (d**e + prefs.lam * m**e) ** (1.0 / e)


def worst_case_wealth(alloc: Allocation, instance: ModelInstance, agent: AgentKind) -> float:
    """Second-period wealth in the worst joint outcome.

    Low risky return and low income draw; positive worst-case wealth is
    what keeps log utility defined on every branch.
    """
    r = instance.returns
    base = r.r_deposit * alloc.deposits + r.r_cbdc * alloc.cbdc + instance.income.s_min
    if agent is AgentKind.HFL:
        return r.r_risky_low * alloc.risky + base
    return base


def _check_zero_forcing(instance: ModelInstance, agent: AgentKind, alloc: Allocation) -> None:
    if agent is AgentKind.LFL and alloc.risky != 0.0:
        raise ParameterError("LFL allocation must have a zero risky holding")
    if instance.economy is Economy.PRE_CBDC and alloc.cbdc != 0.0:
        raise ParameterError("pre-CBDC allocation must have a zero CBDC holding")


def _check_feasible(
    instance: ModelInstance, agent: AgentKind, alloc: Allocation, interior: bool = False
) -> None:
    """Raise FeasibilityError naming the violated constraint, if any."""
    _check_zero_forcing(instance, agent, alloc)
    if not alloc.consumption1 > 0.0:
        raise FeasibilityError(
            f"first-period consumption must be > 0, got {alloc.consumption1}"
        )
    wealth = worst_case_wealth(alloc, instance, agent)
    if not wealth > 0.0:
        raise FeasibilityError(f"worst-case second-period wealth must be > 0, got {wealth}")
    if interior:
        for name in active_assets(agent, instance.economy):
            if not getattr(alloc, name) > 0.0:
                raise FeasibilityError(f"{name} holding must be strictly positive")


def _branches(instance: ModelInstance, agent: AgentKind, assets: tuple[str, ...]):
    """Joint outcome enumeration: (weights, per-asset return matrix, income draws).

    Row k of the return matrix holds the gross return of each active asset
    in outcome k, so second-period wealth is ``returns @ x + eps``.
    """
    r, inc = instance.returns, instance.income
    income_states = [(inc.p_eps, inc.s_max), (1.0 - inc.p_eps, inc.s_min)]
    if agent is AgentKind.HFL:
        risky_states = [(r.p_high, r.r_risky_high), (1.0 - r.p_high, r.r_risky_low)]
    else:
        risky_states = [(1.0, 0.0)]

    safe = {"deposits": r.r_deposit, "cbdc": r.r_cbdc}
    weights, rows, eps = [], [], []
    for pa, ra in risky_states:
        for pe, s in income_states:
            weights.append(pa * pe)
            rows.append([ra if name == "risky" else safe[name] for name in assets])
            eps.append(s)
    return np.array(weights), np.array(rows), np.array(eps)


def _log_liquidity_derivs(d: float, m: float, prefs: Preferences, economy: Economy):
    """Value, gradient and Hessian of ln(z) w.r.t. (d, m).

    Before CBDC (or with a zero CBDC weight) only the deposit entries are
    non-zero.  Formulas follow from differentiating the CES aggregate.
    """
    if economy is Economy.PRE_CBDC or prefs.lam == 0.0:
        value = np.log(d)
        grad = {"deposits": 1.0 / d, "cbdc": 0.0}
        hess = {
            ("deposits", "deposits"): -1.0 / d**2,
            ("deposits", "cbdc"): 0.0,
            ("cbdc", "cbdc"): 0.0,
        }
        return value, grad, hess

    sig, lam = prefs.sigma, prefs.lam
    e = 1.0 - sig
    h = d**e + lam * m**e
    value = np.log(h) / e
    grad = {"deposits": d**-sig / h, "cbdc": lam * m**-sig / h}
    hess = {
        ("deposits", "deposits"): -sig * d ** (-sig - 1.0) / h - e * d ** (-2.0 * sig) / h**2,
        ("deposits", "cbdc"): -e * lam * d**-sig * m**-sig / h**2,
        ("cbdc", "cbdc"): -sig * lam * m ** (-sig - 1.0) / h
        - e * lam**2 * m ** (-2.0 * sig) / h**2,
    }
    return value, grad, hess


def expected_utility(instance: ModelInstance, agent: AgentKind, alloc: Allocation) -> float:
    """Exact expected utility of a strictly feasible allocation."""
    _check_feasible(instance, agent, alloc)
    prefs = instance.prefs
    assets = active_assets(agent, instance.economy)
    x = allocation_vector(alloc, assets)
    weights, returns, eps = _branches(instance, agent, assets)
    wealth = returns @ x + eps
    utility = np.log(alloc.consumption1) + prefs.beta * weights @ np.log(wealth)
    if prefs.gamma != 0.0:
        z = liquidity_services(alloc.deposits, alloc.cbdc, prefs, instance.economy)
        utility += prefs.gamma * np.log(z)
    return float(utility)


def utility_gradient(instance: ModelInstance, agent: AgentKind, alloc: Allocation) -> np.ndarray:
    """Gradient of expected utility w.r.t. the active holdings."""
    _check_feasible(instance, agent, alloc, interior=True)
    prefs = instance.prefs
    assets = active_assets(agent, instance.economy)
    x = allocation_vector(alloc, assets)
    weights, returns, eps = _branches(instance, agent, assets)
    wealth = returns @ x + eps

    grad = -1.0 / alloc.consumption1 + prefs.beta * (weights / wealth) @ returns
    if prefs.gamma != 0.0:
        _, liq_grad, _ = _log_liquidity_derivs(
            alloc.deposits, alloc.cbdc, prefs, instance.economy
        )
        grad += prefs.gamma * np.array([liq_grad.get(name, 0.0) for name in assets])
    return grad


def utility_hessian(instance: ModelInstance, agent: AgentKind, alloc: Allocation) -> np.ndarray:
    """Hessian of expected utility w.r.t. the active holdings."""
    _check_feasible(instance, agent, alloc, interior=True)
    prefs = instance.prefs
    assets = active_assets(agent, instance.economy)
    x = allocation_vector(alloc, assets)
    weights, returns, eps = _branches(instance, agent, assets)
    wealth = returns @ x + eps

    hess = (
        -1.0 / alloc.consumption1**2
        - prefs.beta * (returns * (weights / wealth**2)[:, None]).T @ returns
    )
    if prefs.gamma != 0.0:
        _, _, liq_hess = _log_liquidity_derivs(
            alloc.deposits, alloc.cbdc, prefs, instance.economy
        )
        for i, ni in enumerate(assets):
            for j, nj in enumerate(assets):
                key = (ni, nj) if (ni, nj) in liq_hess else (nj, ni)
                hess[i, j] += prefs.gamma * liq_hess.get(key, 0.0)
    return hess


def foc_residuals(instance: ModelInstance, agent: AgentKind, alloc: Allocation) -> np.ndarray:
    """Stacked first-order-condition residuals for the active holdings.

    Each residual equals the marginal benefit of the holding minus its
    first-period consumption cost, i.e. the utility gradient, and is zero
    at an interior optimum.  Order matches :func:`active_assets`.
    """
    return utility_gradient(instance, agent, alloc)
