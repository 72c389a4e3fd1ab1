"""Calibration of period returns and preferences from annual market data.

The period risky return compounds independent annual high/low draws, so
its distribution over a T-year period is binomial in the number of bad
years.  The full lattice is collapsed into a two-point high/low return
for the portfolio model, and the liquidity weight is backed out from a
deposit-to-consumption target by a bracketing root find on the solved
model.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import BracketError, ParameterError
from .model import (
    AgentKind,
    Economy,
    IncomeProcess,
    ModelInstance,
    Preferences,
    ReturnStructure,
)
from .solver import SolverConfig, solve


@dataclass(frozen=True)
class AnnualMarket:
    """Annual two-point risky return, risk-free rate, and period length."""

    r_risky_high_annual: float
    r_risky_low_annual: float
    p_high_annual: float
    r_deposit_annual: float
    period_years: int

    def __post_init__(self):
        if not (
            self.r_risky_low_annual
            < 1.0
            < self.r_deposit_annual
            < self.r_risky_high_annual
        ):
            raise ParameterError(
                "annual returns must satisfy r_risky_low < 1 < r_deposit < r_risky_high, "
                f"got {self.r_risky_low_annual}, {self.r_deposit_annual}, "
                f"{self.r_risky_high_annual}"
            )
        # p = 1 is allowed: the no-crisis limit degenerates to a
        # single-outcome lattice.
        if not 0.0 < self.p_high_annual <= 1.0:
            raise ParameterError(
                f"p_high_annual must lie in (0, 1], got {self.p_high_annual}"
            )
        if self.period_years < 1:
            raise ParameterError(
                f"period_years must be a positive integer, got {self.period_years}"
            )


@dataclass(frozen=True)
class BinomialRow:
    """One compounded-return outcome: n bad years out of the period."""

    n_crisis_years: int
    probability: float
    compounded_return: float


#: Annual market inputs behind the default period calibration.
DEFAULT_ANNUAL_MARKET = AnnualMarket(
    r_risky_high_annual=1.09,
    r_risky_low_annual=0.6,
    p_high_annual=0.95,
    r_deposit_annual=1.01,
    period_years=20,
)

#: Default liquidity-weight target and period preference/return constants.
DEFAULT_GAMMA = 0.05

def default_preferences(gamma: float = DEFAULT_GAMMA) -> Preferences:
    return Preferences(beta=0.82, gamma=gamma, lam=1.0, sigma=1.0 / 3.0)


def default_returns() -> ReturnStructure:
    # The deposit return is the reciprocal of the discount factor, kept at
    # full precision so that the r_cbdc -> r_deposit limit is exact.
    return ReturnStructure(
        r_deposit=1.0 / 0.82,
        r_cbdc=1.10,
        r_risky_high=3.77,
        r_risky_low=0.83,
        p_high=0.92,
    )


def default_instance(
    economy: Economy = Economy.WITH_CBDC,
    income: IncomeProcess | None = None,
    gamma: float = DEFAULT_GAMMA,
    endowment: float = 1.0,
) -> ModelInstance:
    """The default calibrated model, deterministic unit income unless given."""
    return ModelInstance(
        endowment=endowment,
        prefs=default_preferences(gamma),
        returns=default_returns(),
        income=income or IncomeProcess(s_max=1.0, s_min=1.0, p_eps=1.0),
        economy=economy,
    )


def binomial_outcomes(market: AnnualMarket) -> list[BinomialRow]:
    """All compounded period returns with their binomial probabilities.

    Row n compounds ``period_years - n`` high years with n low years.
    """
    t = market.period_years
    f = market.p_high_annual
    rows = []
    for n in range(t + 1):
        rows.append(
            BinomialRow(
                n_crisis_years=n,
                probability=math.comb(t, n) * f ** (t - n) * (1.0 - f) ** n,
                compounded_return=market.r_risky_high_annual ** (t - n)
                * market.r_risky_low_annual**n,
            )
        )
    return rows


def bin_returns(
    rows: list[BinomialRow],
    split_after_n: int,
    truncate_at_n: int | None = None,
) -> tuple[float, float, float]:
    """Collapse the binomial lattice into a two-point (high, low) return.

    Outcomes with at most ``split_after_n`` bad years form the high bin,
    the rest the low bin.  ``truncate_at_n`` drops outcomes beyond it from
    the low bin's numerator only: the low bin keeps the full complementary
    probability mass 1 - p_a, so truncation merely ignores negligible
    deep-tail returns rather than re-weighting the bin.

    Returns ``(p_a, r_high, r_low)``.
    """
    top = max(row.n_crisis_years for row in rows)
    if truncate_at_n is None:
        truncate_at_n = top
    if not split_after_n < truncate_at_n <= top:
        raise ParameterError(
            f"need split_after_n < truncate_at_n <= {top}, "
            f"got split_after_n={split_after_n}, truncate_at_n={truncate_at_n}"
        )

    high = [r for r in rows if r.n_crisis_years <= split_after_n]
    low = [r for r in rows if split_after_n < r.n_crisis_years <= truncate_at_n]
    if not high or not low:
        raise ParameterError(
            f"empty bin: split_after_n={split_after_n} leaves "
            f"{len(high)} high and {len(low)} low outcomes"
        )

    p_a = sum(r.probability for r in high)
    if not p_a < 1.0:
        raise ParameterError(
            "low bin has zero probability mass; the lattice is degenerate"
        )
    r_high = sum(r.probability * r.compounded_return for r in high) / p_a
    r_low = sum(r.probability * r.compounded_return for r in low) / (1.0 - p_a)
    return p_a, r_high, r_low


def equity_premium(market: AnnualMarket) -> float:
    """Expected annual risky return in excess of the deposit rate."""
    f = market.p_high_annual
    expected = f * market.r_risky_high_annual + (1.0 - f) * market.r_risky_low_annual
    return expected - market.r_deposit_annual


def compound_rate(annual: float, years: int) -> float:
    """Gross return over ``years`` at a constant gross annual rate."""
    if not annual > 0.0:
        raise ParameterError(f"annual rate must be > 0, got {annual}")
    return annual**years


def annualize_rate(period: float, years: int) -> float:
    """Constant gross annual rate compounding to ``period`` over ``years``."""
    if not period > 0.0:
        raise ParameterError(f"period rate must be > 0, got {period}")
    return period ** (1.0 / years)


def p_eps_for_mean(target_mean: float, s_max: float, s_min: float) -> float:
    """Probability of the high income point that fixes the mean.

    Solves p * s_max + (1 - p) * s_min = target_mean, the mean-preserving
    adjustment used when widening the income spread.
    """
    if not s_min < s_max:
        raise ParameterError(f"need s_min < s_max, got {s_min} >= {s_max}")
    if not s_min <= target_mean <= s_max:
        raise ParameterError(
            f"target mean {target_mean} outside [{s_min}, {s_max}]"
        )
    return (target_mean - s_min) / (s_max - s_min)


def income_variance(income: IncomeProcess) -> float:
    """Variance of the two-point second-period income."""
    mean = income.mean
    return (
        income.p_eps * income.s_max**2
        + (1.0 - income.p_eps) * income.s_min**2
        - mean**2
    )


_GAMMA_BRACKET = (1e-6, 1e3)


def calibrate_gamma(
    target_deposit_to_consumption: float,
    template: ModelInstance,
    agent: AgentKind,
    config: SolverConfig | None = None,
) -> float:
    """Liquidity weight that makes solved d*/c1* hit the target ratio.

    The ratio is strictly increasing in the liquidity weight, so a
    bracketing root find over gamma in [1e-6, 1e3] (on a log scale)
    pins it down; targets outside the bracket's achievable range raise
    BracketError carrying that range.
    """
    if not target_deposit_to_consumption > 0.0:
        raise ParameterError(
            f"target ratio must be > 0, got {target_deposit_to_consumption}"
        )

    def ratio(gamma: float) -> float:
        instance = dataclasses.replace(
            template, prefs=dataclasses.replace(template.prefs, gamma=gamma)
        )
        solution = solve(instance, agent, config)
        return solution.alloc.deposits / solution.alloc.consumption1

    lo, hi = _GAMMA_BRACKET
    r_lo, r_hi = ratio(lo), ratio(hi)
    if not r_lo <= target_deposit_to_consumption <= r_hi:
        raise BracketError(
            f"target d*/c1* = {target_deposit_to_consumption:.6g} outside the "
            f"achievable range [{r_lo:.6g}, {r_hi:.6g}] for gamma in "
            f"[{lo:.0e}, {hi:.0e}]",
            achievable=(r_lo, r_hi),
        )

    log_gamma = brentq(
        lambda lg: ratio(math.exp(lg)) - target_deposit_to_consumption,
        math.log(lo),
        math.log(hi),
        xtol=1e-13,
    )
    return math.exp(log_gamma)
