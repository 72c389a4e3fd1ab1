"""Comparative statics: sweeps, shares, elasticities, substitution."""

import numpy as np
import pytest

from cbdc_portfolio import (
    AgentKind,
    Economy,
    IncomeProcess,
    default_instance,
    default_preferences,
    liquidity_limit_ratio,
    share_elasticity,
    substitution_violations,
    sweep_cbdc_return,
    sweep_deterministic,
    sweep_stochastic,
)
from cbdc_portfolio.analysis import DEFAULT_CBDC_RETURN_GRID
from cbdc_portfolio.errors import EstimationError, ParameterError
from cbdc_portfolio.model import Preferences


def by_pairing(records, agent, economy):
    return [r for r in records if r.agent is agent and r.economy is economy]


@pytest.fixture(scope="module")
def deterministic_records():
    return sweep_deterministic(default_instance())


@pytest.fixture(scope="module")
def stochastic_records():
    return sweep_stochastic(default_instance())


class TestLiquidityLimit:
    def test_symmetric_weights(self):
        ratio, share = liquidity_limit_ratio(default_preferences())
        assert ratio == pytest.approx(1.0)
        assert share == pytest.approx(0.5)

    def test_asymmetric_weights(self):
        prefs = Preferences(beta=0.82, gamma=0.05, lam=0.5, sigma=0.5)
        ratio, share = liquidity_limit_ratio(prefs)
        assert ratio == pytest.approx(0.25)
        assert share == pytest.approx(0.2)

    def test_perfect_substitutes_rejected(self):
        prefs = Preferences(beta=0.82, gamma=0.05, lam=1.0, sigma=0.0)
        with pytest.raises(ParameterError):
            liquidity_limit_ratio(prefs)


class TestDeterministicSweep:
    def test_every_point_converges(self, deterministic_records):
        assert len(deterministic_records) == 4 * 50
        assert all(r.converged for r in deterministic_records)

    def test_hfl_liquid_share_band(self, deterministic_records):
        shares = [
            r.liquid_cbdc_share
            for r in by_pairing(deterministic_records, AgentKind.HFL, Economy.WITH_CBDC)
        ]
        assert min(shares) >= 0.40
        assert max(shares) <= 0.50

    def test_lfl_liquid_share_cap(self, deterministic_records):
        shares = [
            r.liquid_cbdc_share
            for r in by_pairing(deterministic_records, AgentKind.LFL, Economy.WITH_CBDC)
        ]
        assert max(shares) <= 0.39

    def test_lfl_outweighs_hfl_in_portfolio_share(self, deterministic_records):
        hfl = by_pairing(deterministic_records, AgentKind.HFL, Economy.WITH_CBDC)
        lfl = by_pairing(deterministic_records, AgentKind.LFL, Economy.WITH_CBDC)
        for h, l in zip(hfl, lfl):
            assert l.portfolio_cbdc_share >= h.portfolio_cbdc_share

    def test_substitution_never_overshoots(self, deterministic_records):
        # Deposits fall by at least the CBDC uptake at every point.
        assert substitution_violations(deterministic_records) == []

    def test_parallel_jobs_agree(self, deterministic_records):
        parallel = sweep_deterministic(default_instance(), jobs=2)
        for a, b in zip(deterministic_records, parallel):
            assert a.agent is b.agent and a.economy is b.economy
            if a.alloc is None:
                assert b.alloc is None
                continue
            assert a.alloc.deposits == pytest.approx(b.alloc.deposits, abs=1e-8)
            assert a.alloc.cbdc == pytest.approx(b.alloc.cbdc, abs=1e-8)
            assert a.alloc.risky == pytest.approx(b.alloc.risky, abs=1e-8)

    def test_infeasible_point_recorded_not_raised(self):
        records = sweep_deterministic(default_instance(), s_values=[1.0, -5.0])
        failed = [r for r in records if not r.converged]
        assert len(failed) == 4
        assert all(r.alloc is None and r.error for r in failed)


class TestStochasticSweep:
    def test_p_eps_tracks_mean(self, stochastic_records):
        for r in stochastic_records:
            s_min = r.sweep_parameter
            assert r.p_eps_used == pytest.approx((1.0 - s_min) / (1.25 - s_min), rel=1e-12)

    def test_hfl_risky_is_hump_shaped(self, stochastic_records):
        risky = [
            r.alloc.risky
            for r in by_pairing(stochastic_records, AgentKind.HFL, Economy.WITH_CBDC)
            if r.alloc is not None
        ]
        peak = int(np.argmax(risky))
        assert 0 < peak < len(risky) - 1
        assert all(a < b for a, b in zip(risky[:peak], risky[1:peak + 1]))
        assert all(a > b for a, b in zip(risky[peak:], risky[peak + 1:]))

    def test_vanishing_uncertainty_matches_deterministic(self):
        stochastic = sweep_stochastic(default_instance(), s_min_values=[1.0 - 1e-9])
        deterministic = sweep_deterministic(default_instance(), s_values=[1.0])
        for s_rec, d_rec in zip(stochastic, deterministic):
            assert s_rec.agent is d_rec.agent and s_rec.economy is d_rec.economy
            for field in ("risky", "deposits", "cbdc"):
                assert getattr(s_rec.alloc, field) == pytest.approx(
                    getattr(d_rec.alloc, field), abs=1e-4
                )

    def test_hfl_liquid_flat_while_lfl_responds(self, stochastic_records):
        # Over the mild-stress half of the grid the literate agent's
        # liquid book barely moves while the restricted agent's swings.
        def liquid_range(agent):
            levels = [
                r.alloc.deposits + r.alloc.cbdc
                for r in by_pairing(stochastic_records, agent, Economy.WITH_CBDC)
                if r.alloc is not None and r.sweep_parameter >= -0.2
            ]
            return max(levels) - min(levels)

        assert liquid_range(AgentKind.HFL) < 0.01
        assert liquid_range(AgentKind.LFL) > 0.1


class TestCbdcReturnSweep:
    def test_non_interest_bearing_still_held(self):
        records = sweep_cbdc_return(default_instance(), scenario=1.0)
        lfl = [r for r in records if r.agent is AgentKind.LFL]
        at_par = [r for r in lfl if r.sweep_parameter == 1.0]
        assert at_par and at_par[0].alloc.cbdc > 0.0

    def test_elasticities_at_zero_income(self):
        records = sweep_cbdc_return(default_instance(), scenario=0.0)
        lfl = [r for r in records if r.agent is AgentKind.LFL]
        est = share_elasticity(lfl, 1.00, 1.20)
        assert est.elasticity_cbdc_share == pytest.approx(0.63, abs=0.05)
        assert est.elasticity_deposit_share == pytest.approx(-0.63, abs=0.05)

    def test_elasticities_at_unit_income(self):
        records = sweep_cbdc_return(default_instance(), scenario=1.0)
        lfl = [r for r in records if r.agent is AgentKind.LFL]
        est = share_elasticity(lfl, 1.00, 1.20)
        assert est.elasticity_cbdc_share == pytest.approx(0.18, abs=0.05)
        assert est.elasticity_deposit_share == pytest.approx(-0.16, abs=0.05)

    def test_hfl_risky_insensitive_to_cbdc_return(self):
        records = sweep_cbdc_return(default_instance(), scenario=1.0)
        risky = [r.alloc.risky for r in records if r.agent is AgentKind.HFL]
        spread = (max(risky) - min(risky)) / min(risky)
        assert spread < 0.01

    def test_return_above_deposit_rejected(self):
        with pytest.raises(ParameterError):
            sweep_cbdc_return(default_instance(), r_m_values=[1.0, 1.5])

    def test_default_grid(self):
        records = sweep_cbdc_return(default_instance())
        params = sorted({r.sweep_parameter for r in records})
        assert params == pytest.approx(list(DEFAULT_CBDC_RETURN_GRID))


class TestShareElasticity:
    def test_mixed_agents_rejected(self):
        records = sweep_cbdc_return(default_instance())
        with pytest.raises(ParameterError, match="one agent"):
            share_elasticity(records, 1.00, 1.20)

    def test_missing_endpoint_rejected(self):
        records = sweep_cbdc_return(default_instance(), r_m_values=[1.0, 1.1])
        lfl = [r for r in records if r.agent is AgentKind.LFL]
        with pytest.raises(ParameterError, match="endpoints"):
            share_elasticity(lfl, 1.00, 1.20)

    def test_zero_holdings_rejected(self):
        prefs_lambda_zero = default_instance()
        import dataclasses

        instance = dataclasses.replace(
            prefs_lambda_zero,
            prefs=dataclasses.replace(prefs_lambda_zero.prefs, lam=0.0),
        )
        records = sweep_cbdc_return(instance)
        lfl = [r for r in records if r.agent is AgentKind.LFL]
        with pytest.raises(EstimationError, match="zero mean holding"):
            share_elasticity(lfl, 1.00, 1.20)


class TestStochasticGridValidation:
    def test_s_min_above_mean_rejected(self):
        with pytest.raises(ParameterError):
            sweep_stochastic(default_instance(), s_min_values=[1.1], target_mean=1.0)
