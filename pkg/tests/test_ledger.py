import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppfrisk.errors import ConfigError, PreconditionError
from ppfrisk.ledger import (
    ClaimEvent,
    FundInvestmentPolicy,
    FundLedger,
    allocation_return,
    conservation_residual,
    fund_is_insolvent,
    fund_step_year,
    liability_benchmark_return,
    settle_claim,
)
from ppfrisk.market import MarketConfig, MarketPath, rng_for, simulate_path
from ppfrisk.scheme import MembershipMix, Scheme, Sponsor

PENSIONERS = MembershipMix(1.0, 0.0, 0.0)


def scheme(assets=80.0, liability=100.0, net_worth=50.0):
    return Scheme("s", Sponsor("sp", "B", 0.05, net_worth), liability, assets, mix=PENSIONERS)


def test_settle_pure_shortfall():
    ev = settle_claim(scheme(), "deficit_fraction", 0.0)
    assert (ev.net_claim, ev.recovery, ev.scheme_assets_taken, ev.ppf_liability_at_entry) == (20.0, 0.0, 80.0, 100.0)


def test_settle_forty_percent_recovery():
    ev = settle_claim(scheme(), "deficit_fraction", 0.4)
    assert ev.recovery == pytest.approx(8.0)
    assert ev.net_claim == pytest.approx(12.0)


def test_settle_net_worth_claim():
    ev = settle_claim(scheme(net_worth=50.0), "net_worth_30", None)
    assert ev.recovery == pytest.approx(15.0)
    assert ev.net_claim == pytest.approx(5.0)
    assert settle_claim(scheme(net_worth=1000.0), "net_worth_30").net_claim == 0.0


def test_settle_funded_scheme_is_precondition_error():
    with pytest.raises(PreconditionError):
        settle_claim(scheme(assets=100.0))


def test_settle_bad_mode():
    with pytest.raises(ConfigError):
        settle_claim(scheme(), "haircut", 0.1)


@given(assets=st.floats(0, 99.9), param=st.floats(0, 1), nw=st.floats(0, 1e3), mode=st.sampled_from(["deficit_fraction", "net_worth_30"]))
def test_claim_event_invariant(assets, param, nw, mode):
    ev = settle_claim(scheme(assets=assets, net_worth=nw), mode, param)
    assert ev.net_claim == pytest.approx(max(0.0, ev.ppf_liability_at_entry - ev.scheme_assets_taken - ev.recovery))
    assert ev.net_claim >= 0


@given(assets=st.floats(0, 99.9), p1=st.floats(0, 1), p2=st.floats(0, 1))
def test_more_recovery_never_raises_claims(assets, p1, p2):
    lo, hi = sorted((p1, p2))
    s = scheme(assets=assets)
    assert settle_claim(s, "deficit_fraction", hi).net_claim <= settle_claim(s, "deficit_fraction", lo).net_claim


def test_policy_defaults_and_budget():
    pol = FundInvestmentPolicy()
    assert sum(pol.allocation.values()) == pytest.approx(1.0)
    assert pol.allocation["global_bonds"] == 0.5
    assert pol.budget_violations() == []
    assert FundInvestmentPolicy(tracking_error=0.05).budget_violations()
    assert FundInvestmentPolicy(active_alpha=0.004).budget_violations()
    with pytest.raises(ConfigError):
        FundInvestmentPolicy(allocation={"cash": 0.5, "global_bonds": 0.4})


def test_step_arithmetic_identity():
    # assets 100, return 5%, levies 10, outgo 8, acquired 20 -> 127
    pol = FundInvestmentPolicy(swap_overlay=True, tracking_error=0.0, liability_duration=1.0, payout_rate=0.08)
    path = MarketPath.flat(1, gilt_yield=0.05)
    ledger = FundLedger(assets=100.0, assumed_liabilities=100.0)
    claim = ClaimEvent(0, "x", 20.0, 20.0, 0.0, 0.0)
    out = fund_step_year(ledger, 10.0, [claim], pol, path, 0, alpha=0.0)
    assert out.asset_return == pytest.approx(0.05)
    assert out.outgo == pytest.approx(8.0)
    assert out.assets == pytest.approx(127.0)
    assert out.assumed_liabilities == pytest.approx(100 * 1.05 - 8 + 20)
    assert conservation_residual(ledger, out) < 1e-12


def test_no_claims_net_position_moves_by_levies_only():
    pol = FundInvestmentPolicy(tracking_error=0.0)
    path = simulate_path(MarketConfig(), 3, 0, 5)
    for t in range(5):
        matched = FundLedger(assets=500.0, assumed_liabilities=500.0)
        out = fund_step_year(matched, 7.0, [], pol, path, t, alpha=0.0)
        assert out.net_position == pytest.approx(7.0, rel=1e-9)


def test_net_position_rolls_at_benchmark_plus_levies():
    pol = FundInvestmentPolicy(tracking_error=0.0)
    path = simulate_path(MarketConfig(), 3, 0, 5)
    ledger = FundLedger(assets=500.0, assumed_liabilities=500.0)
    for t in range(5):
        before = ledger.net_position
        ledger = fund_step_year(ledger, 7.0, [], pol, path, t, alpha=0.0)
        assert ledger.net_position == pytest.approx(before * (1 + ledger.liability_return) + 7.0, rel=1e-9)


def test_allocation_return_without_overlay():
    pol = FundInvestmentPolicy(swap_overlay=False)
    path = MarketPath.flat(1, equity_return=0.10, gilt_yield=0.04, property_return=0.06)
    expected = 0.2 * 0.04 + 0.5 * 0.04 + 0.125 * 0.10 + 0.075 * 0.10 + 0.075 * 0.06 + 0.025 * 0.04
    assert allocation_return(pol, path, 0) == pytest.approx(expected)
    out = fund_step_year(FundLedger(assets=100.0), 0.0, [], pol, path, 0)
    assert out.assets == pytest.approx(100 * (1 + expected))


def test_alpha_needs_rng():
    with pytest.raises(ConfigError):
        fund_step_year(FundLedger(assets=1.0), 0.0, [], FundInvestmentPolicy(), MarketPath.flat(1), 0)


def test_tracking_error_within_budget():
    pol = FundInvestmentPolicy()
    path = MarketPath.flat(5000, gilt_yield=0.04)
    rng = rng_for(1, 0, 2)
    ledger = FundLedger(assets=1e6, assumed_liabilities=1e6)
    active = []
    for t in range(5000):
        ledger = fund_step_year(ledger, 0.0, [], pol, path, t, rng=rng)
        active.append(ledger.asset_return - ledger.liability_return)
    active = np.array(active)
    assert active.mean() == pytest.approx(0.014, abs=3 * 0.04 / np.sqrt(5000))
    assert active.std(ddof=1) <= 0.04 * (1 + 3 / np.sqrt(2 * 4999))


@pytest.mark.parametrize("assets, liabilities, insolvent", [(0.0, 100.0, True), (100.0, 100.0, False), (99.0, 100.0, True)])
def test_insolvency_examples(assets, liabilities, insolvent):
    assert fund_is_insolvent(FundLedger(assets=assets, assumed_liabilities=liabilities)) is insolvent


def test_insolvency_threshold_and_stickiness():
    assert not fund_is_insolvent(FundLedger(assets=95.0, assumed_liabilities=100.0), threshold=0.1)
    pol = FundInvestmentPolicy(tracking_error=0.0)
    path = MarketPath.flat(2, gilt_yield=0.03)
    sick = fund_step_year(FundLedger(assets=10.0, assumed_liabilities=100.0), 0.0, [], pol, path, 0, alpha=0.0)
    assert sick.insolvent
    healed = fund_step_year(sick, 1e6, [], pol, path, 1, alpha=0.0)
    assert healed.assets > healed.assumed_liabilities and healed.insolvent


def test_liability_benchmark_is_duration_bond():
    path = MarketPath.flat(1, gilt_yield=0.04)
    assert liability_benchmark_return(path, 0, 15.0) == pytest.approx(0.04)


@given(
    a0=st.floats(0, 1e9), l0=st.floats(0, 1e9), lev=st.floats(0, 1e7),
    taken=st.floats(0, 1e8), assets_in=st.floats(0, 1e8), alpha=st.floats(-0.2, 0.2),
)  # fmt: skip
def test_conservation_random_steps(a0, l0, lev, taken, assets_in, alpha):
    path = simulate_path(MarketConfig(), 2, 0, 1)
    ev = ClaimEvent(0, "x", taken, assets_in, 0.0, max(0.0, taken - assets_in))
    before = FundLedger(assets=a0, assumed_liabilities=l0)
    after = fund_step_year(before, lev, [ev], FundInvestmentPolicy(), path, 0, alpha=alpha)
    assert conservation_residual(before, after) <= 1e-9
    assert after.levy_income_cum >= before.levy_income_cum and after.claims_cum >= before.claims_cum
