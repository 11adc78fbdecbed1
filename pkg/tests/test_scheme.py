import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppfrisk.errors import ConfigError, DomainError
from ppfrisk.market import MarketConfig, MarketPath, simulate_path
from ppfrisk.scheme import (
    MembershipMix,
    Scheme,
    Sponsor,
    amortisation_contribution,
    bond_return,
    lpi_factor,
    member_compensation,
    ppf_liability,
    scheme_step_year,
)

SPONSOR = Sponsor(id="sp", grade="BBB", base_pd=0.01, net_worth=50.0)


def make_scheme(liability=100.0, assets=80.0, **kw):
    return Scheme(id="s", sponsor=SPONSOR, full_liability=liability, assets=assets, **kw)


@pytest.mark.parametrize(
    "promised, above, expected",
    [(10_000, True, 10_000), (20_000, False, 18_000), (40_000, False, 25_000), (100_000, True, 100_000)],
)
def test_member_compensation(promised, above, expected):
    assert member_compensation(promised, above) == pytest.approx(expected)


def test_negative_pension_rejected():
    with pytest.raises(DomainError):
        member_compensation(-1.0, True)


@given(p=st.floats(0, 1e6), above=st.booleans())
def test_compensation_never_exceeds_promise(p, above):
    c = member_compensation(p, above)
    assert 0 <= c <= p
    if above:
        assert c == p


@pytest.mark.parametrize("infl, cap, expected", [(0.02, 0.025, 1.02), (0.04, 0.025, 1.025), (-0.01, 0.05, 1.0)])
def test_lpi_factor(infl, cap, expected):
    assert lpi_factor(infl, cap) == pytest.approx(expected, rel=1e-15)


@given(infl=st.floats(-1, 1), cap=st.floats(0, 0.2))
def test_lpi_factor_bounds(infl, cap):
    f = lpi_factor(infl, cap)
    assert 1.0 <= f <= 1.0 + cap


@pytest.mark.parametrize(
    "mix, haircut",
    [(MembershipMix(1, 0, 0), 1.0), (MembershipMix(0, 1, 0), 0.9), (MembershipMix(0.5, 0.5, 0), 0.95)],
)
def test_ppf_liability_haircut(mix, haircut):
    scheme = make_scheme(liability=200.0, mix=mix)
    assert ppf_liability(scheme) == pytest.approx(200.0 * haircut)


@given(p=st.floats(0, 1), d=st.floats(0, 1))
def test_ppf_liability_never_exceeds_full(p, d):
    d = d * (1 - p)
    scheme = make_scheme(mix=MembershipMix(p, d, 1 - p - d))
    assert ppf_liability(scheme) <= scheme.full_liability + 1e-12


def test_amortisation_examples():
    assert amortisation_contribution(0, 10) == 0
    assert amortisation_contribution(-5, 10) == 0
    assert amortisation_contribution(100, 10) == pytest.approx(10.0)
    # level annuity: 100 * 0.03 / (1 - 1.03**-10)
    assert amortisation_contribution(100, 10, rate=0.03) == pytest.approx(11.723050660515952, rel=1e-12)
    with pytest.raises(DomainError):
        amortisation_contribution(100, 0)


def test_scheme_invariants():
    with pytest.raises(ConfigError):
        make_scheme(equity_share=1.3)
    with pytest.raises(ConfigError):
        make_scheme(assets=-1.0)
    with pytest.raises(ConfigError):
        make_scheme(liability=0.0)


def test_neutral_roll_keeps_funding_ratio():
    # all-bond, fully funded, flat yields: assets and liabilities both earn the yield
    path = MarketPath.flat(1, equity_return=0.0, gilt_yield=0.04, inflation=0.0)
    scheme = make_scheme(liability=100.0, assets=100.0, equity_share=0.0)
    stepped = scheme_step_year(scheme, path, 0, contribution=0.0)
    assert stepped.funding_ratio == pytest.approx(1.0, rel=1e-15)
    assert stepped.assets == pytest.approx(104.0)


def test_deficit_falls_by_contribution_in_flat_markets():
    path = MarketPath.flat(1)
    stepped = scheme_step_year(make_scheme(liability=200.0, assets=100.0), path, 0)
    assert stepped.deficit == pytest.approx(90.0)


def test_hand_roll_forward_on_a_stochastic_path():
    path = simulate_path(MarketConfig(), seed=4, path_index=2, horizon=3)
    scheme = make_scheme(liability=100.0, assets=70.0, liability_duration=12.0)
    for t in range(3):
        y0, y1 = path.yield_before(t), path.gilt_yield[t]
        bonds = y0 - 12.0 * (y1 - y0)
        asset_ret = (2 / 3) * path.equity_total_return[t] + (1 / 3) * bonds
        contrib = max(0.0, scheme.full_liability - scheme.assets) / 10
        index = 1 + min(max(path.inflation[t], 0.0), 0.025)
        exp_assets = scheme.assets * (1 + asset_ret) + contrib
        exp_liab = scheme.full_liability * (1 + bonds) * index
        scheme = scheme_step_year(scheme, path, t)
        assert scheme.assets == pytest.approx(exp_assets, rel=1e-14)
        assert scheme.full_liability == pytest.approx(exp_liab, rel=1e-14)


@given(
    assets=st.floats(0, 1e9),
    eq=st.floats(-0.6, 1.0),
    share=st.floats(0, 1),
    contribution=st.floats(0, 1e7),
)
def test_asset_step_accounting_identity(assets, eq, share, contribution):
    path = MarketPath.flat(1, equity_return=eq, gilt_yield=0.03)
    scheme = make_scheme(liability=1e9, assets=assets, equity_share=share)
    stepped = scheme_step_year(scheme, path, 0, contribution=contribution)
    portfolio = share * eq + (1 - share) * bond_return(0.03, 0.03, scheme.liability_duration)
    expected = max(0.0, assets * (1 + portfolio) + contribution)
    assert stepped.assets == pytest.approx(expected, rel=1e-12, abs=1e-6)


def test_step_year_out_of_range():
    with pytest.raises(DomainError):
        scheme_step_year(make_scheme(), MarketPath.flat(1), 1)


def test_bond_return_first_order():
    assert bond_return(0.04, 0.05, 10) == pytest.approx(0.04 - 0.10)
    assert np.isclose(bond_return(0.04, 0.04, 10), 0.04)
