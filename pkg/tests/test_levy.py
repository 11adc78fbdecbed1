import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppfrisk.errors import ConfigError, DomainError, UsageError
from ppfrisk.levy import (
    PBGC_MULTIEMPLOYER_FLAT,
    PBGC_SCHEDULES,
    LevySchedule,
    breakeven_levy_rate,
    fair_premium,
    levy_vector,
    pbgc_premium,
    ppf_levy,
    ppf_levy_population,
    scheme_levy,
)
from ppfrisk.scheme import MembershipMix, Scheme, Sponsor

PENSIONERS = MembershipMix(1.0, 0.0, 0.0)


def scheme(liability, assets, grade="BBB", pd=0.01):
    return Scheme(
        id=f"s{liability}-{assets}", sponsor=Sponsor("sp", grade, pd, 0.0),
        full_liability=liability, assets=assets, mix=PENSIONERS,
    )  # fmt: skip


def test_pbgc_1988_cap_binds():
    assert pbgc_premium(1_000, 10_000_000, 1988) == 50_000


def test_pbgc_1996_cap_removed():
    assert pbgc_premium(1_000, 10_000_000, 1996) == pytest.approx(109_000, abs=1e-9)


def test_pbgc_1974_flat():
    assert pbgc_premium(2_345, 5e6, 1974) == 2_345


def test_pbgc_other_years():
    assert pbgc_premium(100, 0, 1978) == pytest.approx(260)
    assert pbgc_premium(100, 0, 1986) == pytest.approx(850)
    assert pbgc_premium(1_000, 10_000_000, 1991) == pytest.approx(19_000 + 53_000)
    assert pbgc_premium(1_000, 10_000_000, 2006) == pytest.approx(30_000 + 90_000)
    assert PBGC_MULTIEMPLOYER_FLAT == 2.60


def test_pbgc_unknown_year():
    with pytest.raises(ConfigError):
        pbgc_premium(1, 1, 1999)


@given(
    year=st.sampled_from(sorted(PBGC_SCHEDULES)),
    n=st.floats(0, 1e5), dn=st.floats(0, 1e5),
    u=st.floats(0, 1e9), du=st.floats(0, 1e9),
)  # fmt: skip
def test_pbgc_monotone(year, n, dn, u, du):
    base = pbgc_premium(n, u, year)
    assert pbgc_premium(n + dn, u, year) >= base
    assert pbgc_premium(n, u + du, year) >= base


def test_fair_premium_examples():
    assert fair_premium(0.02, 50e6) == pytest.approx(1e6)
    assert fair_premium(0.0, 123.0) == 0.0
    assert fair_premium(1.0, 77.0) == 77.0
    with pytest.raises(DomainError):
        fair_premium(1.2, 1.0)


def test_ppf_levy_fully_funded():
    sch = LevySchedule(kind="ppf_split", flat_rate=2.0, variable_rate=0.009)
    out = ppf_levy(scheme(100e6, 120e6), sch)
    assert out["risk_factor"] == 0.0
    assert out["total"] == out["scheme_factor"] == pytest.approx(2.0 * 100e6 / 50_000)


def test_ppf_levy_risk_factor_arithmetic():
    sch = LevySchedule(kind="ppf_split", variable_rate=0.009)
    out = ppf_levy(scheme(50e6, 40e6, grade="BBB"), sch)
    assert out["risk_factor"] == pytest.approx(90_000)


def test_ppf_levy_wrong_kind():
    with pytest.raises(UsageError):
        ppf_levy(scheme(1.0, 1.0), LevySchedule(kind="flat"))


def test_population_rescales_to_80_percent_risk_share():
    sch = LevySchedule(kind="ppf_split", flat_rate=100.0, variable_rate=0.0001)
    pop = [scheme(100e6, 90e6), scheme(200e6, 210e6), scheme(50e6, 10e6, grade="B")]
    rows = ppf_levy_population(pop, sch)
    risk = sum(r["risk_factor"] for r in rows)
    total = sum(r["total"] for r in rows)
    assert risk / total == pytest.approx(0.8, rel=1e-12)


def test_population_keeps_share_already_above_minimum():
    sch = LevySchedule(kind="ppf_split", flat_rate=0.01, variable_rate=0.01)
    pop = [scheme(100e6, 50e6)]
    rows = ppf_levy_population(pop, sch)
    assert rows[0] == ppf_levy(pop[0], sch)


def test_population_target_total_scaling():
    sch = LevySchedule(kind="ppf_split", flat_rate=1.0, variable_rate=0.001, target_total=300e6)
    pop = [scheme(1e9, 0.7e9), scheme(2e9, 1.9e9, grade="AA")]
    rows = ppf_levy_population(pop, sch)
    assert sum(r["total"] for r in rows) == pytest.approx(300e6, rel=1e-12)
    assert sum(r["risk_factor"] for r in rows) >= 0.8 * 300e6 * (1 - 1e-12)


def test_population_with_no_underfunding_drops_scheme_factor():
    sch = LevySchedule(kind="ppf_split", flat_rate=1.0, variable_rate=0.001)
    rows = ppf_levy_population([scheme(1e6, 2e6)], sch)
    assert rows[0]["total"] == 0.0


@given(
    data=st.lists(st.tuples(st.floats(1e5, 1e9), st.floats(0.0, 1.5)), min_size=1, max_size=20),
    flat=st.floats(0, 100), rate=st.floats(0, 0.05),
)  # fmt: skip
def test_population_risk_share_always_at_least_minimum(data, flat, rate):
    sch = LevySchedule(kind="ppf_split", flat_rate=flat, variable_rate=rate)
    pop = [scheme(l, l * f) for l, f in data]
    rows = ppf_levy_population(pop, sch)
    total = sum(r["total"] for r in rows)
    if total > 0:
        assert sum(r["risk_factor"] for r in rows) >= 0.8 * total * (1 - 1e-9)


@given(
    kind=st.sampled_from(["flat", "exposure", "risk_based", "ppf_split"]),
    assets=st.floats(0, 2e8), extra=st.floats(0, 1e8),
)  # fmt: skip
def test_levy_monotone_in_underfunding(kind, assets, extra):
    sch = LevySchedule(kind=kind, flat_rate=10.0, variable_rate=0.01, variable_cap=None)
    better = scheme_levy(scheme(2e8, min(assets + extra, 2e8)), sch)
    worse = scheme_levy(scheme(2e8, assets), sch)
    assert worse >= better - 1e-9 * max(1.0, abs(better))


def test_exposure_cap_per_member():
    sch = LevySchedule(kind="exposure", flat_rate=0.0, variable_rate=0.5, variable_cap=10.0)
    # 1e6 of liability = 20 members, cap 200
    assert scheme_levy(scheme(1e6, 0.0), sch) == pytest.approx(200.0)


def test_levy_vector_matches_scalar_levy():
    schemes = [scheme(1e8, 0.8e8, "BB", 0.015), scheme(3e7, 0.4e7, "A", 0.0012), scheme(5e7, 6e7, "CCC", 0.15)]
    for kind in ("flat", "exposure", "risk_based"):
        sch = LevySchedule(kind=kind, flat_rate=3.0, variable_rate=0.02)
        vec = levy_vector(
            sch, np.array([s.full_liability for s in schemes]), np.array([s.full_liability for s in schemes]),
            np.array([s.assets for s in schemes]), np.array([s.sponsor.base_pd for s in schemes]), np.ones(3),
        )  # fmt: skip
        assert vec == pytest.approx([scheme_levy(s, sch) for s in schemes], rel=1e-12)


def test_breakeven_examples():
    assert breakeven_levy_rate([0.0, 0.0], [5.0, 5.0]) == 0.0
    assert breakeven_levy_rate([3.0], [1_000.0]) == pytest.approx(0.003)
    with pytest.raises(DomainError):
        breakeven_levy_rate([1.0], [0.0])
    with pytest.raises(DomainError):
        breakeven_levy_rate([1.0, 2.0], [1.0])


def test_schedule_validation():
    with pytest.raises(ConfigError):
        LevySchedule(kind="lump")
    with pytest.raises(ConfigError):
        LevySchedule(risk_share_min=1.5)
    with pytest.raises(ConfigError):
        LevySchedule(flat_rate=-1.0)
