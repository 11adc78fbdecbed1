"""Defined-benefit schemes, their sponsors and the compensation rules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError
from .market import MarketPath

GRADES = ("AAA", "AA", "A", "BBB", "BB", "B", "CCC")
INVESTMENT_GRADES = frozenset(GRADES[:4])

COMPENSATION_CAP = 25_000.0
BELOW_NPA_FACTOR = 0.9
LPI_IN_PAYMENT = 0.025
LPI_IN_DEFERMENT = 0.05


@dataclass(frozen=True)
class Sponsor:
    id: str
    grade: str
    base_pd: float
    net_worth: float = 0.0

    def __post_init__(self):
        if self.grade not in GRADES:
            raise ConfigError("sponsor.grade", f"must be one of {', '.join(GRADES)}")
        if not 0 < self.base_pd < 1:
            raise ConfigError("sponsor.base_pd", "must lie in (0, 1)")
        if self.net_worth < 0:
            raise ConfigError("sponsor.net_worth", "must be >= 0")

    @property
    def investment_grade(self) -> bool:
        return self.grade in INVESTMENT_GRADES


@dataclass(frozen=True)
class MembershipMix:
    share_pensioner: float = 0.4
    share_deferred: float = 0.35
    share_active: float = 0.25

    def __post_init__(self):
        shares = (self.share_pensioner, self.share_deferred, self.share_active)
        if min(shares) < 0:
            raise ConfigError("mix", "membership shares must be >= 0")
        if abs(sum(shares) - 1.0) > 1e-9:
            raise ConfigError("mix", "membership shares must sum to 1")

    @property
    def haircut(self) -> float:
        return self.share_pensioner + BELOW_NPA_FACTOR * (self.share_deferred + self.share_active)


@dataclass(frozen=True)
class Scheme:
    id: str
    sponsor: Sponsor
    full_liability: float
    assets: float
    equity_share: float = 2 / 3
    liability_duration: float = 15.0
    mix: MembershipMix = field(default_factory=MembershipMix)
    amortisation_years: int = 10

    def __post_init__(self):
        if self.assets < 0:
            raise ConfigError("scheme.assets", "must be >= 0")
        if self.full_liability <= 0:
            raise ConfigError("scheme.full_liability", "must be > 0")
        if not 0 <= self.equity_share <= 1:
            raise ConfigError("scheme.equity_share", "must lie in [0, 1]")
        if self.liability_duration < 0:
            raise ConfigError("scheme.liability_duration", "must be >= 0")
        if self.amortisation_years < 1:
            raise ConfigError("scheme.amortisation_years", "must be >= 1")

    @property
    def funding_ratio(self) -> float:
        return self.assets / self.full_liability

    @property
    def deficit(self) -> float:
        return self.full_liability - self.assets


def member_compensation(promised_pension: float, above_scheme_pension_age: bool) -> float:
    """Annual compensation paid to one member.

    Members above scheme pension age keep their full pension. Younger
    members get 90% of it, and the result is capped at 25,000.
    """
    if promised_pension < 0:
        raise DomainError("promised pension must be >= 0")
    if above_scheme_pension_age:
        return float(promised_pension)
    return min(BELOW_NPA_FACTOR * promised_pension, COMPENSATION_CAP)


def lpi_factor(inflation, cap: float):
    """Limited price indexation: uplift by inflation, floored at 0 and capped."""
    out = 1.0 + np.minimum(np.maximum(inflation, 0.0), cap)
    return float(out) if np.ndim(out) == 0 else out


def ppf_liability(scheme: Scheme) -> float:
    return scheme.mix.haircut * scheme.full_liability


def amortisation_contribution(deficit: float, years: int, rate: float | None = None) -> float:
    """Yearly contribution that clears ``deficit`` over ``years``.

    Straight line by default. With ``rate`` given, the level annuity payment
    whose present value at ``rate`` equals the deficit.
    """
    if years < 1:
        raise DomainError("amortisation period must be >= 1 year")
    if deficit <= 0:
        return 0.0
    if rate is None or rate == 0:
        return deficit / years
    return deficit * rate / (1.0 - (1.0 + rate) ** -years)


def bond_return(yield_before: float, yield_after: float, duration: float) -> float:
    """First-order bond return: carry plus duration times the yield move."""
    return yield_before - duration * (yield_after - yield_before)


def scheme_step_year(
    scheme: Scheme,
    path: MarketPath,
    year: int,
    lpi_cap: float = LPI_IN_PAYMENT,
    indexation_allowance: float = 0.0,
    contribution: float | None = None,
) -> Scheme:
    """Roll a scheme forward one year along ``path``.

    The contribution (straight-line amortisation of the opening deficit
    unless given explicitly) is paid at the year end. Liabilities earn the
    opening gilt yield, revalue with the yield move through their duration,
    and are uplifted by LPI in excess of ``indexation_allowance`` already
    priced into the discount basis.
    """
    if not 0 <= year < path.years:
        raise DomainError(f"year {year} outside path of {path.years} years")
    y0, y1 = path.yield_before(year), float(path.gilt_yield[year])
    bonds = bond_return(y0, y1, scheme.liability_duration)
    asset_ret = scheme.equity_share * float(path.equity_total_return[year]) + (1 - scheme.equity_share) * bonds
    if contribution is None:
        contribution = amortisation_contribution(scheme.deficit, scheme.amortisation_years)
    indexation = lpi_factor(float(path.inflation[year]), lpi_cap) / lpi_factor(indexation_allowance, lpi_cap)
    new_assets = max(0.0, scheme.assets * (1 + asset_ret) + contribution)
    new_liability = scheme.full_liability * (1 + bonds) * indexation
    return replace(scheme, assets=new_assets, full_liability=new_liability)
