"""Twin-peaks regulatory capital for a with-profits life insurer.

The five specified stress events (equity, interest rate, property, credit,
persistency) produce net losses whose sum is the risk capital margin. The
first peak is statutory reserves plus the long-term insurance capital
requirement, the second is realistic liabilities plus the margin, and any
excess of the second over the first is the with-profits capital component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DataError, DomainError

ASSET_CLASSES = (
    "uk_equity",
    "overseas_equity",
    "fixed_interest",
    "property",
    "corporate_bond",
    "commercial_mortgage",
    "reinsurance_asset",
    "cash",
)
CREDIT_CLASSES = frozenset({"corporate_bond", "commercial_mortgage", "reinsurance_asset"})

EQUITY_FLOOR = 0.10
EQUITY_CAP = 0.25
EARNINGS_YIELD_MULTIPLE = 4 / 3
INTEREST_SHIFT_FRACTION = 0.20
PROPERTY_MIN, PROPERTY_MAX = 0.10, 0.20
PERSISTENCY_FACTOR = 0.5
RCM_FLOOR = 0.04
FLAT_CREDIT_CHARGE = 0.10
SOLVENCY1_MINIMUM_EUR = 3_000_000.0

# Maximum stressed spreads in bp. Endpoints fixed by the rules, interior grades interpolated.
IG_MAX_SPREAD = dict(zip(("AAA", "AA", "A", "BBB"), np.linspace(90.0, 210.0, 4)))
SUB_IG_MAX_SPREAD = {"BB": 525.0, "B": 900.0}
LOWEST_GRADE = "CCC"


@dataclass(frozen=True)
class AssetHolding:
    asset_class: str
    market_value: float
    grade: str | None = None
    current_spread: float | None = None  # bp
    spread_duration: float | None = None
    rate_duration: float | None = None
    in_default_provisioned: bool = False
    intra_group_designated: bool = False

    def __post_init__(self):
        if self.asset_class not in ASSET_CLASSES:
            raise DataError(f"asset_class must be one of {', '.join(ASSET_CLASSES)}")
        if self.market_value < 0:
            raise DataError("market_value must be >= 0")


@dataclass(frozen=True)
class CapitalComponents:
    ordinary_shares: float = 0.0
    reserves: float = 0.0
    perpetual_subordinated_debt: float = 0.0
    innovative_tier1: float = 0.0
    upper_tier2: float = 0.0
    lower_tier2: float = 0.0
    intangible_assets: float = 0.0
    inadmissible_assets: float = 0.0
    borrowing: float = 0.0
    total_assets: float | None = None

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value is not None and value < 0:
                raise DomainError(f"capital component {name} must be >= 0")

    @property
    def core_tier1(self) -> float:
        return self.ordinary_shares + self.reserves

    @property
    def tier1(self) -> float:
        return self.core_tier1 + self.innovative_tier1

    @property
    def tier2(self) -> float:
        return self.perpetual_subordinated_debt + self.upper_tier2 + self.lower_tier2


@dataclass(frozen=True)
class StressMarket:
    """Market readings the stress rules refer to."""

    equity_index: float = 100.0
    equity_index_avg_90d: float = 100.0
    earnings_yield: float = 0.03
    gilt_yield: float = 0.045
    property_index: float = 100.0
    property_index_avg_3y: float = 100.0


@dataclass(frozen=True)
class InsurerBalanceSheet:
    holdings: tuple[AssetHolding, ...]
    mathematical_reserves: float
    realistic_liabilities: float
    liability_rate_duration: float = 0.0
    termination_rates: tuple[float, ...] = ()
    surrender_strain: float | tuple[float, ...] = 0.0
    capital: CapitalComponents = field(default_factory=CapitalComponents)
    market: StressMarket = field(default_factory=StressMarket)
    liability_equity_pass_through: float = 0.0
    lticr_rate: float = 0.04
    eur_fx: float = 1.0  # balance-sheet currency units per euro

    def __post_init__(self):
        object.__setattr__(self, "holdings", tuple(self.holdings))
        object.__setattr__(self, "termination_rates", tuple(self.termination_rates))
        if self.mathematical_reserves < 0 or self.realistic_liabilities < 0:
            raise DomainError("reserves and liabilities must be >= 0")
        if any(not 0 <= r <= 1 for r in self.termination_rates):
            raise DomainError("termination rates must lie in [0, 1]")
        if not 0 <= self.liability_equity_pass_through <= 1:
            raise DomainError("liability_equity_pass_through must lie in [0, 1]")

    def value(self, *classes: str) -> float:
        return sum(h.market_value for h in self.holdings if h.asset_class in classes)

    @property
    def total_assets(self) -> float:
        return sum(h.market_value for h in self.holdings)

    def rate_sensitive(self) -> tuple[float, float]:
        """Value and value-weighted rate duration of the holdings that carry one."""
        rated = [h for h in self.holdings if h.rate_duration is not None and h.market_value > 0]
        value = sum(h.market_value for h in rated)
        if value == 0:
            return 0.0, 0.0
        return value, sum(h.market_value * h.rate_duration for h in rated) / value


@dataclass
class StressResult:
    equity: float
    interest_rate: float
    property: float
    credit: float
    persistency: float
    rcm: float
    peak1: float
    peak2: float
    wpicc: float
    capital_resources: float
    tier_violations: list[str]
    resilience_capital: float = 0.0
    lticr: float = 0.0
    capital_requirement: float = 0.0
    equity_fall: float = 0.0
    property_fall: float = 0.0
    rate_shift_pp: float = 0.0
    rate_direction: str = "none"

    @property
    def scenario_losses(self) -> dict[str, float]:
        return {
            "equity": self.equity,
            "interest_rate": self.interest_rate,
            "property": self.property,
            "credit": self.credit,
            "persistency": self.persistency,
        }


def equity_stress(current_index: float, avg_90d: float, earnings_yield: float, gilt_yield: float) -> float:
    """Required fall in UK equity values, as a fraction."""
    if current_index <= 0 or avg_90d <= 0:
        raise DomainError("index levels must be positive")
    if earnings_yield <= 0 or gilt_yield <= 0:
        raise DomainError("earnings yield and gilt yield must be positive")
    yield_fall = max(0.0, 1.0 - earnings_yield / (EARNINGS_YIELD_MULTIPLE * gilt_yield))
    recent_drop = max(0.0, (avg_90d - current_index) / avg_90d)
    capped = EQUITY_CAP - recent_drop
    return max(EQUITY_FLOOR, min(yield_fall, capped))


def interest_rate_stress(
    gilt_yield: float, asset_rate_duration: float, liability_rate_duration: float, assets: float, liabilities: float
) -> dict:
    """Net loss from the more onerous of a parallel rise or fall in yields.

    The shift is 20% of the gilt yield. ``shift`` is reported in percentage
    points; ``direction`` says which move was the more onerous.
    """
    if gilt_yield <= 0:
        raise DomainError("gilt yield must be positive")
    # work in percentage points first so 20% of 4.5% is exactly 0.9
    shift_pp = INTEREST_SHIFT_FRACTION * (gilt_yield * 100)
    shift = shift_pp / 100
    asset_move = assets * asset_rate_duration * shift
    liability_move = liabilities * liability_rate_duration * shift
    rise_loss = asset_move - liability_move
    fall_loss = liability_move - asset_move
    if rise_loss > fall_loss:
        direction, loss = "rise", rise_loss
    elif fall_loss > rise_loss:
        direction, loss = "fall", fall_loss
    else:
        direction, loss = "none", 0.0
    return {"shift": shift_pp, "net_loss": max(0.0, loss), "direction": direction}


def property_stress(current_index: float, avg_3y: float) -> float:
    if current_index <= 0 or avg_3y <= 0:
        raise DomainError("index levels must be positive")
    return min(PROPERTY_MAX, max(PROPERTY_MIN, PROPERTY_MIN * current_index / avg_3y))


def max_spread(grade: str) -> float | None:
    """Stressed spread ceiling in bp, or None for the flat-charge grade."""
    if grade in IG_MAX_SPREAD:
        return float(IG_MAX_SPREAD[grade])
    if grade in SUB_IG_MAX_SPREAD:
        return SUB_IG_MAX_SPREAD[grade]
    if grade == LOWEST_GRADE:
        return None
    raise DataError(f"unknown credit grade {grade!r}")


def credit_stress(holding: AssetHolding) -> float:
    if holding.in_default_provisioned:
        return 0.0
    if holding.asset_class == "reinsurance_asset" and holding.intra_group_designated:
        return 0.0
    if holding.grade is None:
        return FLAT_CREDIT_CHARGE * holding.market_value
    ceiling = max_spread(holding.grade)
    if ceiling is None:
        return FLAT_CREDIT_CHARGE * holding.market_value
    if holding.current_spread is None or holding.spread_duration is None:
        raise DataError(f"rated {holding.asset_class} needs current_spread and spread_duration")
    widening = max(0.0, ceiling - holding.current_spread) / 10_000
    return max(0.0, holding.spread_duration * widening * holding.market_value)


def persistency_stress(termination_rates, surrender_strain) -> float:
    """Loss from termination rates falling to half their assumed level.

    ``surrender_strain`` is the loss per unit of termination rate avoided in
    each projection year, either a scalar or one value per year.
    """
    rates = np.asarray(termination_rates, dtype=float)
    if rates.size == 0:
        return 0.0
    if np.any((rates < 0) | (rates > 1)):
        raise DomainError("termination rates must lie in [0, 1]")
    strain = np.broadcast_to(np.asarray(surrender_strain, dtype=float), rates.shape)
    avoided = rates - stressed_termination_rates(rates)
    return max(0.0, float(np.sum(avoided * strain)))


def stressed_termination_rates(termination_rates) -> np.ndarray:
    return PERSISTENCY_FACTOR * np.asarray(termination_rates, dtype=float)


def risk_capital_margin(balance_sheet: InsurerBalanceSheet, scenario_losses) -> float:
    losses = scenario_losses.values() if isinstance(scenario_losses, dict) else scenario_losses
    return max(float(sum(losses)), RCM_FLOOR * balance_sheet.realistic_liabilities)


def twin_peaks(balance_sheet: InsurerBalanceSheet, rcm: float, lticr_rate: float | None = None, resilience: float = 0.0) -> dict:
    rate = balance_sheet.lticr_rate if lticr_rate is None else lticr_rate
    lticr = rate * max(0.0, balance_sheet.mathematical_reserves - resilience)
    peak1 = balance_sheet.mathematical_reserves + lticr
    peak2 = balance_sheet.realistic_liabilities + rcm
    return {"peak1": peak1, "peak2": peak2, "wpicc": max(0.0, peak2 - peak1), "lticr": lticr}


def capital_resources(components: CapitalComponents) -> dict:
    """Capital resources by the traditional and the components route.

    The traditional route takes eligible assets less foreseeable liabilities;
    the components route adds up the capital instruments and deducts
    intangible and inadmissible assets. When ``total_assets`` is not given it
    is implied by the balance-sheet identity.
    """
    c = components
    instruments = (
        c.ordinary_shares + c.reserves + c.perpetual_subordinated_debt + c.innovative_tier1 + c.upper_tier2 + c.lower_tier2
    )
    by_components = instruments - c.intangible_assets - c.inadmissible_assets
    total_assets = c.borrowing + instruments if c.total_assets is None else c.total_assets
    traditional = total_assets - c.intangible_assets - c.inadmissible_assets - c.borrowing
    if not np.isclose(traditional, by_components, rtol=1e-12, atol=1e-9):
        raise ConsistencyError(
            f"capital resources disagree: traditional {traditional} vs components {by_components}; "
            "total assets do not equal borrowing plus capital instruments"
        )
    return {"value": by_components, "traditional": traditional, "tier_violations": tier_violations(c, by_components)}


def tier_violations(c: CapitalComponents, total_resources: float) -> list[str]:
    out = []
    if c.tier1 > 0 and c.core_tier1 < 0.5 * c.tier1:
        out.append(f"core tier 1 {c.core_tier1:g} < 50% of total tier 1 {c.tier1:g}")
    if c.innovative_tier1 > 0.15 * c.tier1:
        out.append(f"innovative tier 1 {c.innovative_tier1:g} > 15% of total tier 1 {c.tier1:g}")
    if c.tier2 > c.tier1:
        out.append(f"tier 2 {c.tier2:g} > 100% of total tier 1 {c.tier1:g}")
    if c.lower_tier2 > 0.25 * total_resources:
        out.append(f"lower tier 2 {c.lower_tier2:g} > 25% of capital resources {total_resources:g}")
    return out


def resilience_capital(balance_sheet: InsurerBalanceSheet, equity_fall: float, property_fall: float, shift: float) -> float:
    """Extra capital when stressed assets fall further than mathematical reserves.

    Uses the equity, property and interest-rate stresses together; the rate
    move is taken in whichever direction hurts the reserves' cover most.
    ``shift`` is a decimal yield change.
    """
    bs = balance_sheet
    market_fall = equity_fall * bs.value("uk_equity", "overseas_equity") + property_fall * bs.value("property")
    rate_value, rate_duration = bs.rate_sensitive()
    asset_rate = rate_value * rate_duration * shift
    reserve_rate = bs.mathematical_reserves * bs.liability_rate_duration * shift
    reserve_equity = bs.liability_equity_pass_through * equity_fall * bs.value("uk_equity", "overseas_equity")
    rise = market_fall + asset_rate - (reserve_rate + reserve_equity)
    fall = market_fall - asset_rate - (-reserve_rate + reserve_equity)
    return max(0.0, rise, fall)


def run_stress(balance_sheet: InsurerBalanceSheet) -> StressResult:
    """All five scenarios, the margin, both peaks and capital resources."""
    bs, m = balance_sheet, balance_sheet.market
    equity_value = bs.value("uk_equity", "overseas_equity")
    eq_fall = equity_stress(m.equity_index, m.equity_index_avg_90d, m.earnings_yield, m.gilt_yield)
    equity_loss = max(0.0, eq_fall * equity_value * (1 - bs.liability_equity_pass_through))

    rate_value, rate_duration = bs.rate_sensitive()
    rates = interest_rate_stress(m.gilt_yield, rate_duration, bs.liability_rate_duration, rate_value, bs.realistic_liabilities)

    prop_fall = property_stress(m.property_index, m.property_index_avg_3y)
    property_loss = prop_fall * bs.value("property")

    credit_loss = sum(credit_stress(h) for h in bs.holdings if h.asset_class in CREDIT_CLASSES)
    persistency_loss = persistency_stress(bs.termination_rates, bs.surrender_strain)

    losses = {
        "equity": equity_loss,
        "interest_rate": rates["net_loss"],
        "property": property_loss,
        "credit": credit_loss,
        "persistency": persistency_loss,
    }
    rcm = risk_capital_margin(bs, losses)
    resilience = resilience_capital(bs, eq_fall, prop_fall, rates["shift"] / 100)
    peaks = twin_peaks(bs, rcm, resilience=resilience)
    requirement = max(peaks["lticr"] + resilience, SOLVENCY1_MINIMUM_EUR * bs.eur_fx)
    resources = capital_resources(bs.capital)
    return StressResult(
        **losses,
        rcm=rcm,
        peak1=peaks["peak1"],
        peak2=peaks["peak2"],
        wpicc=peaks["wpicc"],
        capital_resources=resources["value"],
        tier_violations=resources["tier_violations"],
        resilience_capital=resilience,
        lticr=peaks["lticr"],
        capital_requirement=requirement,
        equity_fall=eq_fall,
        property_fall=prop_fall,
        rate_shift_pp=rates["shift"],
        rate_direction=rates["direction"],
    )
