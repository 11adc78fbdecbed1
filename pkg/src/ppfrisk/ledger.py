"""The guarantee fund's own balance sheet."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, PreconditionError
from .market import MarketPath
from .scheme import Scheme, bond_return, ppf_liability

DEFAULT_ALLOCATION = {
    "cash": 0.20,
    "global_bonds": 0.50,
    "uk_equities": 0.125,
    "global_equities": 0.075,
    "property": 0.075,
    "currency_overlay": 0.025,
}
GLOBAL_BOND_DURATION = 7.0
RECOVERY_MODES = ("net_worth_30", "deficit_fraction")
NET_WORTH_CLAIM = 0.30


@dataclass(frozen=True)
class FundInvestmentPolicy:
    allocation: dict = field(default_factory=lambda: dict(DEFAULT_ALLOCATION))
    risk_budget: float = 0.04
    expected_alpha: float = 0.014
    tracking_error: float = 0.04
    active_alpha: float = 0.0035
    active_share_cap: float = 0.25
    swap_overlay: bool = True
    liability_duration: float = 15.0
    payout_rate: float | None = None
    insolvency_threshold: float = 0.0

    def __post_init__(self):
        unknown = set(self.allocation) - set(DEFAULT_ALLOCATION)
        if unknown:
            raise ConfigError("fund.allocation", f"unknown asset classes {sorted(unknown)}")
        if any(w < 0 for w in self.allocation.values()):
            raise ConfigError("fund.allocation", "weights must be >= 0")
        if abs(sum(self.allocation.values()) - 1.0) > 1e-9:
            raise ConfigError("fund.allocation", "weights must sum to 1")
        if self.risk_budget < 0:
            raise ConfigError("fund.risk_budget", "must be >= 0")
        if self.tracking_error < 0:
            raise ConfigError("fund.tracking_error", "must be >= 0")
        if self.liability_duration <= 0:
            raise ConfigError("fund.liability_duration", "must be > 0")
        if self.payout_rate is not None and not 0 <= self.payout_rate <= 1:
            raise ConfigError("fund.payout_rate", "must lie in [0, 1]")
        if self.insolvency_threshold < 0:
            raise ConfigError("fund.insolvency_threshold", "must be >= 0")

    @property
    def compensation_payout_rate(self) -> float:
        """Share of assumed liabilities paid out as compensation each year."""
        return 1.0 / self.liability_duration if self.payout_rate is None else self.payout_rate

    def budget_violations(self) -> list[str]:
        """Breaches of the tracking-error budget and the active-return cap."""
        out = []
        if self.tracking_error > self.risk_budget + 1e-12:
            out.append(f"tracking error {self.tracking_error:.4f} exceeds risk budget {self.risk_budget:.4f}")
        if self.active_alpha > self.active_share_cap * self.expected_alpha + 1e-12:
            out.append(
                f"active alpha {self.active_alpha:.4f} exceeds {self.active_share_cap:.0%} "
                f"of expected outperformance {self.expected_alpha:.4f}"
            )
        return out


@dataclass(frozen=True)
class ClaimEvent:
    year: int
    scheme_id: str
    ppf_liability_at_entry: float
    scheme_assets_taken: float
    recovery: float
    net_claim: float


@dataclass(frozen=True)
class FundLedger:
    year: int = 0
    assets: float = 0.0
    assumed_liabilities: float = 0.0
    levy_income_cum: float = 0.0
    claims_cum: float = 0.0
    insolvent: bool = False
    # last-step flows, kept for the conservation check and the ledger export
    levies: float = 0.0
    claims: float = 0.0
    outgo: float = 0.0
    acquired: float = 0.0
    asset_return: float = 0.0
    liability_return: float = 0.0

    @property
    def net_position(self) -> float:
        return self.assets - self.assumed_liabilities


def recovery_amount(deficit: float, net_worth: float, recovery_mode: str, recovery_param: float | None = None) -> float:
    if deficit <= 0:
        return 0.0
    if recovery_mode == "net_worth_30":
        share = NET_WORTH_CLAIM if recovery_param is None else recovery_param
        return min(share * net_worth, deficit)
    if recovery_mode == "deficit_fraction":
        if recovery_param is None:
            return 0.0
        if not 0 <= recovery_param <= 1:
            raise ConfigError("recovery_param", "deficit_fraction needs a value in [0, 1]")
        return recovery_param * deficit
    raise ConfigError("recovery_mode", f"must be one of {', '.join(RECOVERY_MODES)}")


def settle_claim(
    scheme: Scheme,
    recovery_mode: str = "deficit_fraction",
    recovery_param: float | None = None,
    year: int = 0,
    liability: float | None = None,
) -> ClaimEvent:
    """Take a scheme of an insolvent sponsor into the fund.

    ``recovery_param`` of None uses the mode's default: a claim on 30% of
    sponsor net worth, or no recovery of the deficit.

    ``liability`` overrides the compensation-level liability (for example to
    guarantee 100% of benefits).
    """
    owed = ppf_liability(scheme) if liability is None else liability
    if scheme.assets >= owed:
        raise PreconditionError(f"scheme {scheme.id} can buy out its benefits and does not enter the fund")
    deficit = owed - scheme.assets
    recovery = recovery_amount(deficit, scheme.sponsor.net_worth, recovery_mode, recovery_param)
    return ClaimEvent(
        year=year,
        scheme_id=scheme.id,
        ppf_liability_at_entry=owed,
        scheme_assets_taken=scheme.assets,
        recovery=recovery,
        net_claim=max(0.0, deficit - recovery),
    )


def liability_benchmark_return(path: MarketPath, year: int, duration: float) -> float:
    return bond_return(path.yield_before(year), float(path.gilt_yield[year]), duration)


def allocation_return(policy: FundInvestmentPolicy, path: MarketPath, year: int) -> float:
    y0 = path.yield_before(year)
    returns = {
        "cash": y0,
        "global_bonds": bond_return(y0, float(path.gilt_yield[year]), GLOBAL_BOND_DURATION),
        "uk_equities": float(path.equity_total_return[year]),
        "global_equities": float(path.equity_total_return[year]),
        "property": float(path.property_return[year]),
        "currency_overlay": y0,
    }
    return math.fsum(w * returns[k] for k, w in policy.allocation.items())


def fund_step_year(
    ledger: FundLedger,
    levies: float,
    claims: list[ClaimEvent],
    policy: FundInvestmentPolicy,
    path: MarketPath,
    year: int,
    rng: np.random.Generator | None = None,
    alpha: float | None = None,
) -> FundLedger:
    """Advance the fund one year.

    Opening assets earn the year's return; levies, acquired scheme assets and
    recoveries come in and compensation goes out at the year end. Assumed
    liabilities roll with the liability benchmark, pay out compensation and
    grow by the liabilities of schemes taken on this year.

    With the swap overlay the asset return is the benchmark return plus a
    Gaussian alpha (mean ``expected_alpha``, sd ``tracking_error``), drawn
    from ``rng`` unless ``alpha`` is passed in.
    """
    liab_ret = liability_benchmark_return(path, year, policy.liability_duration)
    if policy.swap_overlay:
        if alpha is None:
            alpha = policy.expected_alpha
            if policy.tracking_error > 0:
                if rng is None:
                    raise ConfigError("rng", "a random generator is needed to draw alpha")
                alpha += policy.tracking_error * rng.standard_normal()
        asset_ret = liab_ret + alpha
    else:
        asset_ret = allocation_return(policy, path, year)

    outgo = policy.compensation_payout_rate * ledger.assumed_liabilities
    acquired = math.fsum(c.scheme_assets_taken + c.recovery for c in claims)
    taken_on = math.fsum(c.ppf_liability_at_entry for c in claims)
    net_claims = math.fsum(c.net_claim for c in claims)

    assets = ledger.assets * (1 + asset_ret) + levies - outgo + acquired
    liabilities = ledger.assumed_liabilities * (1 + liab_ret) - outgo + taken_on
    stepped = replace(
        ledger,
        year=ledger.year + 1,
        assets=assets,
        assumed_liabilities=liabilities,
        levy_income_cum=ledger.levy_income_cum + levies,
        claims_cum=ledger.claims_cum + net_claims,
        levies=levies,
        claims=net_claims,
        outgo=outgo,
        acquired=acquired,
        asset_return=asset_ret,
        liability_return=liab_ret,
    )
    return replace(stepped, insolvent=ledger.insolvent or fund_is_insolvent(stepped, policy.insolvency_threshold))


def fund_is_insolvent(ledger: FundLedger, threshold: float = 0.0) -> bool:
    """Assets short of assumed liabilities by more than ``threshold`` of them.

    Sticky: a ledger already flagged stays insolvent.
    """
    return ledger.insolvent or ledger.assets < ledger.assumed_liabilities * (1.0 - threshold)


def conservation_residual(before: FundLedger, after: FundLedger) -> float:
    """Relative error of the asset roll-forward identity for one step."""
    expected = before.assets * (1 + after.asset_return) + after.levies - after.outgo + after.acquired
    scale = max(abs(expected), abs(after.assets), 1.0)
    return abs(after.assets - expected) / scale
