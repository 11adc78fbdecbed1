"""Levy and premium schedules.

Covers the historical PBGC single-employer schedules, the UK scheme/risk
split, the actuarially fair expected-loss premium and the breakeven levy
rate implied by simulated claims.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError, UsageError
from .scheme import GRADES, Scheme, ppf_liability

# year -> (flat $ per participant, variable rate per $ of UVB, cap $ per participant or None)
PBGC_SCHEDULES: dict[int, tuple[float, float, float | None]] = {
    1974: (1.00, 0.0, None),
    1978: (2.60, 0.0, None),
    1986: (8.50, 0.0, None),
    1988: (16.00, 0.006, 34.0),
    1991: (19.00, 0.009, 53.0),
    # The phase-out announced in 1994 has no published schedule; the 1991 cap is kept.
    1994: (19.00, 0.009, 53.0),
    1996: (19.00, 0.009, None),
    2006: (30.00, 0.009, None),
}
PBGC_MULTIEMPLOYER_FLAT = 2.60

DEFAULT_GRADE_MULTIPLIERS = {"AAA": 0.5, "AA": 0.6, "A": 0.8, "BBB": 1.0, "BB": 1.5, "B": 2.0, "CCC": 3.0}
LEVY_KINDS = ("flat", "exposure", "risk_based", "ppf_split")


@dataclass(frozen=True)
class LevySchedule:
    """Parameters of one levy schedule.

    ``flat_rate`` is charged per member; member counts are proxied as
    ``full_liability / liability_per_member``. ``variable_rate`` applies per
    unit of underfunding (``exposure``, ``ppf_split``) or as a loading on the
    fair premium (``risk_based``).
    """

    kind: str = "flat"
    flat_rate: float = 0.0
    variable_rate: float = 0.0
    variable_cap: float | None = None
    risk_share_min: float = 0.80
    target_total: float | None = None
    liability_per_member: float = 50_000.0
    grade_multipliers: dict = field(default_factory=lambda: dict(DEFAULT_GRADE_MULTIPLIERS))
    overhead: float = 0.0

    def __post_init__(self):
        if self.kind not in LEVY_KINDS:
            raise ConfigError("levy.kind", f"must be one of {', '.join(LEVY_KINDS)}")
        for name in ("flat_rate", "variable_rate", "overhead"):
            if getattr(self, name) < 0:
                raise ConfigError(f"levy.{name}", "must be >= 0")
        if self.variable_cap is not None and self.variable_cap < 0:
            raise ConfigError("levy.variable_cap", "must be >= 0 or null")
        if not 0 <= self.risk_share_min <= 1:
            raise ConfigError("levy.risk_share_min", "must lie in [0, 1]")
        if self.target_total is not None and self.target_total < 0:
            raise ConfigError("levy.target_total", "must be >= 0 or null")
        if self.liability_per_member <= 0:
            raise ConfigError("levy.liability_per_member", "must be > 0")
        missing = set(GRADES) - set(self.grade_multipliers)
        if missing:
            raise ConfigError("levy.grade_multipliers", f"missing grades {sorted(missing)}")
        if any(v < 0 for v in self.grade_multipliers.values()):
            raise ConfigError("levy.grade_multipliers", "multipliers must be >= 0")

    def members(self, full_liability):
        return np.asarray(full_liability, dtype=float) / self.liability_per_member


def pbgc_premium(participants: float, unfunded_vested: float, schedule_year: int) -> float:
    """Single-employer PBGC premium for one plan under a given year's rules."""
    if schedule_year not in PBGC_SCHEDULES:
        raise ConfigError("schedule_year", f"must be one of {sorted(PBGC_SCHEDULES)}")
    if participants < 0 or unfunded_vested < 0:
        raise DomainError("participants and unfunded vested benefits must be >= 0")
    flat, rate, cap = PBGC_SCHEDULES[schedule_year]
    variable = rate * unfunded_vested
    if cap is not None:
        variable = min(variable, cap * participants)
    return flat * participants + variable


def fair_premium(pd, lgd):
    """Expected loss: probability of default times loss given default."""
    pd_arr, lgd_arr = np.asarray(pd, dtype=float), np.asarray(lgd, dtype=float)
    if np.any((pd_arr < 0) | (pd_arr > 1)):
        raise DomainError("pd must lie in [0, 1]")
    if np.any(lgd_arr < 0):
        raise DomainError("lgd must be >= 0")
    out = pd_arr * lgd_arr
    return float(out) if out.ndim == 0 else out


def ppf_underfunding(scheme: Scheme) -> float:
    return max(0.0, ppf_liability(scheme) - scheme.assets)


def ppf_levy(scheme: Scheme, schedule: LevySchedule) -> dict[str, float]:
    """Scheme-factor and risk-factor elements for one scheme, before any
    population-level rescaling."""
    if schedule.kind != "ppf_split":
        raise UsageError(f"ppf_levy needs a ppf_split schedule, got {schedule.kind!r}")
    scheme_factor = schedule.flat_rate * float(schedule.members(scheme.full_liability))
    multiplier = schedule.grade_multipliers[scheme.sponsor.grade]
    risk_factor = schedule.variable_rate * ppf_underfunding(scheme) * multiplier
    return {"scheme_factor": scheme_factor, "risk_factor": risk_factor, "total": scheme_factor + risk_factor}


def _enforce_split(scheme_parts: np.ndarray, risk_parts: np.ndarray, schedule: LevySchedule):
    share = schedule.risk_share_min
    s, r = float(scheme_parts.sum()), float(risk_parts.sum())
    if r == 0 or share == 1:
        if share > 0:
            scheme_parts = scheme_parts * 0.0
    elif r < share * (s + r):
        # normalise first so a tiny risk total cannot overflow the scale factor
        risk_parts = (risk_parts / r) * (share * s / (1 - share))
    total = float(scheme_parts.sum() + risk_parts.sum())
    if schedule.target_total is not None and total > 0:
        k = schedule.target_total / total
        scheme_parts, risk_parts = scheme_parts * k, risk_parts * k
    return scheme_parts, risk_parts


def ppf_levy_population(schemes: Sequence[Scheme], schedule: LevySchedule) -> list[dict[str, float]]:
    """Levy across a population with the aggregate risk share enforced.

    If the risk-factor element falls short of ``risk_share_min`` of the total,
    the variable rate is scaled up until the share is met exactly. When no
    scheme is underfunded the risk element cannot carry any charge, so the
    scheme factors are dropped to zero instead. ``target_total`` then scales
    every charge proportionally.
    """
    rows = [ppf_levy(s, schedule) for s in schemes]
    sf, rf = _enforce_split(
        np.array([r["scheme_factor"] for r in rows]), np.array([r["risk_factor"] for r in rows]), schedule
    )
    return [{"scheme_factor": float(a), "risk_factor": float(b), "total": float(a + b)} for a, b in zip(sf, rf)]


def scheme_levy(scheme: Scheme, schedule: LevySchedule, pd: float | None = None) -> float:
    """Charge for one scheme under any schedule kind (no population rescaling)."""
    members = float(schedule.members(scheme.full_liability))
    if schedule.kind == "flat":
        return schedule.flat_rate * members
    if schedule.kind == "exposure":
        variable = schedule.variable_rate * ppf_underfunding(scheme)
        if schedule.variable_cap is not None:
            variable = min(variable, schedule.variable_cap * members)
        return schedule.flat_rate * members + variable
    if schedule.kind == "risk_based":
        p = scheme.sponsor.base_pd if pd is None else pd
        return schedule.flat_rate * members + (1 + schedule.variable_rate) * fair_premium(p, ppf_underfunding(scheme))
    return ppf_levy(scheme, schedule)["total"]


def levy_vector(schedule: LevySchedule, full_liability, ppf_liab, assets, base_pd, grade_mult):
    """Vectorised per-scheme levies used inside the population simulation."""
    members = schedule.members(full_liability)
    under = np.maximum(0.0, ppf_liab - assets)
    flat = schedule.flat_rate * members
    if schedule.kind == "flat":
        return flat
    if schedule.kind == "exposure":
        variable = schedule.variable_rate * under
        if schedule.variable_cap is not None:
            variable = np.minimum(variable, schedule.variable_cap * members)
        return flat + variable
    if schedule.kind == "risk_based":
        return flat + (1 + schedule.variable_rate) * base_pd * under
    scheme_part, risk_part = _enforce_split(flat, schedule.variable_rate * under * grade_mult, schedule)
    return scheme_part + risk_part


def breakeven_levy_rate(claims, liability_base) -> float:
    """Levy rate on liabilities that makes expected levy income equal claims.

    Both inputs are arrays of matching shape (paths by years, or any shape);
    the rate is the ratio of the totals.
    """
    claims = np.asarray(claims, dtype=float)
    base = np.asarray(liability_base, dtype=float)
    if claims.size == 0 or base.size == 0:
        raise DomainError("claim and liability series must be non-empty")
    if claims.shape != base.shape:
        raise DomainError(f"shape mismatch: claims {claims.shape} vs liabilities {base.shape}")
    total_base = base.sum()
    if total_base <= 0:
        raise DomainError("liability base must be positive")
    return float(claims.sum() / total_base)
