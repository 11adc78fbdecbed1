"""Population simulation of sponsor insolvencies, claims and the fund.

Each path owns its market scenario, default draws and fund ledger; the
scheme population at time zero is shared by all paths. Within a path the
years run in order: markets move, schemes roll forward, sponsors default,
claims settle, levies are charged and the fund steps forward.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, ConsistencyError
from .ledger import ClaimEvent, FundInvestmentPolicy, FundLedger, RECOVERY_MODES, fund_step_year
from .levy import LevySchedule, breakeven_levy_rate, levy_vector
from .market import (
    STREAM_DEFAULTS,
    STREAM_EXITS,
    STREAM_FUND,
    STREAM_POPULATION,
    MarketConfig,
    rng_for,
    simulate_path,
)
from .pricing import PutInputs, guarantee_expected_loss
from .scheme import GRADES, INVESTMENT_GRADES, LPI_IN_PAYMENT, MembershipMix, Scheme, Sponsor

DEFAULT_GRADE_PD = {"AAA": 0.0002, "AA": 0.0006, "A": 0.0012, "BBB": 0.0036, "BB": 0.015, "B": 0.05, "CCC": 0.15}
DEFAULT_GRADE_WEIGHTS = {"AAA": 0.03, "AA": 0.10, "A": 0.25, "BBB": 0.30, "BB": 0.17, "B": 0.11, "CCC": 0.04}

MORAL_HAZARD_RULES = ("off", "weak_sponsors_raise_equity")
ADVERSE_SELECTION_RULES = ("off", "exit_hazard")
GUARANTEE_BASES = ("ppf", "full")
CLAIM_VALUATIONS = ("opening", "closing")


@dataclass(frozen=True)
class SchemeRecord:
    """One explicitly listed scheme in a population file."""

    id: str
    grade: str
    full_liability: float
    assets: float
    base_pd: float | None = None
    net_worth: float = 0.0
    equity_share: float = 2 / 3
    liability_duration: float = 15.0
    amortisation_years: int = 10
    mix: MembershipMix = field(default_factory=MembershipMix)
    default_year: int | None = None

    def __post_init__(self):
        if self.grade not in GRADES:
            raise ConfigError("schemes.grade", f"must be one of {', '.join(GRADES)}")
        if self.full_liability <= 0:
            raise ConfigError("schemes.full_liability", "must be > 0")
        if self.assets < 0:
            raise ConfigError("schemes.assets", "must be >= 0")
        if not 0 <= self.equity_share <= 1:
            raise ConfigError("schemes.equity_share", "must lie in [0, 1]")
        if self.base_pd is not None and not 0 <= self.base_pd < 1:
            raise ConfigError("schemes.base_pd", "must lie in [0, 1)")
        if self.amortisation_years < 1:
            raise ConfigError("schemes.amortisation_years", "must be >= 1")
        if self.default_year is not None and self.default_year < 0:
            raise ConfigError("schemes.default_year", "must be >= 0")


@dataclass(frozen=True)
class PopulationSpec:
    count: int = 1000
    liability_median: float = 30e6
    liability_sigma: float = 1.0
    funding_mean: float = 0.80
    funding_sd: float = 0.15
    equity_share: float = 2 / 3
    amortisation_years: int = 10
    liability_duration: float = 15.0
    net_worth_ratio: float = 1.0
    grade_weights: dict = field(default_factory=lambda: dict(DEFAULT_GRADE_WEIGHTS))
    grade_pd: dict = field(default_factory=lambda: dict(DEFAULT_GRADE_PD))
    mix: MembershipMix = field(default_factory=MembershipMix)
    guarantee: str = "ppf"
    lpi_cap: float = LPI_IN_PAYMENT
    schemes: tuple[SchemeRecord, ...] | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("population.count", "must be >= 1")
        if self.liability_median <= 0:
            raise ConfigError("population.liability_median", "must be > 0")
        if self.liability_sigma < 0 or self.funding_sd < 0:
            raise ConfigError("population.liability_sigma", "dispersion parameters must be >= 0")
        if self.funding_mean <= 0:
            raise ConfigError("population.funding_mean", "must be > 0")
        if not 0 <= self.equity_share <= 1:
            raise ConfigError("population.equity_share", "must lie in [0, 1]")
        if self.amortisation_years < 1:
            raise ConfigError("population.amortisation_years", "must be >= 1")
        if self.net_worth_ratio < 0:
            raise ConfigError("population.net_worth_ratio", "must be >= 0")
        for name in ("grade_weights", "grade_pd"):
            table = getattr(self, name)
            if set(table) != set(GRADES):
                raise ConfigError(f"population.{name}", f"needs exactly the grades {', '.join(GRADES)}")
        if any(w < 0 for w in self.grade_weights.values()) or sum(self.grade_weights.values()) <= 0:
            raise ConfigError("population.grade_weights", "weights must be >= 0 with a positive total")
        if any(not 0 <= p < 1 for p in self.grade_pd.values()):
            raise ConfigError("population.grade_pd", "probabilities must lie in [0, 1)")
        if self.guarantee not in GUARANTEE_BASES:
            raise ConfigError("population.guarantee", f"must be one of {', '.join(GUARANTEE_BASES)}")
        if self.schemes is not None:
            object.__setattr__(self, "schemes", tuple(self.schemes))
            if not self.schemes:
                raise ConfigError("population.schemes", "must list at least one scheme when given")


@dataclass(frozen=True)
class SimulationConfig:
    market: MarketConfig = field(default_factory=MarketConfig)
    population: PopulationSpec = field(default_factory=PopulationSpec)
    levy: LevySchedule = field(default_factory=LevySchedule)
    recovery_mode: str = "deficit_fraction"
    recovery_param: float | None = 0.0
    fund: FundInvestmentPolicy = field(default_factory=FundInvestmentPolicy)
    fund_initial_assets: float = 0.0
    horizon: int = 30
    n_paths: int = 1000
    seed: int = 20061101
    moral_hazard_rule: str = "off"
    moral_hazard_equity_share: float = 0.9
    adverse_selection_rule: str = "off"
    kappa: float = 0.0
    early_warning_liability: float = 25e6
    early_warning_underfunding: float = 5e6
    claim_valuation: str = "opening"
    record_claims: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon", "must be >= 1")
        if self.n_paths < 1:
            raise ConfigError("n_paths", "must be >= 1")
        if self.recovery_mode not in RECOVERY_MODES:
            raise ConfigError("recovery_mode", f"must be one of {', '.join(RECOVERY_MODES)}")
        if self.recovery_mode == "deficit_fraction" and (self.recovery_param is None or not 0 <= self.recovery_param <= 1):
            raise ConfigError("recovery_param", "deficit_fraction recovery needs a value in [0, 1]")
        if self.recovery_mode == "net_worth_30" and self.recovery_param is not None and not 0 <= self.recovery_param <= 1:
            raise ConfigError("recovery_param", "net-worth share must lie in [0, 1]")
        if self.moral_hazard_rule not in MORAL_HAZARD_RULES:
            raise ConfigError("moral_hazard_rule", f"must be one of {', '.join(MORAL_HAZARD_RULES)}")
        if not 0 <= self.moral_hazard_equity_share <= 1:
            raise ConfigError("moral_hazard_equity_share", "must lie in [0, 1]")
        if self.adverse_selection_rule not in ADVERSE_SELECTION_RULES:
            raise ConfigError("adverse_selection_rule", f"must be one of {', '.join(ADVERSE_SELECTION_RULES)}")
        if self.kappa < 0:
            raise ConfigError("kappa", "must be >= 0")
        if self.fund_initial_assets < 0:
            raise ConfigError("fund_initial_assets", "must be >= 0")
        if self.claim_valuation not in CLAIM_VALUATIONS:
            raise ConfigError("claim_valuation", f"must be one of {', '.join(CLAIM_VALUATIONS)}")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")


@dataclass
class Population:
    """Column-wise scheme population used by the vectorised engine."""

    ids: list[str]
    grades: list[str]
    liability: np.ndarray
    assets: np.ndarray
    base_pd: np.ndarray
    net_worth: np.ndarray
    equity_share: np.ndarray
    duration: np.ndarray
    amortisation: np.ndarray
    haircut: np.ndarray
    default_year: np.ndarray  # -1 when not forced

    def __len__(self):
        return len(self.ids)

    @property
    def investment_grade(self) -> np.ndarray:
        return np.array([g in INVESTMENT_GRADES for g in self.grades])

    def grade_multipliers(self, table: dict) -> np.ndarray:
        return np.array([table[g] for g in self.grades], dtype=float)

    def scheme(self, i: int) -> Scheme:
        """Row ``i`` as a :class:`Scheme` (base_pd of 0 is nudged into range)."""
        pd = min(max(float(self.base_pd[i]), 1e-12), 1 - 1e-12)
        mix_pens = (float(self.haircut[i]) - 0.9) / 0.1
        mix = MembershipMix(mix_pens, 1 - mix_pens, 0.0)
        return Scheme(
            id=self.ids[i],
            sponsor=Sponsor(id=f"{self.ids[i]}-sponsor", grade=self.grades[i], base_pd=pd, net_worth=float(self.net_worth[i])),
            full_liability=float(self.liability[i]),
            assets=float(self.assets[i]),
            equity_share=float(self.equity_share[i]),
            liability_duration=float(self.duration[i]),
            mix=mix,
            amortisation_years=int(self.amortisation[i]),
        )


def build_population(config: SimulationConfig) -> Population:
    """Draw (or load) the time-zero population. Depends only on ``config.seed``."""
    spec = config.population
    if spec.schemes is not None:
        recs = spec.schemes
        pop = Population(
            ids=[r.id for r in recs],
            grades=[r.grade for r in recs],
            liability=np.array([r.full_liability for r in recs], dtype=float),
            assets=np.array([r.assets for r in recs], dtype=float),
            base_pd=np.array([spec.grade_pd[r.grade] if r.base_pd is None else r.base_pd for r in recs], dtype=float),
            net_worth=np.array([r.net_worth for r in recs], dtype=float),
            equity_share=np.array([r.equity_share for r in recs], dtype=float),
            duration=np.array([r.liability_duration for r in recs], dtype=float),
            amortisation=np.array([r.amortisation_years for r in recs], dtype=float),
            haircut=np.array([r.mix.haircut for r in recs], dtype=float),
            default_year=np.array([-1 if r.default_year is None else r.default_year for r in recs], dtype=int),
        )
    else:
        rng = rng_for(config.seed, 0, STREAM_POPULATION)
        n = spec.count
        weights = np.array([spec.grade_weights[g] for g in GRADES], dtype=float)
        grade_idx = rng.choice(len(GRADES), size=n, p=weights / weights.sum())
        liability = spec.liability_median * np.exp(spec.liability_sigma * rng.standard_normal(n))
        funding = np.clip(spec.funding_mean + spec.funding_sd * rng.standard_normal(n), 0.05, None)
        grades = [GRADES[k] for k in grade_idx]
        pop = Population(
            ids=[f"S{i:05d}" for i in range(n)],
            grades=grades,
            liability=liability,
            assets=funding * liability,
            base_pd=np.array([spec.grade_pd[g] for g in grades], dtype=float),
            net_worth=spec.net_worth_ratio * liability,
            equity_share=np.full(n, spec.equity_share),
            duration=np.full(n, spec.liability_duration),
            amortisation=np.full(n, float(spec.amortisation_years)),
            haircut=np.full(n, spec.mix.haircut),
            default_year=np.full(n, -1, dtype=int),
        )
    if config.moral_hazard_rule == "weak_sponsors_raise_equity":
        weak = ~pop.investment_grade
        pop.equity_share = np.where(weak, np.maximum(pop.equity_share, config.moral_hazard_equity_share), pop.equity_share)
    if spec.guarantee == "full":
        pop.haircut = np.ones(len(pop))
    return pop


def early_warning_flags(pop: Population, liability_threshold: float = 25e6, underfunding_threshold: float = 5e6) -> np.ndarray:
    """Schemes meeting either monitoring trigger.

    A sub-investment-grade sponsor with liabilities over the threshold, or
    any sponsor whose scheme has liabilities over the threshold and
    underfunding over the second threshold.
    """
    large = pop.liability > liability_threshold
    underfunded = (pop.liability - pop.assets) > underfunding_threshold
    return (large & ~pop.investment_grade) | (large & underfunded)


def _default_probs(base_pd: np.ndarray, drawdown: float, beta: float) -> np.ndarray:
    out = np.zeros_like(base_pd)
    live = base_pd > 0
    logit = np.log(base_pd[live]) - np.log1p(-base_pd[live]) + beta * drawdown
    out[live] = 1.0 / (1.0 + np.exp(-logit))
    return out


def exit_probability(levy_rate: float, kappa: float) -> float:
    """Chance a strong scheme leaves in a year: ``2 * logistic(kappa * rate) - 1``."""
    return math.tanh(0.5 * kappa * levy_rate)


def step_population(pop_liability, pop_assets, equity_share, duration, amortisation, y0, y1, equity_ret, inflation, lpi_cap, allowance):
    """Vectorised twin of :func:`ppfrisk.scheme.scheme_step_year`."""
    bonds = y0 - duration * (y1 - y0)
    asset_ret = equity_share * equity_ret + (1 - equity_share) * bonds
    contribution = np.maximum(pop_liability - pop_assets, 0.0) / amortisation
    indexation = (1 + min(max(inflation, 0.0), lpi_cap)) / (1 + min(max(allowance, 0.0), lpi_cap))
    assets = np.maximum(0.0, pop_assets * (1 + asset_ret) + contribution)
    liability = pop_liability * (1 + bonds) * indexation
    return liability, assets


@dataclass
class PathResult:
    path: int
    claims: np.ndarray
    liability_base: np.ndarray
    equity_return: np.ndarray
    levies: np.ndarray
    ledger: list[FundLedger]
    claim_records: list[tuple[int, int, str, float]]
    pool_mean_pd: np.ndarray
    pool_count: np.ndarray
    max_conservation_residual: float
    insolvent: bool


def simulate_one_path(config: SimulationConfig, pop: Population, path_index: int) -> PathResult:
    horizon = config.horizon
    market = simulate_path(config.market, config.seed, path_index, horizon)
    default_rng = rng_for(config.seed, path_index, STREAM_DEFAULTS)
    fund_rng = rng_for(config.seed, path_index, STREAM_FUND)
    exit_rng = rng_for(config.seed, path_index, STREAM_EXITS)
    beta = config.market.equity_default_beta
    spec = config.population
    levy = config.levy

    liability = pop.liability.copy()
    assets = pop.assets.copy()
    active = np.ones(len(pop), dtype=bool)
    grade_mult = pop.grade_multipliers(levy.grade_multipliers)

    claims = np.zeros(horizon)
    base = np.zeros(horizon)
    levies_out = np.zeros(horizon)
    pool_pd = np.zeros(horizon)
    pool_count = np.zeros(horizon, dtype=int)
    records: list[tuple[int, int, str, float]] = []
    ledger = FundLedger(assets=config.fund_initial_assets)
    history = [ledger]
    worst = 0.0

    for t in range(horizon):
        y0, y1 = market.yield_before(t), float(market.gilt_yield[t])
        opening_liability, opening_assets = liability, assets
        liability, assets = step_population(
            liability, assets, pop.equity_share, pop.duration, pop.amortisation,
            y0, y1, float(market.equity_total_return[t]), float(market.inflation[t]),
            spec.lpi_cap, config.market.inflation_mean,
        )  # fmt: skip
        if config.claim_valuation == "opening":
            entry_liability, entry_assets = opening_liability, opening_assets
        else:
            entry_liability, entry_assets = liability, assets
        idx = np.flatnonzero(active)
        base[t] = entry_liability[idx].sum()
        pool_count[t] = idx.size
        pool_pd[t] = pop.base_pd[idx].mean() if idx.size else float("nan")

        # one uniform per scheme per year keeps draws aligned across configs
        u = default_rng.random(len(pop))
        p = _default_probs(pop.base_pd, float(market.equity_drawdown[t]), beta)
        defaulted = active & ((u < p) | (pop.default_year == t))
        owed = pop.haircut * entry_liability
        entering = defaulted & (entry_assets < owed)
        year_claim = 0.0
        year_taken = year_assets = year_recovery = 0.0
        for i in np.flatnonzero(entering):
            deficit = owed[i] - entry_assets[i]
            if config.recovery_mode == "net_worth_30":
                share = 0.30 if config.recovery_param is None else config.recovery_param
                recovery = min(share * pop.net_worth[i], deficit)
            else:
                recovery = config.recovery_param * deficit
            net = max(0.0, deficit - recovery)
            year_claim += net
            year_taken += owed[i]
            year_assets += entry_assets[i]
            year_recovery += recovery
            if config.record_claims:
                records.append((path_index, t, pop.ids[i], net))
        claims[t] = year_claim
        active &= ~defaulted

        idx = np.flatnonzero(active)
        charged = levy_vector(levy, liability[idx], pop.haircut[idx] * liability[idx], assets[idx], pop.base_pd[idx], grade_mult[idx])
        levies_out[t] = float(charged.sum()) + (levy.overhead if idx.size else 0.0)

        if config.adverse_selection_rule == "exit_hazard" and config.kappa > 0 and idx.size:
            rate = levies_out[t] / liability[idx].sum()
            p_exit = exit_probability(rate, config.kappa)
            strong = active & (pop.base_pd < pop.base_pd[idx].mean())
            leaving = strong & (exit_rng.random(len(pop)) < p_exit)
            active &= ~leaving

        event = ClaimEvent(
            year=t, scheme_id="*", ppf_liability_at_entry=year_taken,
            scheme_assets_taken=year_assets, recovery=year_recovery, net_claim=year_claim,
        )  # fmt: skip
        before = ledger
        ledger = fund_step_year(ledger, levies_out[t], [event], config.fund, market, t, rng=fund_rng)
        expected = before.assets * (1 + ledger.asset_return) + ledger.levies - ledger.outgo + ledger.acquired
        worst = max(worst, abs(ledger.assets - expected) / max(abs(expected), abs(ledger.assets), 1.0))
        history.append(ledger)

    return PathResult(
        path=path_index,
        claims=claims,
        liability_base=base,
        equity_return=np.asarray(market.equity_total_return, dtype=float),
        levies=levies_out,
        ledger=history,
        claim_records=records,
        pool_mean_pd=pool_pd,
        pool_count=pool_count,
        max_conservation_residual=worst,
        insolvent=ledger.insolvent,
    )


def _run_chunk(args):
    config, pop, indices = args
    return [simulate_one_path(config, pop, i) for i in indices]


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2 or np.std(x) == 0 or np.std(y) == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def _nanmean_columns(grid: np.ndarray) -> np.ndarray:
    """Column means ignoring NaN; NaN where a column has no values (pool exhausted)."""
    ok = ~np.isnan(grid)
    counts = ok.sum(axis=0)
    sums = np.where(ok, grid, 0.0).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


@dataclass
class SimulationReport:
    claim_rate: np.ndarray  # paths x years
    claims: np.ndarray
    liability_base: np.ndarray
    equity_return: np.ndarray
    levies: np.ndarray
    fund_assets: np.ndarray  # paths x (years + 1)
    fund_liabilities: np.ndarray
    fund_insolvent: np.ndarray  # paths x (years + 1), bool
    claim_records: list[tuple[int, int, str, float]]
    pool_mean_pd: np.ndarray
    pool_count: np.ndarray
    early_warning: list[str]
    max_conservation_residual: float
    seed: int

    @classmethod
    def empty(cls, seed: int = 0) -> "SimulationReport":
        """A report with no paths, useful for exercising the writers."""
        grid = np.zeros((0, 0))
        return cls(
            claim_rate=grid, claims=grid, liability_base=grid, equity_return=grid, levies=grid,
            fund_assets=grid, fund_liabilities=grid, fund_insolvent=np.zeros((0, 0), dtype=bool),
            claim_records=[], pool_mean_pd=grid, pool_count=np.zeros((0, 0), dtype=int),
            early_warning=[], max_conservation_residual=0.0, seed=seed,
        )  # fmt: skip

    @property
    def n_paths(self) -> int:
        return self.claim_rate.shape[0]

    @property
    def horizon(self) -> int:
        return self.claim_rate.shape[1]

    @property
    def mean_claim_rate(self) -> float:
        return float(self.claim_rate.mean()) if self.claim_rate.size else 0.0

    @property
    def breakeven_levy_rate(self) -> float:
        if self.claims.size == 0 or self.liability_base.sum() <= 0:
            return 0.0
        return breakeven_levy_rate(self.claims, self.liability_base)

    @property
    def max_annual_claim_rate(self) -> np.ndarray:
        return self.claim_rate.max(axis=1)

    @property
    def insolvency_probability(self) -> float:
        if self.fund_insolvent.size == 0:
            return 0.0
        return float(self.fund_insolvent[:, -1].mean())

    @property
    def claims_equity_correlation(self) -> float:
        return _pearson(self.claims.ravel(), self.equity_return.ravel())

    @property
    def claim_rate_equity_correlation(self) -> float:
        return _pearson(self.claim_rate.ravel(), self.equity_return.ravel())

    def claim_rate_percentile(self, q: float) -> float:
        return float(np.percentile(self.claim_rate, q))

    def summary(self) -> dict:
        if self.claim_rate.size == 0:
            return {"n_paths": self.n_paths, "horizon": self.horizon, "seed": self.seed}
        max_rates = self.max_annual_claim_rate
        return {
            "n_paths": self.n_paths,
            "horizon": self.horizon,
            "seed": self.seed,
            "mean_claim_rate": self.mean_claim_rate,
            "breakeven_levy_rate": self.breakeven_levy_rate,
            "claim_rate_p50": self.claim_rate_percentile(50),
            "claim_rate_p95": self.claim_rate_percentile(95),
            "claim_rate_p99": self.claim_rate_percentile(99),
            "claim_rate_max": float(self.claim_rate.max()),
            "max_annual_claim_rate_median": float(np.median(max_rates)),
            "max_annual_claim_rate_p90": float(np.percentile(max_rates, 90)),
            "fund_insolvency_probability": self.insolvency_probability,
            "claims_equity_correlation": self.claims_equity_correlation,
            "claim_rate_equity_correlation": self.claim_rate_equity_correlation,
            "mean_annual_claims": float(self.claims.mean()),
            "mean_annual_levies": float(self.levies.mean()),
            "pool_mean_pd_by_year": [float(x) for x in _nanmean_columns(self.pool_mean_pd)],
            "pool_count_by_year": [float(x) for x in self.pool_count.mean(axis=0)],
            "early_warning_schemes": list(self.early_warning),
            "max_conservation_residual": self.max_conservation_residual,
        }


def run_simulation(config: SimulationConfig) -> SimulationReport:
    pop = build_population(config)
    indices = list(range(config.n_paths))
    if config.workers > 1 and config.n_paths > 1:
        chunks = [indices[k :: config.workers] for k in range(config.workers)]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = [r for part in pool.map(_run_chunk, [(config, pop, c) for c in chunks]) for r in part]
        results.sort(key=lambda r: r.path)
    else:
        results = [simulate_one_path(config, pop, i) for i in indices]

    claims = np.vstack([r.claims for r in results])
    base = np.vstack([r.liability_base for r in results])
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(base > 0, claims / np.where(base > 0, base, 1.0), 0.0)
    flags = early_warning_flags(pop, config.early_warning_liability, config.early_warning_underfunding)
    return SimulationReport(
        claim_rate=rate,
        claims=claims,
        liability_base=base,
        equity_return=np.vstack([r.equity_return for r in results]),
        levies=np.vstack([r.levies for r in results]),
        fund_assets=np.array([[l.assets for l in r.ledger] for r in results]),
        fund_liabilities=np.array([[l.assumed_liabilities for l in r.ledger] for r in results]),
        fund_insolvent=np.array([[l.insolvent for l in r.ledger] for r in results]),
        claim_records=[rec for r in results for rec in r.claim_records],
        pool_mean_pd=np.vstack([r.pool_mean_pd for r in results]),
        pool_count=np.vstack([r.pool_count for r in results]),
        early_warning=[pop.ids[i] for i in np.flatnonzero(flags)],
        max_conservation_residual=max(r.max_conservation_residual for r in results),
        seed=config.seed,
    )


def flat_levy_config(config: SimulationConfig, rate_on_liabilities: float) -> SimulationConfig:
    """Copy of ``config`` charging a flat levy equal to a rate on liabilities."""
    levy = replace(config.levy, kind="flat", flat_rate=rate_on_liabilities * config.levy.liability_per_member, overhead=0.0)
    return replace(config, levy=levy)


def calibrate_breakeven_premium(config: SimulationConfig, method: str = "ratio", upper: float = 0.05, xtol: float = 1e-7) -> float:
    """Levy rate on liabilities that pays for simulated claims.

    ``ratio`` runs once with no levy and returns total claims over total
    liabilities. ``terminal`` solves for the flat rate that brings the mean
    terminal net position of the fund to zero.
    """
    zero = flat_levy_config(config, 0.0)
    if method == "ratio":
        return run_simulation(zero).breakeven_levy_rate
    if method != "terminal":
        raise ConfigError("method", "must be 'ratio' or 'terminal'")

    def gap(rate: float) -> float:
        rep = run_simulation(flat_levy_config(config, rate))
        return float(np.mean(rep.fund_assets[:, -1] - rep.fund_liabilities[:, -1]))

    g0 = gap(0.0)
    if g0 >= 0:
        return 0.0
    return brentq(gap, 0.0, upper, xtol=xtol)


def moral_hazard_experiment(
    config: SimulationConfig,
    equity_shares=(0.0, 0.25, 0.5, 0.75, 1.0),
    funding_ratios=(0.7, 0.85, 1.0, 1.15, 1.3),
    simulate: bool = True,
) -> list[dict]:
    """Guarantee value and simulated claims across equity share and funding.

    Guarantee values come from the closed-form put on a unit liability with
    the population's average default probability. With ``simulate`` the
    population is rerun at each grid point with every scheme set to that
    equity share and funding ratio, reusing the same random streams.
    """
    spec = config.population
    weights = np.array([spec.grade_weights[g] for g in GRADES], dtype=float)
    mean_pd = float(np.dot(weights / weights.sum(), [spec.grade_pd[g] for g in GRADES]))
    rows = []
    for es in equity_shares:
        for fr in funding_ratios:
            put = PutInputs(
                assets=fr, strike_liability=1.0, asset_vol=es * config.market.equity_vol,
                risk_free_rate=config.market.gilt_yield_initial, horizon=1.0,
            )  # fmt: skip
            row = {"equity_share": es, "funding_ratio": fr, "pd": mean_pd, "guarantee_value": guarantee_expected_loss(put, mean_pd)}
            if simulate:
                cell = replace(
                    config,
                    population=replace(spec, equity_share=es, funding_mean=fr, funding_sd=0.0, schemes=None),
                    record_claims=False,
                )
                rep = run_simulation(cell)
                row["mean_claim_rate"] = rep.mean_claim_rate
                row["breakeven_levy_rate"] = rep.breakeven_levy_rate
            rows.append(row)
    _check_moral_hazard(rows, equity_shares, funding_ratios)
    return rows


def _check_moral_hazard(rows, equity_shares, funding_ratios):
    grid = {(r["equity_share"], r["funding_ratio"]): r["guarantee_value"] for r in rows}
    tol = 1e-15
    for fr in funding_ratios:
        vals = [grid[(es, fr)] for es in equity_shares]
        if any(b < a - tol for a, b in zip(vals, vals[1:])):
            raise ConsistencyError(f"guarantee value not increasing in equity share at funding {fr}")
    for es in equity_shares:
        vals = [grid[(es, fr)] for fr in funding_ratios]
        if any(b > a + tol for a, b in zip(vals, vals[1:])):
            raise ConsistencyError(f"guarantee value not decreasing in funding ratio at equity share {es}")


def scheme_expected_losses(pop: Population, market: MarketConfig, horizon: float = 1.0) -> np.ndarray:
    """One-year expected loss per scheme from the independent put valuation."""
    out = np.empty(len(pop))
    for i in range(len(pop)):
        put = PutInputs(
            assets=float(pop.assets[i]), strike_liability=float(pop.haircut[i] * pop.liability[i]),
            asset_vol=float(pop.equity_share[i] * market.equity_vol),
            risk_free_rate=market.gilt_yield_initial, horizon=horizon,
        )  # fmt: skip
        out[i] = guarantee_expected_loss(put, float(pop.base_pd[i]))
    return out


def adverse_selection_experiment(config: SimulationConfig, kappa: float, years: int | None = None) -> dict:
    """Expected-value trajectory of a pool losing its strong members.

    Each scheme carries a survival weight. Every year the levy is re-solved
    as the weighted expected loss over weighted liabilities, and schemes
    whose sponsor is stronger than the pool average lose
    ``exit_probability(levy_rate, kappa)`` of their weight.
    """
    if kappa < 0:
        raise ConfigError("kappa", "must be >= 0")
    years = config.horizon if years is None else years
    pop = build_population(config)
    expected_loss = scheme_expected_losses(pop, config.market)
    weight = np.ones(len(pop))
    pool_pd, levy_rate, pool_size, exit_prob = [], [], [], []
    for _ in range(years):
        avg_pd = float(np.dot(weight, pop.base_pd) / weight.sum())
        rate = float(np.dot(weight, expected_loss) / np.dot(weight, pop.liability))
        p_exit = exit_probability(rate, kappa)
        pool_pd.append(avg_pd)
        levy_rate.append(rate)
        pool_size.append(float(weight.sum()))
        exit_prob.append(p_exit)
        strong = pop.base_pd < avg_pd
        weight = np.where(strong, weight * (1 - p_exit), weight)
    return {"kappa": kappa, "pool_mean_pd": pool_pd, "levy_rate": levy_rate, "pool_size": pool_size, "exit_probability": exit_prob}
