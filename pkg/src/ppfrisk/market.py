"""Correlated annual market scenarios and the market-to-default link.

Every path is a pure function of ``(config, seed, path_index)``: the
generator for a path is seeded from a :class:`numpy.random.SeedSequence`
whose spawn key carries the path index, so paths can be produced in any
order or in parallel and still come out bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

# Spawn-key stream tags. A path index plus one of these identifies an
# independent random stream.
STREAM_MARKET = 0
STREAM_DEFAULTS = 1
STREAM_FUND = 2
STREAM_EXITS = 3
STREAM_POPULATION = 4
STREAM_PRICING = 5

# Shock order: equity, gilt yield, spread, property, inflation.
DEFAULT_CORRELATION = (
    (1.0, 0.2, -0.5, 0.5, 0.0),
    (0.2, 1.0, -0.1, 0.1, 0.3),
    (-0.5, -0.1, 1.0, -0.3, 0.0),
    (0.5, 0.1, -0.3, 1.0, 0.1),
    (0.0, 0.3, 0.0, 0.1, 1.0),
)

SPREAD_MEAN_REVERSION = 0.5


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class MarketConfig:
    equity_drift: float = 0.07
    equity_vol: float = 0.18
    gilt_yield_initial: float = 0.045
    gilt_mean_reversion_speed: float = 0.15
    gilt_long_run_mean: float = 0.045
    gilt_vol: float = 0.006
    spread_initial: float = 120.0  # bp
    spread_vol: float = 40.0  # bp/yr
    property_drift: float = 0.06
    property_vol: float = 0.12
    inflation_mean: float = 0.025
    inflation_vol: float = 0.01
    equity_default_beta: float = 12.0
    drawdown_window: int | None = 3
    shock_correlation: tuple[tuple[float, ...], ...] = DEFAULT_CORRELATION

    def __post_init__(self):
        for name in ("equity_vol", "gilt_vol", "spread_vol", "property_vol", "inflation_vol"):
            if getattr(self, name) < 0:
                raise ConfigError(f"market.{name}", "must be >= 0")
        if self.gilt_mean_reversion_speed < 0:
            raise ConfigError("market.gilt_mean_reversion_speed", "must be >= 0")
        if self.drawdown_window is not None and self.drawdown_window < 1:
            raise ConfigError("market.drawdown_window", "must be >= 1 or null")
        if self.spread_initial <= 0:
            raise ConfigError("market.spread_initial", "must be > 0")
        if self.equity_drift <= -1 or self.property_drift <= -1:
            raise ConfigError("market.equity_drift", "drifts must exceed -100%")
        corr = np.asarray(self.shock_correlation, dtype=float)
        if corr.shape != (5, 5):
            raise ConfigError("market.shock_correlation", "must be a 5x5 matrix")
        if not np.allclose(corr, corr.T) or not np.allclose(np.diag(corr), 1.0):
            raise ConfigError("market.shock_correlation", "must be symmetric with unit diagonal")
        try:
            np.linalg.cholesky(corr)
        except np.linalg.LinAlgError:
            raise ConfigError("market.shock_correlation", "must be positive definite") from None
        # JSON round trips hand back lists; keep the field hashable.
        object.__setattr__(self, "shock_correlation", tuple(tuple(float(x) for x in row) for row in corr))

    @property
    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(np.asarray(self.shock_correlation))


@dataclass(frozen=True, eq=False)
class MarketPath:
    """One annual scenario. Index ``t`` is the state at the end of year ``t``."""

    years: int
    equity_total_return: np.ndarray
    equity_drawdown: np.ndarray
    gilt_yield: np.ndarray
    spread_index: np.ndarray
    property_return: np.ndarray
    inflation: np.ndarray
    gilt_yield_initial: float = 0.0
    path_index: int = 0
    _fields = ("equity_total_return", "equity_drawdown", "gilt_yield", "spread_index", "property_return", "inflation")

    def __post_init__(self):
        for name in self._fields:
            if len(getattr(self, name)) != self.years:
                raise DomainError(f"MarketPath.{name} has length {len(getattr(self, name))}, expected {self.years}")

    def __eq__(self, other):
        if not isinstance(other, MarketPath):
            return NotImplemented
        return (
            self.years == other.years
            and self.gilt_yield_initial == other.gilt_yield_initial
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self._fields)
        )

    def yield_before(self, year: int) -> float:
        """Gilt yield at the start of ``year``."""
        return self.gilt_yield_initial if year == 0 else float(self.gilt_yield[year - 1])

    @classmethod
    def flat(cls, years: int, equity_return=0.0, gilt_yield=0.0, spread=100.0, property_return=0.0, inflation=0.0):
        """Deterministic path with constant values, handy for hand checks."""
        full = lambda v: np.full(years, float(v))  # noqa: E731
        return cls(
            years=years,
            equity_total_return=full(equity_return),
            equity_drawdown=_drawdown(full(equity_return)),
            gilt_yield=full(gilt_yield),
            spread_index=full(spread),
            property_return=full(property_return),
            inflation=full(inflation),
            gilt_yield_initial=float(gilt_yield),
        )


def _drawdown(total_returns: np.ndarray, window: int | None = None) -> np.ndarray:
    """Fraction of the trailing peak lost, the peak taken over the last
    ``window`` year-ends (all history when None), starting level included."""
    level = np.concatenate(([1.0], np.cumprod(1.0 + total_returns)))
    if window is None:
        peak = np.maximum.accumulate(level)
    else:
        peak = np.array([level[max(0, k - window) : k + 1].max() for k in range(len(level))])
    return np.clip(1.0 - level[1:] / peak[1:], 0.0, 1.0)


def simulate_path(config: MarketConfig, seed: int, path_index: int, horizon: int) -> MarketPath:
    if horizon < 1:
        raise ConfigError("horizon", "must be >= 1")
    rng = rng_for(seed, path_index, STREAM_MARKET)
    shocks = rng.standard_normal((horizon, 5)) @ config.cholesky.T
    z_eq, z_gilt, z_spread, z_prop, z_infl = shocks.T

    eq_vol = config.equity_vol
    # drift + (1 + drift) * expm1(.) equals (1 + drift) * exp(.) - 1 but is exact at zero vol
    equity = config.equity_drift + (1.0 + config.equity_drift) * np.expm1(eq_vol * z_eq - 0.5 * eq_vol**2)
    prop_vol = config.property_vol
    prop = config.property_drift + (1.0 + config.property_drift) * np.expm1(prop_vol * z_prop - 0.5 * prop_vol**2)

    gilt = np.empty(horizon)
    spread = np.empty(horizon)
    y = config.gilt_yield_initial
    log_s0 = np.log(config.spread_initial)
    log_s = log_s0
    spread_log_vol = config.spread_vol / config.spread_initial
    for t in range(horizon):
        y = max(0.0, y + config.gilt_mean_reversion_speed * (config.gilt_long_run_mean - y) + config.gilt_vol * z_gilt[t])
        gilt[t] = y
        log_s = log_s + SPREAD_MEAN_REVERSION * (log_s0 - log_s) + spread_log_vol * z_spread[t]
        spread[t] = np.exp(log_s)

    inflation = config.inflation_mean + config.inflation_vol * z_infl
    return MarketPath(
        years=horizon,
        equity_total_return=equity,
        equity_drawdown=_drawdown(equity, config.drawdown_window),
        gilt_yield=gilt,
        spread_index=spread,
        property_return=prop,
        inflation=inflation,
        gilt_yield_initial=config.gilt_yield_initial,
        path_index=path_index,
    )


def simulate_paths(config: MarketConfig, seed: int, n_paths: int, horizon: int) -> list[MarketPath]:
    """Generate ``n_paths`` independent paths of ``horizon`` years.

    Equity and property use lognormal annual total returns whose arithmetic
    mean equals the configured drift; the gilt yield is a mean-reverting
    Gaussian process floored at zero; the spread index is log-AR(1) around
    its initial level; inflation is i.i.d. Gaussian.
    """
    if n_paths < 1:
        raise ConfigError("n_paths", "must be >= 1")
    if horizon < 1:
        raise ConfigError("horizon", "must be >= 1")
    return [simulate_path(config, seed, i, horizon) for i in range(n_paths)]


def _logit(p):
    return np.log(p) - np.log1p(-p)


def sponsor_default_probability(base_pd, path: MarketPath, year: int, beta: float):
    """Annual default probability conditioned on the equity drawdown.

    Log-odds shift linearly with the drawdown from the trailing peak:
    ``logit(p) = logit(base_pd) + beta * drawdown``. Accepts a scalar or an
    array of base probabilities.
    """
    if not 0 <= year < path.years:
        raise DomainError(f"year {year} outside path of {path.years} years")
    return default_probability_at(base_pd, float(path.equity_drawdown[year]), beta)


def default_probability_at(base_pd, drawdown, beta: float):
    pd = np.asarray(base_pd, dtype=float)
    if np.any((pd <= 0) | (pd >= 1)):
        raise DomainError("base_pd must lie strictly inside (0, 1)")
    shifted = _logit(pd) + beta * drawdown
    out = 1.0 / (1.0 + np.exp(-shifted))
    return float(out) if out.ndim == 0 else out
