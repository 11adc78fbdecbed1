"""The guarantee valued as a European put on scheme assets.

The closed form and the Monte Carlo estimator are independent routes to the
same number; the second exists to check the first.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DomainError
from .market import STREAM_PRICING, MarketConfig, default_probability_at, rng_for, simulate_path

MC_BLOCK = 1 << 16


@dataclass(frozen=True)
class PutInputs:
    assets: float
    strike_liability: float
    asset_vol: float
    risk_free_rate: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        if self.assets < 0:
            raise ConfigError("assets", "must be >= 0")
        if self.strike_liability <= 0:
            raise ConfigError("strike_liability", "must be > 0")
        if self.asset_vol < 0:
            raise ConfigError("asset_vol", "must be >= 0")
        if self.horizon <= 0:
            raise ConfigError("horizon", "must be > 0")

    @property
    def funding_ratio(self) -> float:
        return self.assets / self.strike_liability


def asset_vol_from_mix(equity_share: float, equity_vol: float) -> float:
    """Scheme asset volatility when only the equity allocation is known."""
    return equity_share * equity_vol


def _black_scholes(inputs: PutInputs) -> tuple[float, float]:
    s, k, v, r, t = inputs.assets, inputs.strike_liability, inputs.asset_vol, inputs.risk_free_rate, inputs.horizon
    pv_strike = k * math.exp(-r * t)
    sd = v * math.sqrt(t)
    if sd == 0 or s == 0:
        put = max(0.0, pv_strike - s)
        return put, put + s - pv_strike
    d1 = (math.log(s / k) + (r + 0.5 * v * v) * t) / sd
    d2 = d1 - sd
    call = s * ndtr(d1) - pv_strike * ndtr(d2)
    put = pv_strike * ndtr(-d2) - s * ndtr(-d1)
    return float(put), float(call)


def put_value_closed_form(inputs: PutInputs) -> float:
    return _black_scholes(inputs)[0]


def call_value_closed_form(inputs: PutInputs) -> float:
    """Companion call, used for the put-call parity check."""
    return _black_scholes(inputs)[1]


def _mc_block(inputs: PutInputs, seed: int, block: int, size: int) -> tuple[float, float]:
    z = rng_for(seed, block, STREAM_PRICING).standard_normal(size)
    v, t, r = inputs.asset_vol, inputs.horizon, inputs.risk_free_rate
    terminal = inputs.assets * np.exp((r - 0.5 * v * v) * t + v * math.sqrt(t) * z)
    payoff = np.maximum(inputs.strike_liability - terminal, 0.0) * math.exp(-r * t)
    return float(payoff.sum()), float(np.dot(payoff, payoff))


def put_value_monte_carlo(inputs: PutInputs, seed: int, n_samples: int, workers: int = 1) -> dict[str, float]:
    """Monte Carlo estimate of the discounted expected shortfall.

    Samples are drawn in fixed-size blocks, each seeded from
    ``(seed, block_index)``; block sums are reduced in block order, so the
    estimate does not depend on ``workers``.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    sizes = [MC_BLOCK] * (n_samples // MC_BLOCK)
    if n_samples % MC_BLOCK:
        sizes.append(n_samples % MC_BLOCK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _mc_block(inputs, seed, *a), enumerate(sizes)))
    else:
        parts = [_mc_block(inputs, seed, i, n) for i, n in enumerate(sizes)]
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    mean = total / n_samples
    if n_samples > 1:
        var = max(0.0, (total_sq - n_samples * mean * mean) / (n_samples - 1))
        std_error = math.sqrt(var / n_samples)
    else:
        std_error = float("nan")
    if inputs.asset_vol == 0:
        std_error = 0.0
    return {"value": mean, "std_error": std_error}


@dataclass(frozen=True)
class JointConfig:
    """Market setting for the joint default/shortfall valuation."""

    market: MarketConfig
    n_paths: int = 20_000
    seed: int = 0


def joint_loss_samples(put: PutInputs, pd: float, joint: JointConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-path default probability over the horizon and discounted shortfall.

    Scheme assets carry ``asset_vol / equity_vol`` of the equity return and
    earn the risk-free rate on the rest; the default intensity each year
    follows the equity drawdown. Both therefore load on the same driver.
    """
    market = joint.market
    years = max(1, math.ceil(put.horizon))
    weight = min(1.0, put.asset_vol / market.equity_vol) if market.equity_vol > 0 else 0.0
    default_prob = np.empty(joint.n_paths)
    shortfall = np.empty(joint.n_paths)
    r = put.risk_free_rate
    for i in range(joint.n_paths):
        path = simulate_path(market, joint.seed, i, years)
        growth = np.prod(1.0 + weight * path.equity_total_return + (1 - weight) * r)
        shortfall[i] = max(0.0, put.strike_liability - put.assets * growth) * math.exp(-r * years)
        if pd <= 0 or pd >= 1:
            default_prob[i] = pd
        else:
            yearly = default_probability_at(np.full(years, pd), path.equity_drawdown, market.equity_default_beta)
            default_prob[i] = 1.0 - np.prod(1.0 - yearly)
    return default_prob, shortfall


def guarantee_expected_loss(put: PutInputs, pd: float, mode: str = "independent", joint_config: JointConfig | None = None) -> float:
    """Expected discounted loss to the fund from one scheme.

    ``independent`` multiplies the default probability by the put value.
    ``joint`` averages default probability times shortfall across market
    paths that drive both.
    """
    if not 0 <= pd <= 1:
        raise DomainError("pd must lie in [0, 1]")
    if mode == "independent":
        return pd * put_value_closed_form(put)
    if mode == "joint":
        if joint_config is None:
            raise ConfigError("joint_config", "joint mode needs a market configuration")
        default_prob, shortfall = joint_loss_samples(put, pd, joint_config)
        return float(np.mean(default_prob * shortfall))
    raise ConfigError("mode", "must be 'independent' or 'joint'")
