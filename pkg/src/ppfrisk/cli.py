"""Command-line entry point: ``ppfrisk simulate|stress|levy|price-put|calibrate``.

Exit status is 0 on success and otherwise the category code of the error
(see :mod:`ppfrisk.errors`).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import config_checksum, json_dumps_defaults, load_json, parse_config
from .errors import PPFRiskError, UsageError
from .levy import levy_vector, pbgc_premium
from .pricing import JointConfig, PutInputs, call_value_closed_form, guarantee_expected_loss, put_value_closed_form, put_value_monte_carlo
from .report import csv_text, ensure_writable, json_text, write_outputs, write_report
from .simulation import SimulationConfig, build_population, calibrate_breakeven_premium, run_simulation
from .stress import InsurerBalanceSheet, run_stress

DEFAULT_KIND = {"simulate": "simulation", "levy": "simulation", "calibrate": "simulation", "stress": "balance_sheet", "price-put": "put"}
LEVY_HEADER = (
    "scheme",
    "grade",
    "full_liability_gbp",
    "ppf_liability_gbp",
    "assets_gbp",
    "base_pd_annual",
    "members_count",
    "levy_gbp",
    "pbgc_premium_usd",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load(args, kind: str):
    if args.config is None:
        if kind == "balance_sheet":
            return parse_config("balance_sheet")
        return parse_config({}, kind=kind)
    # let the file declare (or imply) its own kind so a mismatch is a usage error
    return parse_config(args.config)


def _with_overrides(cfg: SimulationConfig, args) -> SimulationConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.paths is not None:
        changes["n_paths"] = args.paths
    if getattr(args, "horizon", None) is not None:
        changes["horizon"] = args.horizon
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return replace(cfg, **changes) if changes else cfg


def _require(obj, cls, what: str):
    if not isinstance(obj, cls):
        raise UsageError(f"{what} expects config kind {cls.__name__}, got {type(obj).__name__}")
    return obj


def cmd_simulate(args) -> int:
    out = ensure_writable(args.out)
    cfg = _with_overrides(_require(_load(args, "simulation"), SimulationConfig, "simulate"), args)
    report = run_simulation(cfg)
    write_report(report, out, config_checksum(cfg))
    _echo(report.summary(), keys=("mean_claim_rate", "breakeven_levy_rate", "claim_rate_p99", "fund_insolvency_probability", "claims_equity_correlation"))
    return 0


def cmd_calibrate(args) -> int:
    out = ensure_writable(args.out)
    cfg = _with_overrides(_require(_load(args, "simulation"), SimulationConfig, "calibrate"), args)
    rate = calibrate_breakeven_premium(cfg, method=args.method)
    result = {"method": args.method, "breakeven_levy_rate": rate, "n_paths": cfg.n_paths, "horizon": cfg.horizon, "seed": cfg.seed}
    write_outputs(out, {"calibrate.json": json_text(result)}, cfg.seed, config_checksum(cfg))
    _echo(result)
    return 0


def cmd_stress(args) -> int:
    out = ensure_writable(args.out)
    bs = _require(_load(args, "balance_sheet"), InsurerBalanceSheet, "stress")
    res = run_stress(bs)
    data = {
        "scenario_losses": res.scenario_losses,
        "rcm": res.rcm,
        "peak1": res.peak1,
        "peak2": res.peak2,
        "wpicc": res.wpicc,
        "lticr": res.lticr,
        "resilience_capital": res.resilience_capital,
        "capital_requirement": res.capital_requirement,
        "capital_resources": res.capital_resources,
        "tier_violations": res.tier_violations,
        "equity_fall_fraction": res.equity_fall,
        "property_fall_fraction": res.property_fall,
        "rate_shift_pp": res.rate_shift_pp,
        "rate_direction": res.rate_direction,
    }
    rows = [(name, loss) for name, loss in res.scenario_losses.items()]
    files = {"stress.json": json_text(data), "stress.csv": csv_text(("scenario", "net_loss_currency"), rows)}
    write_outputs(out, files, None, config_checksum(bs))
    _echo(data, keys=("rcm", "peak1", "peak2", "wpicc", "capital_resources"))
    return 0


def cmd_levy(args) -> int:
    out = ensure_writable(args.out)
    cfg = _with_overrides(_require(_load(args, "simulation"), SimulationConfig, "levy"), args)
    pop = build_population(cfg)
    schedule = cfg.levy
    ppf_liab = pop.haircut * pop.liability
    levies = levy_vector(schedule, pop.liability, ppf_liab, pop.assets, pop.base_pd, pop.grade_multipliers(schedule.grade_multipliers))
    members = schedule.members(pop.liability)
    rows = []
    for i in range(len(pop)):
        pbgc = pbgc_premium(members[i], max(0.0, ppf_liab[i] - pop.assets[i]), args.pbgc_year) if args.pbgc_year else ""
        rows.append((pop.ids[i], pop.grades[i], pop.liability[i], ppf_liab[i], pop.assets[i], pop.base_pd[i], members[i], levies[i], pbgc))
    total = float(np.sum(levies)) + schedule.overhead
    write_outputs(out, {"levy.csv": csv_text(LEVY_HEADER, rows)}, cfg.seed, config_checksum(cfg))
    _echo({"schemes": len(pop), "total_levy_gbp": total, "kind": schedule.kind})
    return 0


def cmd_price_put(args) -> int:
    out = ensure_writable(args.out)
    data = {"kind": "put", **load_json(args.config)} if args.config else {"kind": "put"}
    data.update({k: v for k, v in {
        "assets": args.assets, "strike_liability": args.liability, "asset_vol": args.vol,
        "risk_free_rate": args.rate, "horizon": args.horizon,
    }.items() if v is not None})  # fmt: skip
    put = _require(parse_config(data), PutInputs, "price-put")
    seed = 0 if args.seed is None else args.seed
    result = {
        "inputs": {"assets": put.assets, "strike_liability": put.strike_liability, "asset_vol": put.asset_vol,
                   "risk_free_rate": put.risk_free_rate, "horizon": put.horizon},
        "put_closed_form": put_value_closed_form(put),
        "call_closed_form": call_value_closed_form(put),
        "seed": seed,
    }  # fmt: skip
    if args.samples:
        result["put_monte_carlo"] = put_value_monte_carlo(put, seed, args.samples)
    if args.pd is not None:
        joint = None
        if args.mode == "joint":
            from .market import MarketConfig

            joint = JointConfig(MarketConfig(), n_paths=args.paths or 20_000, seed=seed)
        result["pd"] = args.pd
        result["mode"] = args.mode
        result["expected_loss"] = guarantee_expected_loss(put, args.pd, args.mode, joint)
    write_outputs(out, {"put.json": json_text(result)}, seed, config_checksum(put))
    _echo(result, keys=("put_closed_form", "put_monte_carlo", "expected_loss"))
    return 0


def _echo(data: dict, keys=None) -> None:
    shown = {k: data[k] for k in keys if k in data} if keys else data
    for k, v in shown.items():
        print(f"{k}: {v}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file, or a shipped fixture name")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--paths", type=int, help="override the number of Monte Carlo paths")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--print-defaults", action="store_true", help="print the documented defaults as JSON and exit")

    parser = _Parser(prog="ppfrisk", description="Pension guarantee fund risk laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="population Monte Carlo of claims and the fund")
    p.add_argument("--horizon", type=int, help="override the horizon in years")
    p.add_argument("--workers", type=int, help="worker processes for path simulation")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common], help="breakeven flat levy rate on liabilities")
    p.add_argument("--horizon", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--method", choices=("ratio", "terminal"), default="ratio")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("stress", parents=[common], help="regulatory stress test of an insurer balance sheet")
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("levy", parents=[common], help="per-scheme levies for the time-zero population")
    p.add_argument("--pbgc-year", type=int, help="also price each scheme on this PBGC premium schedule")
    p.set_defaults(func=cmd_levy)

    p = sub.add_parser("price-put", parents=[common], help="value the guarantee as a put on scheme assets")
    p.add_argument("--assets", type=float)
    p.add_argument("--liability", type=float, help="strike: guaranteed liability")
    p.add_argument("--vol", type=float, help="annual asset volatility")
    p.add_argument("--rate", type=float, help="continuously compounded risk-free rate")
    p.add_argument("--horizon", type=float, help="years to the valuation date")
    p.add_argument("--pd", type=float, help="sponsor default probability over the horizon")
    p.add_argument("--mode", choices=("independent", "joint"), default="independent")
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo samples for the oracle (0 skips it)")
    p.set_defaults(func=cmd_price_put)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.print_defaults:
            print(json_dumps_defaults(DEFAULT_KIND[args.command]))
            return 0
        return args.func(args)
    except PPFRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
