"""JSON configuration: strict parsing into the engine dataclasses and back.

Unknown keys are rejected and every error names the dotted key path that
caused it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from importlib import resources
from pathlib import Path
from typing import Any, Union

from .errors import ConfigError
from .pricing import PutInputs
from .simulation import SimulationConfig
from .stress import InsurerBalanceSheet

KINDS = {"simulation": SimulationConfig, "balance_sheet": InsurerBalanceSheet, "put": PutInputs}
FIXTURES = ("mn_baseline", "ppf_2005", "first_month", "balance_sheet")


def _type_name(tp) -> str:
    return getattr(tp, "__name__", str(tp))


def _convert(value: Any, tp, key: str):
    origin = typing.get_origin(tp)
    if origin in (Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(key, "must not be null")
        members = [a for a in args if a is not type(None)]
        if len(members) == 1:
            return _convert(value, members[0], key)
        errors = []
        for arg in members:
            try:
                return _convert(value, arg, key)
            except ConfigError as exc:
                errors.append(exc.constraint)
        raise ConfigError(key, " or ".join(errors))
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(key, f"must be an object ({_type_name(tp)})")
        return from_dict(tp, value, key)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, "must be a list")
        args = typing.get_args(tp)
        item_tp = args[0]
        return tuple(_convert(v, item_tp, f"{key}[{i}]") for i, v in enumerate(value))
    if origin is dict or tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(key, "must be an object")
        return dict(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, "must be a number")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(key, "must be an integer")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, "must be true or false")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(key, "must be a string")
        return value
    return value


def from_dict(cls, data: dict, prefix: str = ""):
    """Build dataclass ``cls`` from ``data``, rejecting unknown keys."""
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{prefix}.{unknown[0]}" if prefix else unknown[0]
        raise ConfigError(where, f"unknown key (allowed: {', '.join(sorted(fields))})")
    for name, f in fields.items():
        required = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if required and name not in data:
            raise ConfigError(f"{prefix}.{name}" if prefix else name, "required field is missing")
    kwargs = {}
    for name, value in data.items():
        key = f"{prefix}.{name}" if prefix else name
        kwargs[name] = _convert(value, hints[name], key)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        # Engines name keys relative to their own object; anchor them at this level.
        leaf = exc.key.split(".")[-1]
        if prefix and leaf in fields:
            raise ConfigError(f"{prefix}.{leaf}", exc.constraint) from None
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(prefix or cls.__name__, str(exc)) from None


def to_dict(obj) -> dict:
    """Plain JSON-ready form of a config dataclass."""

    def plain(v):
        if dataclasses.is_dataclass(v):
            return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v) if f.init}
        if isinstance(v, (list, tuple)):
            return [plain(x) for x in v]
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        return v

    return plain(obj)


def config_checksum(obj) -> str:
    text = json.dumps(to_dict(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def detect_kind(data: dict) -> str:
    if "holdings" in data:
        return "balance_sheet"
    if "strike_liability" in data:
        return "put"
    return "simulation"


def load_json(source: str | Path) -> dict:
    """Read a config file, or a shipped fixture by bare name."""
    path = Path(source)
    if not path.exists() and str(source) in FIXTURES:
        text = resources.files("ppfrisk.fixtures").joinpath(f"{source}.json").read_text()
    else:
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(str(source), f"cannot read config file ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(source), f"malformed JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(str(source), "top level must be a JSON object")
    return data


def parse_config(source: str | Path | dict, kind: str | None = None):
    """Parse a simulation config, balance sheet or put-inputs file.

    ``kind`` may be given explicitly, set by a top-level ``"kind"`` key, or is
    inferred from the keys present.
    """
    data = dict(source) if isinstance(source, dict) else load_json(source)
    declared = data.pop("kind", None)
    kind = kind or declared or detect_kind(data)
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
    return from_dict(KINDS[kind], data)


def dump_config(obj, kind: str | None = None) -> str:
    data = to_dict(obj)
    if kind:
        data = {"kind": kind, **data}
    return json.dumps(data, indent=2, sort_keys=False)


def defaults() -> dict:
    """Documented defaults for every config kind."""
    from .stress import AssetHolding

    return {
        "simulation": to_dict(SimulationConfig()),
        "balance_sheet": to_dict(
            InsurerBalanceSheet(holdings=(AssetHolding("cash", 0.0),), mathematical_reserves=0.0, realistic_liabilities=0.0)
        ),
        "put": to_dict(PutInputs(assets=100.0, strike_liability=100.0, asset_vol=0.2)),
    }


def json_dumps_defaults(kind: str | None = None) -> str:
    data = defaults()
    return json.dumps(data[kind] if kind else data, indent=2)
