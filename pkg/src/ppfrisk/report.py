"""Report emission: plot-ready CSV, JSON statistics and a run manifest.

Every data file is a pure function of the report, so reruns with the same
config and seed give byte-identical files. Only the manifest carries a
timestamp. The manifest is written last and atomically; its presence means
the outputs beside it are complete.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import OutputError

CLAIMS_HEADER = ("path", "year", "scheme", "net_claim_gbp")
LEDGER_HEADER = (
    "path",
    "year",
    "fund_assets_gbp",
    "fund_liabilities_gbp",
    "levies_gbp",
    "net_claims_gbp",
    "liability_base_gbp",
    "claim_rate_fraction",
    "equity_return_fraction",
    "insolvent_flag",
)
HISTOGRAM_HEADER = ("bin_lower_fraction", "bin_upper_fraction", "count", "frequency_fraction")
FAN_HEADER = ("year", "series", "p05", "p25", "p50", "p75", "p95")
FAN_QUANTILES = (5, 25, 50, 75, 95)
HISTOGRAM_BINS = 50


def ensure_writable(out_dir: str | Path) -> Path:
    """Create ``out_dir`` if needed and prove a file can be written there.

    Called before any simulation work so a bad path fails early.
    """
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".probe-", delete=True):
            pass
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable ({exc.strerror or exc})") from None
    return path


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(data) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return json.dumps(data, indent=2, sort_keys=True, default=default, allow_nan=True) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        Path(tmp).unlink(missing_ok=True)
        raise OutputError(f"cannot write {path} ({exc.strerror or exc})") from None


def write_outputs(out_dir: str | Path, files: dict[str, str], seed: int | None, config_checksum: str | None) -> dict:
    """Write ``files`` (name to text) and then the manifest describing them."""
    path = ensure_writable(out_dir)
    for name, text in files.items():
        _atomic_write(path / name, text)
    manifest = {
        "config_checksum": config_checksum,
        "seed": seed,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "files": [{"name": name, "sha256": hashlib.sha256(text.encode()).hexdigest()} for name, text in files.items()],
    }
    _atomic_write(path / "manifest.json", json_text(manifest))
    return manifest


def claims_rows(report):
    for path, year, scheme, net in report.claim_records:
        yield int(path), int(year), scheme, float(net)


def ledger_rows(report):
    for p in range(report.n_paths):
        for t in range(report.horizon):
            yield (
                p,
                t + 1,
                report.fund_assets[p, t + 1],
                report.fund_liabilities[p, t + 1],
                report.levies[p, t],
                report.claims[p, t],
                report.liability_base[p, t],
                report.claim_rate[p, t],
                report.equity_return[p, t],
                bool(report.fund_insolvent[p, t + 1]),
            )


def histogram_rows(report, bins: int = HISTOGRAM_BINS):
    rates = report.claim_rate.ravel()
    if rates.size == 0:
        return []
    upper = float(rates.max()) if rates.max() > 0 else 1.0
    counts, edges = np.histogram(rates, bins=bins, range=(0.0, upper))
    return [(edges[i], edges[i + 1], int(c), c / rates.size) for i, c in enumerate(counts)]


def fan_rows(report):
    """Per-year quantiles across paths, ready for a fan chart."""
    if report.n_paths == 0:
        return []
    series = {
        "claim_rate_fraction": report.claim_rate,
        "fund_net_position_gbp": (report.fund_assets - report.fund_liabilities)[:, 1:],
    }
    rows = []
    for t in range(report.horizon):
        for name, grid in series.items():
            rows.append((t + 1, name, *np.percentile(grid[:, t], FAN_QUANTILES)))
    return rows


def simulation_files(report) -> dict[str, str]:
    return {
        "report.json": json_text(report.summary()),
        "claims.csv": csv_text(CLAIMS_HEADER, claims_rows(report)),
        "ledger.csv": csv_text(LEDGER_HEADER, ledger_rows(report)),
        "histogram.csv": csv_text(HISTOGRAM_HEADER, histogram_rows(report)),
        "fan.csv": csv_text(FAN_HEADER, fan_rows(report)),
    }


def write_report(report, out_dir: str | Path, config_checksum: str | None = None) -> dict:
    """Write the simulation outputs plus manifest; returns the manifest."""
    return write_outputs(out_dir, simulation_files(report), report.seed, config_checksum)
