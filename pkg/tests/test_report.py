import csv
import io
import json
import os

import pytest

from ppfrisk.config import config_checksum
from ppfrisk.errors import OutputError
from ppfrisk.report import CLAIMS_HEADER, LEDGER_HEADER, ensure_writable, write_report
from ppfrisk.simulation import PopulationSpec, SchemeRecord, SimulationConfig, SimulationReport, run_simulation

DATA_FILES = ("report.json", "claims.csv", "ledger.csv", "histogram.csv", "fan.csv")


def rows(path):
    return list(csv.reader(io.StringIO(path.read_text())))


def test_empty_report_writes_headers_only(tmp_path):
    manifest = write_report(SimulationReport.empty(seed=4), tmp_path)
    for name in DATA_FILES[1:]:
        assert len(rows(tmp_path / name)) == 1
    assert rows(tmp_path / "claims.csv")[0] == list(CLAIMS_HEADER)
    assert json.loads((tmp_path / "report.json").read_text())["n_paths"] == 0
    assert [f["name"] for f in manifest["files"]] == list(DATA_FILES)


def test_single_claim_single_row(tmp_path):
    cfg = SimulationConfig(
        population=PopulationSpec(schemes=(SchemeRecord("only", "CCC", 100.0, 60.0, base_pd=0.0, default_year=0),)),
        horizon=3, n_paths=1,
    )  # fmt: skip
    write_report(run_simulation(cfg), tmp_path)
    data = rows(tmp_path / "claims.csv")
    assert len(data) == 2
    assert data[1][:3] == ["0", "0", "only"]
    ledger = rows(tmp_path / "ledger.csv")
    assert ledger[0] == list(LEDGER_HEADER)
    assert len(ledger) == 1 + 3


def test_rerun_is_byte_identical(tmp_path):
    cfg = SimulationConfig(population=PopulationSpec(count=80), horizon=6, n_paths=12, seed=9)
    a, b = tmp_path / "a", tmp_path / "b"
    ma = write_report(run_simulation(cfg), a, config_checksum(cfg))
    mb = write_report(run_simulation(cfg), b, config_checksum(cfg))
    for name in DATA_FILES:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    strip = lambda m: {k: v for k, v in m.items() if k != "timestamp"}  # noqa: E731
    assert strip(ma) == strip(mb)
    on_disk = json.loads((a / "manifest.json").read_text())
    assert on_disk["config_checksum"] == config_checksum(cfg)
    assert on_disk["seed"] == 9 and on_disk["tool_version"]


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_directory(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    with pytest.raises(OutputError):
        ensure_writable(locked)


def test_path_through_a_file_is_output_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError):
        ensure_writable(blocker / "sub")
    with pytest.raises(OutputError):
        write_report(SimulationReport.empty(), blocker / "sub")
