import json
import subprocess
import sys

import pytest

from gerbecalc import cli, parallel
from gerbecalc.plotting import TSV_COLUMNS
from gerbecalc.suites import SUITES, RunConfig


def test_branes_passes_and_writes_report(tmp_path, capsys):
    report = tmp_path / "out" / "branes.json"
    assert cli.main(["--command", "branes", "--seed", "3", "--samples", "10", "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    assert doc["tool"] == "gerbecalc" and doc["command"] == "branes" and doc["passed"] is True
    assert doc["config"]["seed"] == 3 and doc["config"]["samples"] == 10
    for row in doc["checks"]:
        assert set(row) >= {"name", "value", "tolerance", "exact", "passed", "runtime_s"}
    tsv = report.with_suffix(".tsv").read_text().splitlines()
    assert tuple(tsv[0].split("\t")) == TSV_COLUMNS
    assert len(tsv) == len(doc["checks"]) + 1
    assert report.with_suffix(".png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "PASS  branes" in capsys.readouterr().out


def test_tiny_tolerance_scale_fails():
    assert cli.main(["--command", "branes", "--samples", "5", "--tolerance-scale", "1e-12"]) == 1


def test_unknown_command():
    assert cli.main(["--command", "nonsense"]) == 2
    assert cli.main([]) == 2


def test_missing_or_bad_config(tmp_path):
    assert cli.main(["--config", str(tmp_path / "missing.json")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["--config", str(bad)]) == 3
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"command": "branes", "colour": "red"}))
    assert cli.main(["--config", str(unknown)]) == 3


def test_missing_mesh_file_is_file_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "pw", "mesh": str(tmp_path / "none.txt")}))
    assert cli.main(["--config", str(cfg)]) == 3


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "branes", "seed": 1, "samples": 4}))
    args = cli.build_parser().parse_args(["--config", str(cfg), "--seed", "9"])
    rc = cli.load_config(args)
    assert (rc.command, rc.seed, rc.samples) == ("branes", 9, 4)


def test_run_config_roundtrip():
    rc = RunConfig("cs", level=3, resolution=5, tolerance_scale=2.0)
    assert RunConfig.from_dict(rc.to_dict()) == rc
    with pytest.raises(ValueError):
        RunConfig.from_dict({"command": "cs", "bogus": 1})


def test_every_suite_is_registered():
    assert {"form-identities", "normalization", "pw", "mickelsson", "deligne", "mc-class", "cs", "transition",
            "holonomy-derivative", "branes"} <= set(SUITES)


def test_deligne_report_is_deterministic(tmp_path):
    paths = [tmp_path / f"d{i}.json" for i in range(2)]
    for p in paths:
        assert cli.main(["--command", "deligne", "--seed", "5", "--samples", "10", "--report", str(p)]) == 0
    docs = [json.loads(p.read_text()) for p in paths]
    strip = lambda d: [(c["name"], c["value"], c["passed"], c["detail"]) for c in d["checks"]]  # noqa: E731
    assert strip(docs[0]) == strip(docs[1])


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("GERBECALC_THREADS", "1")
    assert parallel.max_workers() == 1
    assert parallel.pmap(lambda x: x * x, range(5)) == [0, 1, 4, 9, 16]
    monkeypatch.setenv("GERBECALC_THREADS", "3")
    assert parallel.pmap(lambda x: -x, range(4)) == [0, -1, -2, -3]
    monkeypatch.setenv("GERBECALC_THREADS", "many")
    with pytest.raises(ValueError):
        parallel.max_workers()


def test_console_entry_point_runs():
    out = subprocess.run([sys.executable, "-m", "gerbecalc.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.startswith("gerbecalc ")
