"""Command-line driver for the verification suites.

Exit codes: 0 all checks pass, 1 a check fails, 2 unknown command, 3 file error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .plotting import plot_defects, write_defect_table
from .suites import SUITES, RunConfig

SCHEMA_VERSION = 1

EXIT_PASS, EXIT_FAIL, EXIT_UNKNOWN, EXIT_FILE = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gerbecalc", description="Run a gerbecalc verification suite.")
    p.add_argument("--command", help="suite: " + ", ".join(SUITES))
    p.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--level", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--report", type=Path, help="JSON report path; a .tsv table and a .png chart are written beside it")
    p.add_argument("--tolerance-scale", type=float)
    p.add_argument("--version", action="version", version=f"gerbecalc {__version__}")
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge the config file (if any) with command-line flags; flags win."""
    data: dict = {}
    if args.config is not None:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    for key in ("command", "seed", "resolution", "level", "samples", "tolerance_scale"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if "command" not in data:
        raise KeyError("no command given")
    return RunConfig.from_dict(data)


def make_report(cfg: RunConfig, checks: list, runtime: float) -> dict:
    rows = [c.to_dict() for c in checks]
    return {"schema_version": SCHEMA_VERSION, "tool": "gerbecalc", "version": __version__,
            "command": cfg.command, "config": cfg.to_dict(), "passed": all(r["passed"] for r in rows),
            "runtime_s": runtime, "checks": rows}


def write_report(report: dict, path: Path) -> list[Path]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, default=float)
    tsv, png = path.with_suffix(".tsv"), path.with_suffix(".png")
    write_defect_table(report["checks"], tsv)
    plot_defects(report["checks"], png, report["command"])
    return [path, tsv, png]


def run(cfg: RunConfig) -> dict:
    """Run one suite and return its report dictionary."""
    if cfg.command not in SUITES:
        raise KeyError(f"unknown command {cfg.command!r}")
    t0 = time.perf_counter()
    checks = SUITES[cfg.command](cfg)
    return make_report(cfg, checks, time.perf_counter() - t0)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_FILE
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (TypeError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_FILE
    if cfg.command not in SUITES:
        print(f"error: unknown command {cfg.command!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_UNKNOWN
    try:
        report = run(cfg)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status}  {c['name']:<45s} value={c['value']:.3e}  tol={c['tolerance']:.1e}")
    print(f"{'PASS' if report['passed'] else 'FAIL'}  {cfg.command} ({report['runtime_s']:.1f} s)")
    if args.report is not None:
        try:
            write_report(report, args.report)
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_FILE
    return EXIT_PASS if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
