"""Defect tables and bar charts for suite reports."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

TSV_COLUMNS = ("name", "value", "tolerance", "exact", "passed", "runtime_s")


def write_defect_table(checks: Sequence[dict], path) -> None:
    """Write one tab-separated row per check (columns :data:`TSV_COLUMNS`)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(TSV_COLUMNS)
        for c in checks:
            w.writerow([c["name"], repr(float(c["value"])), repr(float(c["tolerance"])), int(c["exact"]),
                        int(c["passed"]), f"{c['runtime_s']:.3f}"])


def plot_defects(checks: Sequence[dict], path, title: str = "") -> Path:
    """Log-scale bar chart of numeric defects against their tolerances.

    Exact checks are drawn at the floor value ``1e-18`` when they pass.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    floor = 1e-18
    names = [c["name"] for c in checks]
    values = [max(float(c["value"]), floor) for c in checks]
    tols = [max(float(c["tolerance"]), floor) for c in checks]
    colors = ["tab:green" if c["passed"] else "tab:red" for c in checks]
    x = np.arange(len(checks))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(checks) + 2), 4.0))
    ax.bar(x, values, color=colors)
    ax.scatter(x, tols, marker="_", s=400, color="black", label="tolerance", zorder=3)
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("defect")
    ax.set_title(title)
    ax.legend(loc="upper left", bbox_to_anchor=(1.0, 1.0), fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
