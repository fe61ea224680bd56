"""Tabular convergence reports with CSV and SVG emission.

CSV output is RFC-4180 with a header row and a trailing comment line
carrying the configuration hash.  Plot emission is advisory: failures
are reported on stderr but never change exit codes.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field

__all__ = ["ConvergenceReport", "save_line_plot"]


@dataclass
class ConvergenceReport:
    """Column-oriented result table with pass/fail bookkeeping."""

    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)  # (name, passed, detail)

    def add_row(self, values):
        if len(values) != len(self.columns):
            raise ValueError("row length does not match columns")
        self.rows.append(list(values))

    def add_check(self, name, passed, detail=""):
        self.checks.append((name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def column(self, name):
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def write_csv(self, path, config_hash=""):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_fmt(v) for v in row])
        # trailing metadata comment; kept outside csv.writer so the
        # quoting rules never touch it
        with open(path, "a", newline="") as fh:
            fh.write(f"# config_hash={config_hash}\n")

    def summary_lines(self):
        out = []
        for name, ok, detail in self.checks:
            mark = "pass" if ok else "FAIL"
            tail = f" ({detail})" if detail else ""
            out.append(f"[{mark}] {name}{tail}")
        return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def save_line_plot(path, x, series, xlabel="", ylabel="", logx=False,
                   logy=False, title=""):
    """Advisory SVG plot; ``series`` maps labels to y-value lists.

    Any failure is swallowed (reported to stderr) so that headless or
    broken plotting stacks never affect run outcomes.
    """
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for label, ys in series.items():
            ax.plot(x, ys, marker="o", label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg")
        plt.close(fig)
        return True
    except Exception as exc:  # advisory only
        print(f"plot emission failed ({path}): {exc}", file=sys.stderr)
        return False
