"""Run reports and learning curves: delimited text plus rendered figures.

Every report or curve written to disk gets a PNG figure next to it with the
same stem, so a results directory reads at a glance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

REPORT_COLUMNS = ("scenario", "policy", "job", "makespan", "events",
                  "contradictions", "gate_uniform_share", "seed")


@dataclass
class ReportRow:
    scenario: str
    policy: str
    job: str
    makespan: float
    events: int
    contradictions: int = 0
    gate_uniform_share: float = 0.0
    seed: int = 0


def figure_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_suffix(".png")


def write_report(rows: list[ReportRow], path: str | Path,
                 append: bool = False) -> Path:
    """CSV rows plus a makespan-by-policy bar chart alongside."""
    p = Path(path)
    existing: list[dict] = []
    if append and p.exists():
        with open(p) as fh:
            existing = list(csv.DictReader(fh))
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for old in existing:
            writer.writerow([old[c] for c in REPORT_COLUMNS])
        for row in rows:
            writer.writerow([getattr(row, c if c != "job" else "job")
                             for c in ("scenario", "policy", "job")]
                            + [f"{row.makespan:.6f}", row.events,
                               row.contradictions,
                               f"{row.gate_uniform_share:.4f}", row.seed])
    _render_report_figure(p)
    return figure_path(p)


def read_report(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _render_report_figure(csv_path: Path) -> None:
    rows = read_report(csv_path)
    if not rows:
        return
    labels = [f"{r['policy']}\n{r['job']}" for r in rows]
    values = [float(r["makespan"]) for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(rows)), 3.2))
    bars = ax.bar(range(len(rows)), values, color="#4878d0")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("makespan (time units)")
    ax.set_title(rows[0]["scenario"])
    for b, v in zip(bars, values):
        ax.text(b.get_x() + b.get_width() / 2, v, f"{v:.0f}",
                ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(figure_path(csv_path), dpi=120)
    plt.close(fig)


def write_curve(curve: list[tuple[int, float, float]], path: str | Path) -> Path:
    """Learning curve CSV (batch, meanReturn, meanMakespan) plus figure."""
    p = Path(path)
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("batch", "meanReturn", "meanMakespan"))
        for batch, ret, mk in curve:
            writer.writerow((batch, f"{ret:.6f}", f"{mk:.6f}"))
    if curve:
        batches = [c[0] for c in curve]
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(5.5, 4.5), sharex=True)
        ax1.plot(batches, [c[1] for c in curve], color="#4878d0")
        ax1.set_ylabel("mean return")
        ax2.plot(batches, [c[2] for c in curve], color="#d65f5f")
        ax2.set_ylabel("mean makespan")
        ax2.set_xlabel("batch")
        fig.tight_layout()
        fig.savefig(figure_path(p), dpi=120)
        plt.close(fig)
    return figure_path(p)
