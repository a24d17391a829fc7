"""Report emission: CSV files, aligned text tables, matplotlib figures.

CSV and table emitters share one float format so the two views always agree
value-for-value.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .ingest import ProfileBin
from .metrics import MetricReport

FLOAT_FMT = "{:.6f}"


def _fmt(value: float | None) -> str:
    return "" if value is None else FLOAT_FMT.format(value)


def write_metrics_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "clip_recall", "clip_precision", "clip_f1"])
        for k in sorted(report.per_k):
            s = report.per_k[k]
            writer.writerow([k, _fmt(s.recall), _fmt(s.precision), _fmt(s.f1)])


def write_partitions_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "partition", "plr"])
        for (k, pid) in sorted(report.per_partition):
            writer.writerow([k, pid, _fmt(report.per_partition[(k, pid)])])


def format_metrics_table(report: MetricReport) -> str:
    header = ["k", "clip_recall", "clip_precision", "clip_f1"]
    rows = [
        [str(k), _fmt(s.recall), _fmt(s.precision), _fmt(s.f1)]
        for k, s in ((k, report.per_k[k]) for k in sorted(report.per_k))
    ]
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def render_metrics_figure(report: MetricReport, path: str | Path) -> None:
    ks = sorted(report.per_k)
    x = range(len(ks))
    width = 0.25
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([i - width for i in x], [report.per_k[k].recall for k in ks], width, label="CLIP-Recall")
    ax.bar(list(x), [report.per_k[k].precision for k in ks], width, label="CLIP-Precision")
    ax.bar([i + width for i in x], [report.per_k[k].f1 for k in ks], width, label="CLIP-F1")
    ax.set_xticks(list(x), [str(k) for k in ks])
    ax.set_xlabel("k")
    ax.set_ylabel("score")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_profile_csv(profile: Sequence[ProfileBin], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "mean_area_proportion", "count"])
        for row in profile:
            writer.writerow([row.bin_index, _fmt(row.mean_area), row.count])


def format_profile_table(profile: Sequence[ProfileBin]) -> str:
    header = ["bin", "mean_area_proportion", "count"]
    rows = [[str(r.bin_index), _fmt(r.mean_area), str(r.count)] for r in profile]
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def render_profile_figure(profile: Sequence[ProfileBin], path: str | Path) -> None:
    filled = [r for r in profile if r.mean_area is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(
        [r.bin_index for r in filled],
        [r.mean_area for r in filled],
        marker="o",
    )
    ax.set_xlabel("relative position bin in caption")
    ax.set_ylabel("mean object area proportion")
    ax.set_xticks([r.bin_index for r in profile])
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
