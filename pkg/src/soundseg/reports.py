"""Report rendering: JSON, aligned text tables, CSV, and figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def metrics_table(report: dict) -> str:
    """Aligned text table: one row per class, then the mean."""
    rows = [("class", "M_J", "M_F", "n")]
    for cls, vals in sorted(report.get("per_class", {}).items()):
        rows.append((cls, f"{vals['miou']:.4f}", f"{vals['mf']:.4f}", str(vals["num_samples"])))
    if report.get("miou") is not None:
        rows.append(("mean", f"{report['miou']:.4f}", f"{report['mf']:.4f}", str(report["num_samples"])))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def write_metrics_csv(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "miou", "mf", "num_samples"])
        for cls, vals in sorted(report.get("per_class", {}).items()):
            writer.writerow([cls, vals["miou"], vals["mf"], vals["num_samples"]])
        if report.get("miou") is not None:
            writer.writerow(["mean", report["miou"], report["mf"], report["num_samples"]])


def render_class_bar_figure(report: dict, path, title: str = "Per-class segmentation quality") -> None:
    classes = sorted(report.get("per_class", {}))
    if not classes:
        return
    miou = [report["per_class"][c]["miou"] for c in classes]
    mf = [report["per_class"][c]["mf"] for c in classes]
    x = range(len(classes))
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(classes)), 3.2))
    ax.bar([i - 0.18 for i in x], miou, width=0.36, label="M_J")
    ax.bar([i + 0.18 for i in x], mf, width=0.36, label="M_F")
    ax.set_xticks(list(x))
    ax.set_xticklabels(classes, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["fraction", "arm", "miou", "mf", "num_samples"])
        writer.writeheader()
        writer.writerows(rows)


def sweep_table(rows) -> str:
    header = ("fraction", "arm", "M_J", "M_F")
    body = [
        (f"{r['fraction']:.0%}", r["arm"], f"{r['miou']:.4f}", f"{r['mf']:.4f}")
        for r in rows
    ]
    all_rows = [header] + body
    widths = [max(len(r[i]) for r in all_rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in all_rows]
    return "\n".join(lines) + "\n"


def render_sweep_figure(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for arm, style in (("with_pretraining", "o-"), ("without_pretraining", "s--")):
        pts = sorted((r["fraction"], r["miou"]) for r in rows if r["arm"] == arm)
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], style, label=arm.replace("_", " "))
    ax.set_xlabel("fraction of real training data")
    ax.set_ylabel("M_J")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
