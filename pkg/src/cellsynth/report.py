"""Report rendering: JSON + delimited tables + matplotlib figures on disk."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import PlacementComparison, StatsReport


def _hist_figure(path: Path, real: np.ndarray, generated: np.ndarray, xlabel: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bins = np.histogram_bin_edges(np.concatenate([real, generated]), bins=30)
    ax.hist(real, bins=bins, alpha=0.6, label="real", color="tab:blue")
    ax.hist(generated, bins=bins, alpha=0.6, label="generated", color="tab:orange")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_stats_report(out_dir, report: StatsReport) -> list[Path]:
    """Write stats.{json,csv,txt} and distribution figures; returns the paths."""
    out_dir = Path(out_dir)
    figures = out_dir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "stats.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    written.append(json_path)

    csv_path = out_dir / "stats.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "real", "generated"])
        writer.writerow(["median_area", report.real.median_area, report.generated.median_area])
        writer.writerow(["iqr_area", report.real.iqr_area, report.generated.iqr_area])
        writer.writerow(
            ["median_aspect_ratio", report.real.median_aspect_ratio, report.generated.median_aspect_ratio]
        )
        writer.writerow(
            ["iqr_aspect_ratio", report.real.iqr_aspect_ratio, report.generated.iqr_aspect_ratio]
        )
    written.append(csv_path)

    adherence_path = out_dir / "adherence.csv"
    with open(adherence_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entry", "prior_adherence"])
        for i, value in enumerate(report.adherence):
            writer.writerow([i, value])
    written.append(adherence_path)

    txt_path = out_dir / "stats.txt"
    txt_path.write_text(report.table() + "\n")
    written.append(txt_path)

    _hist_figure(figures / "area_hist.png", report.real_areas, report.generated_areas, "blob area [px]")
    _hist_figure(
        figures / "aspect_ratio_hist.png", report.real_ratios, report.generated_ratios, "aspect ratio"
    )
    written.extend([figures / "area_hist.png", figures / "aspect_ratio_hist.png"])

    if report.adherence:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(report.adherence, "o-", ms=3)
        ax.set_xlabel("entry")
        ax.set_ylabel("prior adherence")
        ax.set_ylim(-1, 1)
        fig.tight_layout()
        fig.savefig(figures / "adherence.png", dpi=120)
        plt.close(fig)
        written.append(figures / "adherence.png")
    return written


def write_comparison_report(out_dir, comparison: PlacementComparison) -> list[Path]:
    """Write compare.{json,csv,txt} and a paired adherence figure."""
    out_dir = Path(out_dir)
    figures = out_dir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "compare.json"
    json_path.write_text(json.dumps(comparison.to_dict(), indent=2, sort_keys=True))
    written.append(json_path)

    csv_path = out_dir / "compare.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["seed", "greedy_adherence", "random_adherence", "greedy_placed", "random_placed"]
        )
        for row in comparison.rows:
            writer.writerow(
                [
                    row["seed"],
                    row["greedy_adherence"],
                    row["random_adherence"],
                    row["greedy_placed"],
                    row["random_placed"],
                ]
            )
    written.append(csv_path)

    lines = [
        f"greedy mean adherence: {comparison.greedy_mean:.4f}",
        f"random mean adherence: {comparison.random_mean:.4f}",
        f"one-sided sign test p: {comparison.p_value:.5f}",
    ]
    txt_path = out_dir / "compare.txt"
    txt_path.write_text("\n".join(lines) + "\n")
    written.append(txt_path)

    greedy = [r["greedy_adherence"] for r in comparison.rows]
    rand = [r["random_adherence"] for r in comparison.rows]
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.scatter(rand, greedy, s=18)
    lo = min(min(rand), min(greedy))
    hi = max(max(rand), max(greedy))
    pad = 0.05 * (hi - lo + 1e-9)
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], "k--", lw=1)
    ax.set_xlabel("random weighted adherence")
    ax.set_ylabel("greedy adherence")
    fig.tight_layout()
    fig.savefig(figures / "adherence_scatter.png", dpi=120)
    plt.close(fig)
    written.append(figures / "adherence_scatter.png")
    return written
