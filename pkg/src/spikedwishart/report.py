"""File writers for the CLI: delimited tables, JSON, and SVG figures.

Matplotlib is pinned to the Agg backend with a fixed ``svg.hashsalt``,
and figures are saved with the date metadata stripped, so every artifact
is byte-identical across runs of the same seeded command. Floats in
delimited output are written with ``repr`` and therefore round-trip
exactly.
"""

from __future__ import annotations

import csv
import json

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "spikedwishart"

import matplotlib.pyplot as plt
import numpy as np

from .stats import histogram

__all__ = [
    "write_table_csv",
    "write_table_json",
    "write_json",
    "save_histogram_svg",
    "save_overlay_histogram_svg",
    "save_loglog_svg",
    "save_fit_overlay_svg",
]


def write_table_csv(path, header, rows) -> None:
    """CSV with a header row; float cells are written with full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                             else v for v in row])


def write_table_json(path, header, rows) -> None:
    """The same table as a JSON object: list of column names plus rows."""
    payload = {
        "columns": list(header),
        "rows": [[float(v) if isinstance(v, (float, np.floating)) else v
                  for v in row] for row in rows],
    }
    write_json(path, payload)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def _save(fig, path) -> None:
    fig.tight_layout()
    # a None date keeps repeated renders byte-identical
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def save_histogram_svg(values, bins: int, path, title: str, xlabel: str) -> None:
    counts, edges = histogram(values, bins)
    fig, ax = _new_axes(title, xlabel, "count")
    ax.stairs(counts, edges, fill=True, color="#4878d0")
    _save(fig, path)


def save_overlay_histogram_svg(a, b, labels, bins: int, path, title: str,
                               xlabel: str) -> None:
    """Two histograms on shared edges, for eyeballing distribution match."""
    both = np.concatenate([np.asarray(a, float).ravel(),
                           np.asarray(b, float).ravel()])
    _, edges = histogram(both, bins)
    counts_a, _ = histogram(a, edges)
    counts_b, _ = histogram(b, edges)
    fig, ax = _new_axes(title, xlabel, "count")
    ax.stairs(counts_a, edges, fill=True, alpha=0.55, color="#4878d0",
              label=labels[0])
    ax.stairs(counts_b, edges, fill=True, alpha=0.55, color="#d65f5f",
              label=labels[1])
    ax.legend()
    _save(fig, path)


def save_loglog_svg(series, path, title: str, xlabel: str, ylabel: str) -> None:
    """``series`` maps a label to an (x, y) pair; both axes logarithmic."""
    fig, ax = _new_axes(title, xlabel, ylabel)
    for label, (x, y) in series.items():
        ax.loglog(x, y, marker="o", label=label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def save_fit_overlay_svg(target, fitted, path, title: str) -> None:
    idx = np.arange(1, len(target) + 1)
    fig, ax = _new_axes(title, "singular value index", "mean singular value")
    ax.plot(idx, target, "o", markersize=3.5, color="#4878d0", label="target")
    ax.plot(idx[:len(fitted)], fitted, "-", color="#d65f5f", label="fitted mean")
    ax.legend()
    _save(fig, path)
