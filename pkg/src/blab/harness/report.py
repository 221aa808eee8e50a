"""CSV tables and figures for experiment output.

CSV files carry the full config as '#' comment lines ahead of the RFC-4180
body, floats are written with shortest-roundtrip repr, and nothing
time-dependent enters the bytes: identical config means identical file.
"""

from __future__ import annotations

import csv
import io
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, complex):
        return repr(value)
    return value


def render_csv(meta, header, rows) -> bytes:
    buf = io.StringIO()
    for key, value in meta:
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue().encode()


def write_csv(path, meta, header, rows) -> bytes:
    payload = render_csv(meta, header, rows)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(payload)
    return payload


def line_plot(path, xs, series, xlabel, ylabel, title, logx=False, logy=False, hashsalt=""):
    """Render a labelled line plot to an SVG file."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with plt.rc_context({"svg.hashsalt": hashsalt or "blab"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, ys in series:
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=str(label))
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
