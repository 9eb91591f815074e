"""Render publication-style figures and tables from experiment CSV files.

Every renderer reads one documented CSV schema and performs no computation
beyond axis scaling.  Output is deterministic: fixed figure size, DPI, fonts
and PNG metadata, so identical inputs give byte-identical files.
"""

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

KINDS = ("trace", "ratio_scan", "energy", "table")

_FIGSIZE = (6.0, 4.0)
_DPI = 120
_METADATA = {"Software": "plotkit"}


class SchemaError(ValueError):
    """Input CSV does not carry the documented columns or has no data rows."""


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: tuple
    output: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header, data = rows[0], rows[1:]
    if not data:
        raise SchemaError(f"{path}: no data rows")
    return header, data


def _require(header, columns, path):
    for col in columns:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    return {c: header.index(c) for c in header}


def _new_axes():
    plt.rcParams.update({
        "font.family": "DejaVu Sans",
        "font.size": 10,
        "svg.hashsalt": "plotkit",
    })
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    return fig, ax


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata=_METADATA)
    plt.close(fig)


def render_trace(inputs, output):
    """figure1.csv: column t plus one fnorm_* series per degree."""
    path = inputs[0]
    header, data = _read_csv(path)
    idx = _require(header, ["t"], path)
    series = [c for c in header if c.startswith("fnorm_")]
    if not series:
        raise SchemaError(f"{path}: missing column 'fnorm_*'")
    t = [float(r[idx["t"]]) for r in data]
    fig, ax = _new_axes()
    for col in series:
        ax.plot(t, [float(r[idx[col]]) for r in data],
                label=col.replace("fnorm_", ""), linewidth=1.2)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("control trace norm on the boundary")
    ax.legend(title="degree")
    ax.grid(True, alpha=0.3)
    _save(fig, output)


def render_ratio_scan(inputs, output):
    """observe_scan.csv rows: boundary-term to energy ratio against degree."""
    fig, ax = _new_axes()
    for path in inputs:
        header, data = _read_csv(path)
        idx = _require(header, ["N", "ratio"], path)
        ns = [int(r[idx["N"]]) for r in data]
        ratios = [float(r[idx["ratio"]]) for r in data]
        ax.plot(ns, ratios, "o", markersize=4, alpha=0.8)
    ax.set_xlabel("polynomial degree N")
    ax.set_ylabel("observed ratio")
    ax.grid(True, alpha=0.3)
    _save(fig, output)


def render_energy(inputs, output):
    """energy_trace.csv: t, energy, drift_rel."""
    path = inputs[0]
    header, data = _read_csv(path)
    idx = _require(header, ["t", "energy", "drift_rel"], path)
    t = [float(r[idx["t"]]) for r in data]
    drift = [max(float(r[idx["drift_rel"]]), 1e-18) for r in data]
    fig, ax = _new_axes()
    ax.semilogy(t, drift, linewidth=1.2)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("relative energy drift")
    ax.grid(True, alpha=0.3)
    _save(fig, output)


def render_table(inputs, output):
    """table1.csv -> markdown table with columns N, |f|, |g|."""
    path = inputs[0]
    header, data = _read_csv(path)
    idx = _require(header, ["N", "f_norm", "g_norm"], path)
    lines = ["| N | \\|f^N\\| | \\|g^N\\| |", "| --- | --- | --- |"]
    for r in data:
        fn = float(r[idx["f_norm"]])
        gn = float(r[idx["g_norm"]])
        lines.append(f"| {r[idx['N']]} | {fn:.3e} | {gn:.3e} |")
    with open(output, "w") as fh:
        fh.write("\n".join(lines) + "\n")


_RENDERERS = {
    "trace": render_trace,
    "ratio_scan": render_ratio_scan,
    "energy": render_energy,
    "table": render_table,
}


def render(job: PlotJob):
    """Dispatch one job; raises SchemaError on malformed input."""
    _RENDERERS[job.kind](job.inputs, job.output)
    return job.output
