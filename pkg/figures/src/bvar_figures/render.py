"""Renderers for the five figure kinds.

Every renderer validates its input CSV against the documented schema and
fails with a column-level message on mismatch. Rendering never mutates
inputs and writes deterministic PNG bytes, so reruns are idempotent.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .jobs import FigureJob

__all__ = ["render", "SchemaError"]

_DPI = 120


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


def _read_csv(path, required_first_column=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if required_first_column and header[0] != required_first_column:
        raise SchemaError(
            f"{path}: first column must be {required_first_column!r}, got {header[0]!r}"
        )
    return header, body


def _numeric_block(path, header, body, skip=1):
    try:
        return np.array([[float(v) for v in row[skip:]] for row in body])
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: non-numeric value in data columns: {exc}") from exc


def _panel(path):
    header, body = _read_csv(path, required_first_column="window")
    if len(header) < 2:
        raise SchemaError(f"{path}: need at least one model column")
    labels = [r[0] for r in body]
    values = _numeric_block(path, header, body)
    return labels, header[1:], values


def _save(fig, output):
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)


def _render_cumulative_lbf(job):
    labels, models, lpl = _panel(job.inputs["panel"])
    benchmark = job.options.get("benchmark", models[0])
    if benchmark not in models:
        raise SchemaError(
            f"benchmark column {benchmark!r} not among models {models}"
        )
    b = models.index(benchmark)
    cum = np.cumsum(lpl - lpl[:, [b]], axis=0)
    fig, ax = plt.subplots(figsize=(9, 5))
    for j, name in enumerate(models):
        if j == b:
            ax.axhline(0.0, color="0.4", lw=1.0, label=f"{name} (benchmark)")
        else:
            ax.plot(range(len(labels)), cum[:, j], lw=1.4, label=name)
    _date_ticks(ax, labels)
    ax.set_ylabel(f"cumulative log Bayes factor vs {benchmark}")
    ax.legend(loc="best", fontsize=8)
    _save(fig, job.output)
    return cum


def _render_dma_weights(job):
    labels, models, w = _panel(job.inputs["weights"])
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-8):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise SchemaError(
            f"{job.inputs['weights']}: weight rows must sum to 1; row "
            f"{bad + 2} ({labels[bad]}) sums to {sums[bad]:.6f}"
        )
    fig, ax = plt.subplots(figsize=(9, 5))
    ax.stackplot(range(len(labels)), w.T, labels=models, lw=0)
    _date_ticks(ax, labels)
    ax.set_ylim(0, 1)
    ax.set_ylabel("model weight")
    ax.legend(loc="upper left", fontsize=8, ncol=2)
    _save(fig, job.output)
    return w


def _render_prior_density(job):
    path = job.inputs["densities"]
    header, body = _read_csv(path)
    if header != ["family", "phi", "density"]:
        raise SchemaError(f"{path}: expected header family,phi,density, got {header}")
    series = {}
    for row in body:
        try:
            series.setdefault(row[0], []).append((float(row[1]), float(row[2])))
        except ValueError as exc:
            raise SchemaError(f"{path}: non-numeric phi/density: {exc}") from exc
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
    for fam, pts in sorted(series.items()):
        arr = np.array(sorted(pts))
        ax1.plot(arr[:, 0], arr[:, 1], label=fam, lw=1.4)
        ax2.loglog(arr[:, 0], arr[:, 1], label=fam, lw=1.4)
    ax1.set_xlabel("coefficient")
    ax1.set_ylabel("marginal prior density")
    ax1.set_xlim(0, min(2.0, ax1.get_xlim()[1]))
    ax2.set_xlabel("coefficient (log scale)")
    ax1.legend(fontsize=8)
    _save(fig, job.output)
    return series


def _render_induced_qq(job):
    path = job.inputs["qq"]
    header, body = _read_csv(path)
    if header != ["column", "theoretical", "empirical"]:
        raise SchemaError(
            f"{path}: expected header column,theoretical,empirical, got {header}"
        )
    cols = {}
    for row in body:
        try:
            cols.setdefault(int(row[0]), []).append((float(row[1]), float(row[2])))
        except ValueError as exc:
            raise SchemaError(f"{path}: non-numeric QQ row: {exc}") from exc
    fig, axes = plt.subplots(1, len(cols), figsize=(4 * len(cols), 4), squeeze=False)
    for ax, (cidx, pts) in zip(axes[0], sorted(cols.items())):
        arr = np.array(pts)
        lim = np.quantile(np.abs(arr), 0.999)
        ax.plot(arr[:, 0], arr[:, 1], ".", ms=3)
        ax.plot([-lim, lim], [-lim, lim], "k--", lw=0.8)
        ax.set_title(f"coefficient column {cidx}")
        ax.set_xlabel("normal quantile")
        ax.set_ylabel("induced-prior quantile")
    _save(fig, job.output)
    return cols


_LABEL_RE = re.compile(r"^(?P<eq>.+?)<-(?:(?P<src>.+?)\[lag(?P<lag>\d+)\]|const)$")


def _render_coefficient_heatmap(job):
    path = job.inputs["summary"]
    header, body = _read_csv(path, required_first_column="coefficient")
    need = {"median", "q25", "q75"}
    if not need.issubset(header):
        raise SchemaError(f"{path}: summary must contain columns {sorted(need)}")
    med_i, q25_i, q75_i = header.index("median"), header.index("q25"), header.index("q75")
    cells = []
    for row in body:
        m = _LABEL_RE.match(row[0])
        if not m:
            raise SchemaError(f"{path}: unparseable coefficient label {row[0]!r}")
        cells.append(
            (
                m.group("eq"),
                m.group("src") or "const",
                int(m.group("lag") or 0),
                float(row[med_i]),
                float(row[q75_i]) - float(row[q25_i]),
            )
        )
    eqs = sorted({c[0] for c in cells})
    lags = sorted({c[2] for c in cells if c[2] > 0})
    srcs = sorted({c[1] for c in cells if c[1] != "const"})
    med = np.full((len(lags) * len(srcs), len(eqs)), np.nan)
    iqr = np.full_like(med, np.nan)
    for eq, src, lag, m_, w in cells:
        if lag == 0:
            continue
        r = lags.index(lag) * len(srcs) + srcs.index(src)
        med[r, eqs.index(eq)] = m_
        iqr[r, eqs.index(eq)] = w
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.5))
    vmax = np.nanmax(np.abs(med)) or 1.0
    im1 = ax1.imshow(med, cmap="RdBu_r", vmin=-vmax, vmax=vmax, aspect="auto")
    ax1.set_title("posterior median")
    im2 = ax2.imshow(iqr, cmap="viridis", aspect="auto")
    ax2.set_title("posterior IQR")
    for ax in (ax1, ax2):
        ax.set_xticks(range(len(eqs)), eqs, rotation=90, fontsize=7)
        ax.set_yticks(
            range(len(lags) * len(srcs)),
            [f"{s}[lag{r}]" for r in lags for s in srcs],
            fontsize=7,
        )
    fig.colorbar(im1, ax=ax1, shrink=0.8)
    fig.colorbar(im2, ax=ax2, shrink=0.8)
    _save(fig, job.output)
    return med, iqr


def _date_ticks(ax, labels, max_ticks=12):
    step = max(1, len(labels) // max_ticks)
    idx = list(range(0, len(labels), step))
    ax.set_xticks(idx, [labels[i] for i in idx], rotation=45, fontsize=7)


_RENDERERS = {
    "cumulative-lbf": _render_cumulative_lbf,
    "dma-weights": _render_dma_weights,
    "prior-density": _render_prior_density,
    "induced-qq": _render_induced_qq,
    "coefficient-heatmap": _render_coefficient_heatmap,
}


def render(job: FigureJob):
    """Render one job to its output path; returns the plotted values."""
    for key, p in job.inputs.items():
        if not Path(p).is_file():
            raise FileNotFoundError(f"input {key!r} not found: {p}")
    return _RENDERERS[job.kind](job)
