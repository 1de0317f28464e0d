"""CSV and SVG writers for evaluation and analysis outputs."""

from __future__ import annotations

import csv
import io
import itertools
from typing import Dict, Mapping, Sequence

import numpy as np

from ..errors import ZeroVariance
from ..synthvol import atomic_write_bytes
from .analysis import AXIS_NAMES
from .metrics import METRIC_NAMES, MetricsRecord, paired_t_test
from .probe import summarize

FOLD_COLUMNS = ("model", "fold") + METRIC_NAMES
TTEST_COLUMNS = ("model_a", "model_b", "metric", "t", "p")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def metrics_csv(model: str, records: Sequence[MetricsRecord]) -> str:
    """One row per fold, then a ``summary`` row holding ``mean±std`` per metric."""
    rows = [[model, r.fold] + [repr(float(getattr(r, m))) for m in METRIC_NAMES] for r in records]
    stats = summarize(records, METRIC_NAMES)
    rows.append([model, "summary"] + [f"{stats[m][0]!r}±{stats[m][1]!r}" for m in METRIC_NAMES])
    return _csv_text(FOLD_COLUMNS, rows)


def write_metrics_csv(path, model, records):
    _write(path, metrics_csv(model, records))


def read_metrics_csv(path) -> Dict[str, np.ndarray]:
    """Per-metric fold columns of a metrics CSV (summary row skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh) if r["fold"] != "summary"]
    return {m: np.array([float(r[m]) for r in rows]) for m in METRIC_NAMES}


def ttest_rows(fold_metrics: Mapping[str, Mapping[str, np.ndarray]]):
    """Paired t-tests on fold columns for every model pair and metric.

    A metric whose paired differences are all equal gets NaN for t and p.
    """
    rows = []
    for a, b in itertools.combinations(fold_metrics, 2):
        for m in METRIC_NAMES:
            try:
                t, p = paired_t_test(fold_metrics[a][m], fold_metrics[b][m])
            except ZeroVariance:
                t, p = float("nan"), float("nan")
            rows.append((a, b, m, t, p))
    return rows


def write_ttest_csv(path, fold_metrics):
    rows = [(a, b, m, repr(t), repr(p)) for a, b, m, t, p in ttest_rows(fold_metrics)]
    _write(path, _csv_text(TTEST_COLUMNS, rows))


def write_quantiles_csv(path, stats: Mapping[int, float]):
    _write(path, _csv_text(("quantile", "abs_error"), [(q, repr(v)) for q, v in stats.items()]))


def write_correlation_csv(path, corr):
    corr = np.asarray(corr)
    rows = [[f"PC{i + 1}"] + [repr(float(v)) for v in row] for i, row in enumerate(corr)]
    _write(path, _csv_text(("component",) + AXIS_NAMES[: corr.shape[1]], rows))


def scatter_svg(projections, centers, cell: int = 180, pad: int = 24) -> str:
    """Grid of scatter plots: row i plots PC_i (y) against spatial axis j (x)."""
    p = np.asarray(projections, dtype=np.float64)
    c = np.asarray(centers, dtype=np.float64)
    k, n_axes = p.shape[1], c.shape[1]
    width, height = n_axes * (cell + pad) + pad, k * (cell + pad) + pad
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]

    def scale(v):
        lo, hi = v.min(), v.max()
        return (v - lo) / (hi - lo) if hi > lo else np.full_like(v, 0.5)

    for i in range(k):
        y = 1.0 - scale(p[:, i])
        for j in range(n_axes):
            x = scale(c[:, j])
            x0, y0 = pad + j * (cell + pad), pad + i * (cell + pad)
            out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="none" stroke="#999"/>')
            label = AXIS_NAMES[j] if j < len(AXIS_NAMES) else f"axis{j}"
            out.append(f'<text x="{x0 + 2}" y="{y0 - 4}">PC{i + 1} vs {label}</text>')
            for xv, yv in zip(x, y):
                out.append(f'<circle cx="{x0 + xv * cell:.1f}" cy="{y0 + yv * cell:.1f}" r="1.5" fill="#1f5fa8" fill-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_scatter_svg(path, projections, centers):
    _write(path, scatter_svg(projections, centers))
