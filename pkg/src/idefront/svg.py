"""Self-contained SVG line plots of the CSV files this package writes."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import SchemaError

# every CSV layout the package emits
KNOWN_SCHEMAS = {
    ("x", "p", "q"),
    ("x", "value"),
    ("n", "x_front"),
    ("mu", "lambda", "log_lambda_over_mu"),
    ("xi", "x_mod_L", "U", "V"),
}

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
_STEP_RE = re.compile(r"_(\d+)\.csv$")


@dataclass(frozen=True)
class PlotSpec:
    """What to draw from each CSV.

    Args:
        x: Column for the horizontal axis.
        y: Column for the vertical axis.
        labels: Legend entries, one per input; derived from ``snapshot_<n>``
            file names (or the file stem) when omitted.
        mark_min: Mark the point where ``y`` is smallest on each curve.
    """

    x: str
    y: str
    title: str = ""
    xlabel: str | None = None
    ylabel: str | None = None
    labels: tuple[str, ...] | None = None
    mark_min: bool = False
    width: int = 720
    height: int = 440


def read_columns(path) -> dict[str, np.ndarray]:
    """Read one CSV written by this package into float columns.

    Raises:
        SchemaError: The file is empty, has a header outside
            ``KNOWN_SCHEMAS``, or holds a non-numeric cell.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty CSV")
    header = tuple(h.strip() for h in rows[0])
    if header not in KNOWN_SCHEMAS:
        raise SchemaError(f"{path}: unexpected columns {', '.join(header)}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise SchemaError(f"{path}: header only, no data rows")
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric cell ({exc})") from None
    if data.shape[1] != len(header):
        raise SchemaError(f"{path}: rows do not match the {len(header)}-column header")
    return {name: data[:, i] for i, name in enumerate(header)}


def _label(path: Path) -> str:
    m = _STEP_RE.search(path.name)
    return f"n = {int(m.group(1))}" if m else path.stem


def _ticks(lo: float, hi: float, count: int = 6) -> np.ndarray:
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if abs(v) >= 1e-3 or v == 0 else f"{v:.1e}"


def render_svg(csv_inputs, plot_spec: PlotSpec, out_path=None) -> str:
    """Draw one polyline per CSV input on shared axes.

    Args:
        csv_inputs: Paths of CSV files in a known layout.
        plot_spec: Columns, labels and size.
        out_path: Where to write the SVG; nothing is written when None.

    Returns:
        The SVG document.

    Raises:
        SchemaError: An input is empty, has unexpected columns, or lacks the
            requested ``x``/``y`` columns.
    """
    paths = [Path(p) for p in csv_inputs]
    if not paths:
        raise SchemaError("no CSV inputs to plot")
    spec = plot_spec
    curves = []
    for path in paths:
        cols = read_columns(path)
        for name in (spec.x, spec.y):
            if name not in cols:
                raise SchemaError(f"{path}: no column {name!r}")
        x, y = cols[spec.x], cols[spec.y]
        keep = np.isfinite(x) & np.isfinite(y)
        curves.append((x[keep], y[keep]))
    labels = list(spec.labels) if spec.labels else [_label(p) for p in paths]
    if len(labels) != len(paths):
        raise SchemaError(f"{len(labels)} labels for {len(paths)} inputs")

    xs = np.concatenate([c[0] for c in curves])
    ys = np.concatenate([c[1] for c in curves])
    if xs.size == 0:
        raise SchemaError("no finite points to plot")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad_y = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad_y, y1 + pad_y

    W, H = spec.width, spec.height
    left, right, top, bottom = 70, 150, 40 if spec.title else 20, 55
    pw, ph = W - left - right, H - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>']
    if spec.title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="24" text-anchor="middle" '
                   f'font-size="14">{escape(spec.title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">'
               f'{escape(spec.xlabel or spec.x)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(spec.ylabel or spec.y)}</text>')

    for i, ((x, y), label) in enumerate(zip(curves, labels)):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if spec.mark_min and y.size:
            j = int(np.argmin(y))
            out.append(f'<circle cx="{px(x[j]):.2f}" cy="{py(y[j]):.2f}" r="4" fill="{color}"/>')
            out.append(f'<text x="{px(x[j]) + 6:.2f}" y="{py(y[j]) - 6:.2f}">'
                       f'min {_fmt(float(y[j]))} at {_fmt(float(x[j]))}</text>')
        ly = top + 14 + 18 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    doc = "\n".join(out) + "\n"
    if out_path is not None:
        Path(out_path).write_text(doc)
    return doc
