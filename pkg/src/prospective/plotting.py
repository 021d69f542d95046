"""Self-contained SVG line plots of mean risk with standard-error bands."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
BAYES_COLOR = "#1f3fbf"
CHANCE_COLOR = "#d4a017"


@dataclass
class Series:
    name: str
    t: list
    mean: list
    stderr: list


@dataclass(frozen=True)
class Frame:
    """Maps data coordinates to pixels; the y axis always spans [y_min, y_max]."""

    width: int = 640
    height: int = 400
    left: int = 60
    right: int = 170
    top: int = 40
    bottom: int = 50
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    @property
    def plot_w(self) -> float:
        return self.width - self.left - self.right

    @property
    def plot_h(self) -> float:
        return self.height - self.top - self.bottom

    def x(self, v) -> np.ndarray:
        span = self.x_max - self.x_min or 1.0
        return self.left + (np.asarray(v, dtype=float) - self.x_min) / span * self.plot_w

    def y(self, v) -> np.ndarray:
        v = np.clip(np.asarray(v, dtype=float), self.y_min, self.y_max)
        return self.top + (self.y_max - v) / (self.y_max - self.y_min) * self.plot_h


def _pts(xs, ys) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))


def svg_plot(series: list[Series], bayes: float | None = 0.0, chance: float | None = 0.5, title: str = "",
             xlabel: str = "t", ylabel: str = "prospective risk") -> str:
    """Mean curves with +/- one standard-error bands and dashed Bayes/chance lines."""
    series = [s for s in series if len(s.t)]
    if not series:
        raise ValueError("nothing to plot")
    ts = np.concatenate([np.asarray(s.t, dtype=float) for s in series])
    f = Frame(x_min=float(ts.min()), x_max=float(ts.max()))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{f.width}" height="{f.height}" viewBox="0 0 {f.width} {f.height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{f.width}" height="{f.height}" fill="white"/>',
        f'<text x="{f.width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    x0, x1 = f.left, f.left + f.plot_w
    y0, y1 = f.top + f.plot_h, f.top
    out.append(f'<rect class="frame" x="{x0}" y="{y1}" width="{f.plot_w}" height="{f.plot_h}" fill="none" stroke="black"/>')
    for v in np.linspace(f.y_min, f.y_max, 6):
        y = float(f.y(v))
        out.append(f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.1f}</text>')
    for v in np.linspace(f.x_min, f.x_max, 5):
        x = float(f.x(v))
        out.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{y0 + 18}" text-anchor="middle">{v:g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{f.height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>')

    legend = []
    for i, s in enumerate(series):
        color = COLORS[i % len(COLORS)]
        t = np.asarray(s.t, dtype=float)
        m = np.asarray(s.mean, dtype=float)
        se = np.asarray(s.stderr, dtype=float)
        if np.any(se > 0):
            upper = _pts(f.x(t), f.y(m + se))
            lower = _pts(f.x(t[::-1]), f.y((m - se)[::-1]))
            out.append(f'<polygon class="band" points="{upper} {lower}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="mean" data-name="{escape(s.name)}" points="{_pts(f.x(t), f.y(m))}" fill="none" stroke="{color}" stroke-width="2"/>')
        legend.append((s.name, color, None))
    for name, value, color in (("Bayes", bayes, BAYES_COLOR), ("chance", chance, CHANCE_COLOR)):
        if value is None:
            continue
        y = float(f.y(value))
        out.append(f'<line class="reference" data-name="{name}" x1="{x0}" y1="{y:.2f}" x2="{x1}" y2="{y:.2f}" stroke="{color}" stroke-width="1.5" stroke-dasharray="6,4"/>')
        legend.append((name, color, "6,4"))
    for i, (name, color, dash) in enumerate(legend):
        ly = f.top + 10 + 18 * i
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{x1 + 12}" y1="{ly}" x2="{x1 + 36}" y2="{ly}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{x1 + 42}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_curves_csv(text: str, bayes: float | None = 0.0, chance: float | None = 0.5, title: str = "") -> str:
    """Plot a ``curves.csv`` file: one series per learner, averaged over seeds."""
    from .evaluation import read_curves_csv, summarize

    rows = read_curves_csv(text)
    if not rows:
        raise ValueError("curves file has no rows")
    summary = summarize(rows)
    series = []
    for learner in sorted({r["learner"] for r in summary}):
        pts = [r for r in summary if r["learner"] == learner]
        series.append(Series(learner, [p["t"] for p in pts], [p["mean"] for p in pts], [p["stderr"] for p in pts]))
    return svg_plot(series, bayes, chance, title)


def plot(csv_path, svg_path, bayes: float | None = 0.0, chance: float | None = 0.5, title: str = "") -> Path:
    """Read ``csv_path`` and write the SVG figure to ``svg_path``."""
    svg = plot_curves_csv(Path(csv_path).read_text(), bayes, chance, title)
    out = Path(svg_path)
    out.write_text(svg)
    return out
