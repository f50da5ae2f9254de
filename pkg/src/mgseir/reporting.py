"""File outputs: atomic writes, CSV/JSON tables, run manifests and minimal SVG charts."""

from __future__ import annotations

import datetime as _dt
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .optimize import FrontierPoint


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def atomic_write(path: str | Path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: str | Path, obj) -> Path:
    # json uses repr for floats, which round-trips exactly
    return atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n")


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def frontier_header(points: Sequence[FrontierPoint]) -> list[str]:
    width = max((p.policy.levels.size for p in points), default=0)
    return ["chi", "mortality", "econ_loss", "econ_loss_pct_gdp", "objective", "evals", "seed"] + [
        f"level_{i}" for i in range(width)
    ]


def frontier_rows(points: Sequence[FrontierPoint]) -> list[list]:
    return [
        [p.chi, p.mortality, p.econ_loss, p.econ_loss_pct_gdp, p.objective, p.evaluations, p.seed]
        + [float(v) for v in p.policy.vector]
        for p in points
    ]


def frontier_csv(points: Sequence[FrontierPoint]) -> str:
    return csv_text(frontier_header(points), frontier_rows(points))


def read_frontier_csv(path: str | Path) -> list[dict[str, float]]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, line.split(",")))) for line in lines[1:] if line]


def point_dict(p: FrontierPoint) -> dict[str, Any]:
    return {
        "chi": p.chi,
        "mortality": p.mortality,
        "econ_loss": p.econ_loss,
        "econ_loss_pct_gdp": p.econ_loss_pct_gdp,
        "objective": p.objective,
        "penalty": p.penalty,
        "evaluations": p.evaluations,
        "converged": p.converged,
        "seed": p.seed,
        "policy": p.policy.to_dict(),
    }


@dataclass
class RunManifest:
    command: str
    options: dict[str, Any]
    params: dict[str, Any]
    scenarios: list[str] = field(default_factory=list)
    seed: int | None = None
    dt: float | None = None
    chi_grid: list[float] | None = None
    outputs: list[str] = field(default_factory=list)
    config_path: str | None = None
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())
    version: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config_path": self.config_path,
            "params": self.params,
            "scenarios": self.scenarios,
            "seed": self.seed,
            "dt": self.dt,
            "chi_grid": self.chi_grid,
            "options": self.options,
            "outputs": self.outputs,
            "timestamp": self.timestamp,
            "version": self.version,
        }


# -- SVG ---------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    *,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    step: bool = False,
    hline: float | None = None,
    markers: Sequence[tuple[str, float, float]] = (),
    ylim: tuple[float, float] | None = None,
    width: int = 640,
    height: int = 420,
) -> str:
    """Static line chart with axes and a legend; ``step`` draws post-step lines."""
    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([np.asarray(s[1], float) for s in series]) if series else np.array([0.0, 1.0])
    ys = np.concatenate([np.asarray(s[2], float) for s in series]) if series else np.array([0.0, 1.0])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    if xs.size == 0:
        xs = np.array([0.0, 1.0])
    if ys.size == 0:
        ys = np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = ylim if ylim else (float(min(ys.min(), hline if hline is not None else ys.min())),
                                float(max(ys.max(), hline if hline is not None else ys.max())))
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    if not ylim:
        y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{top + ph}" x2="{sx(t):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{sy(t):.2f}" x2="{left}" y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    if hline is not None:
        out.append(
            f'<line x1="{left}" y1="{sy(hline):.2f}" x2="{left + pw}" y2="{sy(hline):.2f}" '
            'stroke="gray" stroke-dasharray="4 3"/>'
        )
    for n, (label, x, y) in enumerate(series):
        color = PALETTE[n % len(PALETTE)]
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        pts = []
        for i in range(len(x)):
            if not (np.isfinite(x[i]) and np.isfinite(y[i])):
                continue
            if step and pts and i > 0:
                pts.append(f"{sx(x[i]):.2f},{sy(y[i - 1]):.2f}")
            pts.append(f"{sx(x[i]):.2f},{sy(y[i]):.2f}")
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{" ".join(pts)}"/>')
        ly = top + 14 + 18 * n
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}">{escape(label)}</text>')
    for n, (label, x, y) in enumerate(markers):
        color = PALETTE[n % len(PALETTE)]
        out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="5" fill="{color}" stroke="black"/>')
        if label:
            out.append(f'<text x="{sx(x) + 7:.2f}" y="{sy(y) - 7:.2f}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trajectory_charts(csv_path: str | Path) -> dict[str, str]:
    """Uninfected share, R(t) and policy charts rendered from a written trajectory CSV."""
    lines = Path(csv_path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:] if line])
    col = {name: data[:, i] for i, name in enumerate(header)}
    t = col["t"]
    labels = {"y": "young", "m": "middle", "s": "senior"}
    uninfected = []
    for sfx, label in labels.items():
        total = sum(col[f"{c}_{sfx}"] for c in "SEIRD")
        share = np.divide(col[f"S_{sfx}"], total, out=np.ones_like(total), where=total > 0)
        uninfected.append((label, t[:-1], share[:-1]))  # last row is post-vaccine
    return {
        "uninfected.svg": line_chart(
            uninfected, title="Share uninfected", xlabel="day", ylabel="S / N", ylim=(0.0, 1.05)
        ),
        "rt.svg": line_chart(
            [("R(t)", t[:-1], col["Rt"][:-1])], title="Reproduction number", xlabel="day", ylabel="R(t)", hline=1.0
        ),
        "policy.svg": line_chart(
            [(label, t, col[f"L_{sfx}"]) for sfx, label in labels.items()],
            title="Shielding level",
            xlabel="day",
            ylabel="L",
            step=True,
            ylim=(-0.02, 1.02),
        ),
    }


def frontier_chart(curves: dict[str, Sequence[dict]], safety: dict[str, tuple[float, float]] | None = None) -> str:
    """Loss (percent of annual GDP) against mortality (percent), one polyline per family."""
    series = []
    for name, rows in curves.items():
        rows = sorted(rows, key=lambda r: r["mortality"])
        series.append((name, [100 * r["mortality"] for r in rows], [r["econ_loss_pct_gdp"] for r in rows]))
    markers = [(f"{name} cap", 100 * m, g) for name, (m, g) in (safety or {}).items()]
    return line_chart(
        series,
        title="Efficient frontier",
        xlabel="mortality (% of population)",
        ylabel="economic loss (% of annual GDP)",
        markers=markers,
    )
