"""Learning-curve plots as self-contained SVG (no plotting dependencies).

Reads per-seed metrics CSVs, aggregates eval_mean_return across seeds at each
logged step, and draws the cross-seed mean line inside a +/- one standard
deviation band.
"""

from __future__ import annotations

import csv
import os

from .harness import CSV_HEADER

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 20, 50

LINE_COLOR = "#1f6fb4"
BAND_COLOR = "#1f6fb4"


def _read_curve(path: str) -> dict[int, float]:
    with open(path, newline="") as f:
        first = f.readline().rstrip("\n")
        if first != CSV_HEADER:
            raise ValueError(
                f"{path}: header does not match the metrics schema"
            )
        reader = csv.DictReader(f, fieldnames=CSV_HEADER.split(","))
        return {int(r["step"]): float(r["eval_mean_return"]) for r in reader}


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def plot_learning_curves(csv_paths: list[str], out_path: str) -> str:
    """Write an SVG learning curve aggregated over the given seed CSVs."""
    if not csv_paths:
        raise ValueError("need at least one metrics CSV")
    curves = [_read_curve(p) for p in csv_paths]
    steps = sorted(set().union(*curves))
    if not steps:
        raise ValueError("metrics CSVs contain no data rows")

    means: list[float] = []
    stds: list[float] = []
    for s in steps:
        vals = [c[s] for c in curves if s in c]
        mu = sum(vals) / len(vals)
        var = sum((v - mu) ** 2 for v in vals) / len(vals)
        means.append(mu)
        stds.append(var**0.5)

    x_lo, x_hi = 0.0, float(max(steps))
    y_lo = min(m - s for m, s in zip(means, stds))
    y_hi = max(m + s for m, s in zip(means, stds))
    if y_hi == y_lo:
        y_lo -= 1.0
        y_hi += 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        return MARGIN_L + plot_w * (x - x_lo) / (x_hi - x_lo or 1.0)

    def sy(y: float) -> float:
        return MARGIN_T + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]

    # gridlines and tick labels
    for xt in _ticks(x_lo, x_hi):
        px = sx(xt)
        parts.append(
            f'<line x1="{px:.2f}" y1="{MARGIN_T}" x2="{px:.2f}" '
            f'y2="{MARGIN_T + plot_h}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{px:.2f}" y="{MARGIN_T + plot_h + 18}" '
            f'font-size="11" text-anchor="middle">{int(xt)}</text>'
        )
    for yt in _ticks(y_lo, y_hi):
        py = sy(yt)
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{py:.2f}" x2="{MARGIN_L + plot_w}" '
            f'y2="{py:.2f}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{py + 4:.2f}" font-size="11" '
            f'text-anchor="end">{yt:.4g}</text>'
        )

    # +/- 1 std band
    upper = [(sx(s), sy(m + d)) for s, m, d in zip(steps, means, stds)]
    lower = [(sx(s), sy(m - d)) for s, m, d in zip(steps, means, stds)]
    band_pts = " ".join(
        f"{x:.2f},{y:.2f}" for x, y in upper + lower[::-1]
    )
    parts.append(
        f'<polygon points="{band_pts}" fill="{BAND_COLOR}" '
        f'fill-opacity="0.22" stroke="none"/>'
    )

    # mean line with point markers (markers keep single points visible)
    line_pts = " ".join(f"{sx(s):.2f},{sy(m):.2f}" for s, m in zip(steps, means))
    parts.append(
        f'<polyline points="{line_pts}" fill="none" stroke="{LINE_COLOR}" '
        f'stroke-width="2"/>'
    )
    for s, m in zip(steps, means):
        parts.append(
            f'<circle cx="{sx(s):.2f}" cy="{sy(m):.2f}" r="3" '
            f'fill="{LINE_COLOR}"/>'
        )

    # axes and labels
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + plot_h}" '
        f'x2="{MARGIN_L + plot_w}" y2="{MARGIN_T + plot_h}" '
        f'stroke="black" stroke-width="1.5"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{MARGIN_T + plot_h}" stroke="black" stroke-width="1.5"/>'
    )
    parts.append(
        f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="{HEIGHT - 12}" '
        f'font-size="13" text-anchor="middle">environment steps</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_T + plot_h / 2:.2f}" font-size="13" '
        f'text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.2f})">'
        f"evaluation return</text>"
    )
    parts.append("</svg>")

    dirname = os.path.dirname(out_path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(out_path, "w") as f:
        f.write("\n".join(parts) + "\n")
    return out_path
