"""Deterministic experimental-vs-predicted scatter plots written as plain SVG."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

SPLIT_COLORS = {"train": "#1f77b4", "validation": "#ff7f0e", "test": "#2ca02c"}
SIZE, PAD = 400, 50


def _f(v: float) -> str:
    return f"{v:.2f}"


def scatter_svg(points: Sequence[tuple[str, float, float]], title: str, lo: float, hi: float,
                band: float | None = None, unit: str = "") -> str:
    """``points`` are (split, experimental, predicted). ``band`` draws dashed lines at y = x +- band."""
    if hi <= lo:
        hi = lo + 1.0
    span = SIZE - 2 * PAD

    def px(v):
        return PAD + (v - lo) / (hi - lo) * span

    def py(v):
        return SIZE - PAD - (v - lo) / (hi - lo) * span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="{SIZE / 2}" y="24" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{PAD}" y="{PAD}" width="{span}" height="{span}" fill="none" stroke="black"/>',
        f'<text x="{SIZE / 2}" y="{SIZE - 12}" text-anchor="middle" font-size="12">experimental {unit}</text>',
        f'<text x="14" y="{SIZE / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {SIZE / 2})">predicted {unit}</text>',
        f'<line class="identity" x1="{_f(px(lo))}" y1="{_f(py(lo))}" x2="{_f(px(hi))}" y2="{_f(py(hi))}" '
        f'stroke="black"/>',
    ]
    if band is not None:
        for sign in (1, -1):
            # clip y = x + sign*band to the plot window
            x0 = max(lo, lo - sign * band)
            x1 = min(hi, hi - sign * band)
            out.append(f'<line class="band" x1="{_f(px(x0))}" y1="{_f(py(x0 + sign * band))}" '
                       f'x2="{_f(px(x1))}" y2="{_f(py(x1 + sign * band))}" stroke="gray" '
                       f'stroke-dasharray="4 3"/>')
    for split, e, p in points:
        color = SPLIT_COLORS.get(split, "black")
        pc = min(max(p, lo), hi)
        out.append(f'<circle cx="{_f(px(e))}" cy="{_f(py(pc))}" r="3" fill="{color}" fill-opacity="0.8"/>')
    for i, (split, color) in enumerate(SPLIT_COLORS.items()):
        y = PAD + 14 + 16 * i
        out.append(f'<circle cx="{PAD + 10}" cy="{y - 4}" r="4" fill="{color}"/>')
        out.append(f'<text x="{PAD + 20}" y="{y}" font-size="11">{split}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report_plots(report, out_dir: str | Path) -> list[Path]:
    """One SVG per target; film disintegration plots carry the +-10 s band."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    ofdf = report.task_kind == "ofdf"
    for j, target in enumerate(report.target_names):
        pts = [(s, r["experimental"][j], r["predicted"][j])
               for s in ("train", "validation", "test") for r in report.splits[s].records]
        if ofdf:
            hi = max([100.0] + [max(e, p) for _, e, p in pts])
            svg = scatter_svg(pts, f"{report.model} {target}", 0.0, hi, band=10.0, unit="(s)")
        else:
            svg = scatter_svg(pts, f"{report.model} {target}", 0.0, 100.0, unit="(%)")
        path = out_dir / f"{report.model}_{target}.svg"
        path.write_text(svg, encoding="utf-8")
        paths.append(path)
    return paths
