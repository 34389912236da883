"""Result reporting: aggregate CSV plus self-contained SVG accuracy charts.

One chart per (task, corruption kind): x is corruption level, y is accuracy.
Each signal draws a bold mean line over a medium one-standard-deviation band
and a light min/max band.  The SVG is plain 1.1 markup with no external
renderer or fonts beyond generic sans-serif.
"""

from __future__ import annotations

from pathlib import Path

from .harness import SIGNALS, Aggregate, aggregate_stats, read_results_csv

_COLORS = {
    "ltm": "#1f77b4",
    "aha_pr": "#d62728",
    "aha_pc": "#9467bd",
    "fastnn": "#2ca02c",
}
_LABELS = {
    "ltm": "LTM encoding",
    "aha_pr": "AHA PR",
    "aha_pc": "AHA PC",
    "fastnn": "FastNN hidden",
}

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 62, 20, 34, 46  # plot margins


def _x(level: float, max_level: float) -> float:
    span = _W - _ML - _MR
    return _ML + (level / max_level if max_level else 0.0) * span


def _y(acc: float) -> float:
    span = _H - _MT - _MB
    return _MT + (1.0 - acc) * span


def _polyline(points: list[tuple[float, float]]) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in points)


def _chart_svg(task: str, kind: str, groups: dict[str, list[Aggregate]]) -> str:
    max_level = max((g.level for aggs in groups.values() for g in aggs), default=1.0)
    max_level = max(max_level, 1e-9)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{task} / {kind}</text>',
    ]
    # axes and ticks
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for i in range(6):
        acc = i / 5
        y = _y(acc)
        parts.append(f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{acc:.1f}</text>')
    levels = sorted({g.level for aggs in groups.values() for g in aggs})
    for level in levels:
        x = _x(level, max_level)
        parts.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{y0 + 17}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{level:.2f}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.0f}" y="{_H - 10}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">corruption level</text>')
    parts.append(f'<text x="16" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {(y0 + y1) / 2:.0f})">accuracy</text>')

    for signal in SIGNALS:
        aggs = groups.get(signal)
        if not aggs:
            continue
        aggs = sorted(aggs, key=lambda a: a.level)
        color = _COLORS[signal]
        xs = [_x(a.level, max_level) for a in aggs]
        lo_minmax = [(x, _y(a.min)) for x, a in zip(xs, aggs)]
        hi_minmax = [(x, _y(a.max)) for x, a in zip(xs, aggs)]
        band = _polyline(hi_minmax + lo_minmax[::-1])
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.10" stroke="none"/>')
        lo_std = [(x, _y(max(0.0, a.mean - a.std))) for x, a in zip(xs, aggs)]
        hi_std = [(x, _y(min(1.0, a.mean + a.std))) for x, a in zip(xs, aggs)]
        band = _polyline(hi_std + lo_std[::-1])
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.22" stroke="none"/>')
        mean = _polyline([(x, _y(a.mean)) for x, a in zip(xs, aggs)])
        parts.append(f'<polyline points="{mean}" fill="none" stroke="{color}" stroke-width="2.4"/>')

    # legend
    ly = _MT + 6
    for signal in SIGNALS:
        if signal not in groups:
            continue
        color = _COLORS[signal]
        parts.append(f'<line x1="{x1 - 150}" y1="{ly}" x2="{x1 - 126}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2.4"/>')
        parts.append(f'<text x="{x1 - 120}" y="{ly + 4}" font-family="sans-serif" '
                     f'font-size="11">{_LABELS[signal]}</text>')
        ly += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


AGGREGATE_HEADER = "task,kind,level,signal,mean,std,min,max"


def write_report(results_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Aggregate a results CSV and render one chart per (task, kind).

    Returns the written paths (aggregate CSV first).  Raises ValueError when
    the results file holds no rows.
    """
    rows = read_results_csv(results_csv)
    if not rows:
        raise ValueError("no results to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aggs = aggregate_stats(rows)

    agg_path = out_dir / "aggregates.csv"
    with open(agg_path, "w", newline="\n") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for a in aggs:
            fh.write(f"{a.task},{a.kind},{a.level!r},{a.signal},"
                     f"{a.mean!r},{a.std!r},{a.min!r},{a.max!r}\n")
    written = [agg_path]

    panels: dict[tuple[str, str], dict[str, list[Aggregate]]] = {}
    for a in aggs:
        panels.setdefault((a.task, a.kind), {}).setdefault(a.signal, []).append(a)
    for (task, kind), groups in sorted(panels.items()):
        path = out_dir / f"accuracy_{task}_{kind}.svg"
        path.write_text(_chart_svg(task, kind, groups))
        written.append(path)
    return written
