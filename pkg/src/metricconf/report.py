"""Report serialization and plot-data emission (CSV, minimal SVG)."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from pathlib import Path

PLOT_KINDS = ("forest", "pairwise", "power-curve")


def jsonable(obj):
    """Plain JSON types; NaN and infinities become null."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return jsonable(obj.item())
    return obj


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps(report), encoding="utf-8")


def load_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def fmt(v) -> str:
    """17 significant digits so that CSV values round-trip exactly."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "" if not math.isfinite(v) else f"{v:.17g}"
    return str(v)


def _require(report: dict, section: str, kind: str):
    if not report.get(section):
        raise KeyError(f"report has no {section!r} section, cannot emit {kind} plot data")
    return report[section]


def forest_rows(report: dict) -> list[dict]:
    rows = _require(report, "intervals", "forest")
    return [r for r in rows if r.get("lower") is not None]


def emit_plot_data(report: dict, kind: str, path, svg_path=None) -> list[Path]:
    """Write CSV plot data for ``kind``; returns the files written."""
    path = Path(path)
    written = [path]
    if kind == "forest":
        rows = forest_rows(report)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "level", "point", "lower", "upper"])
            for r in rows:
                w.writerow([r["metric"], r["level"], fmt(r["point"]), fmt(r["lower"]), fmt(r["upper"])])
        if svg_path is not None:
            Path(svg_path).write_text(forest_svg(rows), encoding="utf-8")
            written.append(Path(svg_path))
    elif kind == "pairwise":
        pw = _require(report, "pairwise", kind)
        metrics = pw["metrics"]
        flags_path = path.with_name(path.stem + ".flags" + path.suffix)
        with path.open("w", newline="", encoding="utf-8") as fh, \
                flags_path.open("w", newline="", encoding="utf-8") as fh2:
            w, w2 = csv.writer(fh, lineterminator="\n"), csv.writer(fh2, lineterminator="\n")
            header = ["level", "metric"] + metrics
            w.writerow(header)
            w2.writerow(header)
            for level, tab in pw["levels"].items():
                for i, m in enumerate(metrics):
                    w.writerow([level, m] + [fmt(v) for v in tab["p_values"][i]])
                    w2.writerow([level, m] + [_flag(tab, i, j) for j in range(len(metrics))])
        written.append(flags_path)
    elif kind == "power-curve":
        curves = _require(report, "power", kind)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k_percent", "method", "level", "power"])
            for c in curves:
                for kp, rej in zip(c["k_percent"], c["rejections"]):
                    w.writerow([fmt(float(kp)), c["test"], c["level"], fmt(rej / c["trials"])])
    else:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    return written


def _flag(tab: dict, i: int, j: int) -> str:
    """'' on the diagonal or for errors, else 0 = not significant, 1 = raw only, 2 = survives correction."""
    if tab["p_values"][i][j] is None:
        return ""
    return str(int(tab["raw_significant"][i][j]) + int(tab["corrected_significant"][i][j]))


def forest_svg(rows: list[dict], width: int = 640, row_height: int = 22) -> str:
    """Static forest plot: one horizontal interval with a point per row, x axis from -1 to 1."""
    left, right, top = 200, 30, 30
    plot_w = width - left - right
    height = top + row_height * len(rows) + 40

    def x(v):
        return left + (v + 1.0) / 2.0 * plot_w

    colors = {"sys": "#d95f02", "sum": "#1b6ac9"}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    axis_y = top + row_height * len(rows) + 5
    out.append(f'<line x1="{x(-1):.2f}" y1="{axis_y}" x2="{x(1):.2f}" y2="{axis_y}" stroke="black"/>')
    for tick in (-1.0, -0.5, 0.0, 0.5, 1.0):
        tx = x(tick)
        out.append(f'<line x1="{tx:.2f}" y1="{top - 5}" x2="{tx:.2f}" y2="{axis_y}" stroke="#dddddd"/>')
        out.append(f'<text x="{tx:.2f}" y="{axis_y + 16}" text-anchor="middle">{tick:g}</text>')
    for i, r in enumerate(rows):
        cy = top + row_height * i + row_height / 2
        color = colors.get(r["level"], "black")
        label = _escape(f'{r["metric"]} ({r["level"]})')
        out.append(f'<text x="{left - 10}" y="{cy + 4:.1f}" text-anchor="end">{label}</text>')
        out.append(f'<line x1="{x(r["lower"]):.2f}" y1="{cy:.1f}" x2="{x(r["upper"]):.2f}" '
                   f'y2="{cy:.1f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<circle cx="{x(r["point"]):.2f}" cy="{cy:.1f}" r="4" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
