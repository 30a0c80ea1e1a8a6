"""Run records and their serialisation (CSV, JSON, SVG)."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import _accel

__all__ = ["RunRecord", "Check", "emit_outputs", "read_csv", "render_svg", "code_version"]


def code_version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # pragma: no cover - not installed
        return "unknown"


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


@dataclass
class RunRecord:
    """Rows are appended, never edited; checks carry the pass/fail verdicts."""

    kind: str
    config_hash: str
    seed: int
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = field(default_factory=code_version)
    backend: str = field(default_factory=_accel.backend)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add_row(self, **row):
        self.rows.append(dict(row))

    def check(self, name, passed, value, threshold, detail=""):
        c = Check(name, bool(passed), float(value), float(threshold), detail)
        self.checks.append(c)
        return c

    def finish(self):
        self.wall_clock = time.perf_counter() - self._t0
        return self

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"kind": self.kind, "config_hash": self.config_hash, "seed": self.seed,
                "version": self.version, "backend": self.backend, "wall_clock": self.wall_clock,
                "summary": self.summary, "checks": [c.to_dict() for c in self.checks],
                "rows": self.rows}


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v) if not math.isfinite(v) else f"{v:.17g}"
    return str(v)


def _columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def write_csv(rows, path, columns=None):
    columns = columns or _columns(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    return path


def read_csv(path):
    """Re-ingest a CSV table; numeric cells come back as floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        conv = {}
        for k, v in r.items():
            try:
                conv[k] = float(v)
            except ValueError:
                conv[k] = v
        out.append(conv)
    return out


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    return str(o)


def render_svg(series, title="", logx=True, logy=True, width=640, height=420):
    """Minimal line plot: one ``<polyline>`` per entry of ``series``
    (``label -> (xs, ys)``).  Non-positive values are dropped on log axes."""
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    pts = {}
    for label, (xs, ys) in series.items():
        keep = [(tx(x), ty(y)) for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y) and (not logx or x > 0) and (not logy or y > 0)]
        pts[label] = keep
    allp = [p for v in pts.values() for p in v]
    pad = 48
    if allp:
        x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
        y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    for k, (label, p) in enumerate(pts.items()):
        colour = palette[k % len(palette)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{coords}">'
                   f'<title>{_esc(label)}</title></polyline>')
        out.append(f'<text x="{width - pad + 4}" y="{pad + 14 * k}" font-size="10" fill="{colour}">'
                   f'{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out)


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_outputs(records, fmt, out_dir, stem="run"):
    """Write ``records`` (a list of :class:`RunRecord`) as ``<stem>.csv``,
    ``<stem>.json`` or ``<stem>.svg`` under ``out_dir``; returns the paths."""
    if fmt not in ("csv", "json", "svg"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None
    paths = []
    if fmt == "csv":
        rows = [dict(record=k, **r) for k, rec in enumerate(records) for r in rec.rows]
        cols = _columns(rows) or ["record"]
        paths.append(write_csv(rows, out / f"{stem}.csv", cols))
        checks = [dict(record=k, **c.to_dict()) for k, rec in enumerate(records) for c in rec.checks]
        if checks:
            paths.append(write_csv(checks, out / f"{stem}_checks.csv"))
    elif fmt == "json":
        p = out / f"{stem}.json"
        p.write_text(json.dumps([r.to_dict() for r in records], indent=1, default=_json_default))
        paths.append(p)
    else:
        for k, rec in enumerate(records):
            for name, spec in rec.series.items():
                p = out / f"{stem}_{k}_{name}.svg"
                p.write_text(render_svg(spec["lines"], spec.get("title", name),
                                        spec.get("logx", True), spec.get("logy", True)))
                paths.append(p)
    return paths
