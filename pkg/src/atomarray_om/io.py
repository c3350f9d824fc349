"""Config files, CSV/JSON writers and minimal SVG plots.

Config files are YAML (JSON is valid YAML).  Numbers may be written as
strings with a unit suffix: ``"6 x2pi MHz"`` or ``"6e6 x2pi Hz"`` for
angular frequencies given as ordinary frequencies, and ``nm``, ``um``,
``mm``, ``cm``, ``m`` for lengths.
"""
from __future__ import annotations

import dataclasses
import json
import math
import re
from pathlib import Path

import numpy as np
import yaml

from . import __version__

__all__ = [
    "ConfigError",
    "load_config",
    "parse_quantity",
    "build_dataclass",
    "write_csv",
    "write_json",
    "manifest",
    "svg_lines",
    "svg_heatmap",
]


class ConfigError(ValueError):
    """Malformed or schema-violating configuration."""


_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_LEN = {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0}
_QTY = re.compile(r"^\s*([-+0-9.eE]+)\s*(x\s*2\s*pi\s*)?([a-zA-Zµ]+)?\s*$")


def parse_quantity(value, field: str = "value"):
    """Numbers pass through; unit-suffixed strings become SI floats."""
    if isinstance(value, bool):
        raise ConfigError(f"{field}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return value
    if not isinstance(value, str):
        return value
    m = _QTY.match(value)
    if not m:
        raise ConfigError(f"{field}: cannot parse quantity {value!r}")
    try:
        num = float(m.group(1))
    except ValueError as exc:
        raise ConfigError(f"{field}: cannot parse quantity {value!r}") from exc
    twopi, unit = m.group(2), (m.group(3) or "").lower()
    if twopi:
        if unit not in _FREQ:
            raise ConfigError(f"{field}: 'x2pi' needs a frequency unit, got {unit!r}")
        return 2 * math.pi * num * _FREQ[unit]
    if not unit:
        return num
    if unit in _LEN:
        return num * _LEN[unit]
    raise ConfigError(f"{field}: unknown unit {unit!r}")


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def build_dataclass(cls, section: dict, name: str, quantities: bool = True):
    """Instantiate ``cls`` from ``section``, naming offending fields."""
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) in {name}: {', '.join(unknown)}")
    kwargs = {}
    for k, v in section.items():
        if quantities and isinstance(v, (str, int, float)) and not isinstance(v, bool):
            try:
                kwargs[k] = parse_quantity(v, f"{name}.{k}")
            except ConfigError:
                kwargs[k] = v  # plain strings such as scheme names
        else:
            kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def manifest(command: str, config: dict, seed, files) -> dict:
    import numpy
    import scipy

    return {
        "command": command,
        "tool": "atomarray-om",
        "version": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "seed": seed,
        "config": _jsonable(config),
        "files": sorted(str(Path(f).name) for f in files),
    }


# ---------------------------------------------------------------- SVG

_W, _H, _M = 640, 420, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _ticks(lo, hi, n=5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _frame(xlabel, ylabel, title, xlo, xhi, ylo, yhi):
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{_M}" y="{_M / 2:.0f}" width="{_W - 1.5 * _M:.0f}" '
           f'height="{_H - 1.5 * _M:.0f}" fill="none" stroke="black"/>',
           f'<text x="{_W / 2:.0f}" y="18" text-anchor="middle">{title}</text>',
           f'<text x="{_W / 2:.0f}" y="{_H - 10}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{_H / 2:.0f}" text-anchor="middle" '
           f'transform="rotate(-90 14 {_H / 2:.0f})">{ylabel}</text>']
    for t in _ticks(xlo, xhi):
        X = _sx(t, xlo, xhi)
        out.append(f'<text x="{X:.1f}" y="{_H - _M + 16:.0f}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(ylo, yhi):
        Y = _sy(t, ylo, yhi)
        out.append(f'<text x="{_M - 4}" y="{Y + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    return out


def _sx(x, lo, hi):
    return _M + (x - lo) / (hi - lo) * (_W - 1.5 * _M) if hi > lo else _M


def _sy(y, lo, hi):
    return _H - _M - (y - lo) / (hi - lo) * (_H - 1.5 * _M) if hi > lo else _H - _M


def svg_lines(path, series, xlabel="", ylabel="", title="", hline=None) -> Path:
    """``series``: list of (label, x, y).  Non-finite points break the line."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    fin = np.isfinite(xs) & np.isfinite(ys)
    xlo, xhi = float(xs[fin].min()), float(xs[fin].max())
    ylo, yhi = float(ys[fin].min()), float(ys[fin].max())
    if hline is not None:
        ylo, yhi = min(ylo, hline), max(yhi, hline)
    pad = 0.05 * (yhi - ylo or 1.0)
    ylo, yhi = ylo - pad, yhi + pad
    out = _frame(xlabel, ylabel, title, xlo, xhi, ylo, yhi)
    if hline is not None:
        Y = _sy(hline, ylo, yhi)
        out.append(f'<line x1="{_M}" y1="{Y:.1f}" x2="{_W - _M / 2:.0f}" y2="{Y:.1f}" '
                   'stroke="gray" stroke-dasharray="4 3"/>')
    for i, (label, x, y) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        segs, cur = [], []
        for xv, yv in zip(np.asarray(x, float), np.asarray(y, float)):
            if math.isfinite(xv) and math.isfinite(yv):
                cur.append(f"{_sx(xv, xlo, xhi):.2f},{_sy(yv, ylo, yhi):.2f}")
            elif cur:
                segs.append(cur)
                cur = []
        if cur:
            segs.append(cur)
        for s in segs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(s)}"/>')
        out.append(f'<text x="{_W - _M / 2 - 4:.0f}" y="{_M / 2 + 16 + 14 * i:.0f}" '
                   f'text-anchor="end" fill="{color}">{label}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def _color(v, lo, hi):
    if not math.isfinite(v):
        return "#cccccc"
    t = 0.5 if hi <= lo else (v - lo) / (hi - lo)
    t = min(max(t, 0.0), 1.0)
    # blue (negative) -> white -> red (positive) when the range spans zero
    r = int(round(255 * min(1.0, 2 * t)))
    b = int(round(255 * min(1.0, 2 * (1 - t))))
    g = min(r, b)
    return f"#{r:02x}{g:02x}{b:02x}"


def svg_heatmap(path, x, y, z, xlabel="", ylabel="", title="") -> Path:
    """Heat map of ``z[i, j]`` over ``(x[i], y[j])`` with the z = 0 contour.

    Axes are drawn in grid-index space with tick labels at the edges.
    """
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    nx, ny = len(x), len(y)
    fin = z[np.isfinite(z)]
    m = float(np.max(np.abs(fin))) if fin.size else 1.0
    lo, hi = -m, m
    out = _frame(xlabel, ylabel, title, float(x[0]), float(x[-1]), float(y[0]), float(y[-1]))
    cw = (_W - 1.5 * _M) / nx
    ch = (_H - 1.5 * _M) / ny
    for i in range(nx):
        for j in range(ny):
            X = _M + i * cw
            Y = _H - _M - (j + 1) * ch
            out.append(f'<rect x="{X:.2f}" y="{Y:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                       f'fill="{_color(z[i, j], lo, hi)}"/>')
    # zero-level contour drawn along cell edges where the sign flips
    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx and np.sign(z[i, j]) * np.sign(z[i + 1, j]) < 0:
                X = _M + (i + 1) * cw
                out.append(f'<line x1="{X:.2f}" y1="{_H - _M - j * ch:.2f}" x2="{X:.2f}" '
                           f'y2="{_H - _M - (j + 1) * ch:.2f}" stroke="black" stroke-width="2"/>')
            if j + 1 < ny and np.sign(z[i, j]) * np.sign(z[i, j + 1]) < 0:
                Y = _H - _M - (j + 1) * ch
                out.append(f'<line x1="{_M + i * cw:.2f}" y1="{Y:.2f}" x2="{_M + (i + 1) * cw:.2f}" '
                           f'y2="{Y:.2f}" stroke="black" stroke-width="2"/>')
    out.append(f'<text x="{_W - _M / 2:.0f}" y="{_M / 2 - 4:.0f}" text-anchor="end">'
               f'colour range [{lo:.3g}, {hi:.3g}]</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
