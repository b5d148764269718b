"""Trace, set and plot writers.

All writers produce deterministic bytes: floats are written with ``repr``
(shortest round-trip form), JSON keys are sorted and SVG coordinates are
fixed-point.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _input_columns(m):
    if m == 1:
        return ["uL", "u"]
    return [f"uL{j + 1}" for j in range(m)] + [f"u{j + 1}" for j in range(m)]


def trace_columns(n, m):
    xs = [f"x{i + 1}" for i in range(n)]
    return ["k", *xs, *_input_columns(m), "interfered", "feasible", "branch", "kinf", "objective"]


def _num(v):
    return repr(float(v))


def write_trace(path, result):
    """Per-step CSV of a closed-loop run (one row per applied input)."""
    traj = result.trajectory
    n, m = traj.states.shape[1], traj.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(n, m))
        for k, d in enumerate(result.decisions):
            w.writerow([k, *map(_num, traj.states[k]), *map(_num, result.learning_inputs[k]),
                        *map(_num, traj.inputs[k]), int(d.interfered), int(d.feasible),
                        d.branch, d.k_inf, _num(d.objective)])


def write_baseline_trace(path, states, inputs, learning):
    n, m = states.shape[1], inputs.shape[1]
    cols = ["k", *[f"x{i + 1}" for i in range(n)], *_input_columns(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for k in range(len(inputs)):
            w.writerow([k, *map(_num, states[k]), *map(_num, learning[k]), *map(_num, inputs[k])])


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no NaN/inf; keep them readable as strings
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


# --- SVG ---------------------------------------------------------------------

_W, _H, _PAD = 480, 360, 40


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim

    def __call__(self, x, y):
        px = _PAD + (x - self.x0) / (self.x1 - self.x0) * (_W - 2 * _PAD)
        py = _H - _PAD - (y - self.y0) / (self.y1 - self.y0) * (_H - 2 * _PAD)
        return f"{px:.2f},{py:.2f}"


def _dot(frame, x, y, r, colour):
    cx, cy = frame(x, y).split(",")
    return f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="{colour}"/>'


def _polyline(frame, pts, style):
    coords = " ".join(frame(x, y) for x, y in pts)
    return f'<polyline points="{coords}" fill="none" {style}/>'


def _svg(body, title):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">\n<title>{title}</title>\n'
            f'<rect width="{_W}" height="{_H}" fill="white"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def _axes(frame, xlim, ylim, xlabel, ylabel):
    lo, hi = frame(xlim[0], ylim[0]), frame(xlim[1], ylim[1])
    (ax, ay), (bx, by) = (map(float, lo.split(",")), map(float, hi.split(",")))
    return [f'<rect x="{ax:.2f}" y="{by:.2f}" width="{bx - ax:.2f}" height="{ay - by:.2f}" '
            'fill="none" stroke="#999" stroke-width="0.5"/>',
            f'<text x="{_W / 2:.0f}" y="{_H - 8}" text-anchor="middle" font-size="12">{xlabel}</text>',
            f'<text x="12" y="{_H / 2:.0f}" font-size="12" transform="rotate(-90 12 {_H / 2:.0f})" '
            f'text-anchor="middle">{ylabel}</text>']


def phase_plot(path, states, interfered, box, safe_boundary=None, terminal_boundary=None,
               baseline=None):
    """Phase portrait: constraint box, trajectory, interference markers and set boundaries.

    ``box`` is ``(lower, upper)`` for the first two state coordinates.
    """
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    span = hi - lo
    xlim = (lo[0] - 0.1 * span[0], hi[0] + 0.1 * span[0])
    ylim = (lo[1] - 0.1 * span[1], hi[1] + 0.1 * span[1])
    f = _Frame(xlim, ylim)
    body = _axes(f, xlim, ylim, "x1", "x2")
    corners = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1]), (lo[0], lo[1])]
    body.append(_polyline(f, corners, 'stroke="black" stroke-width="1.5"'))
    for pts, colour in ((safe_boundary, "#2a7"), (terminal_boundary, "#27c")):
        if pts is not None and len(pts):
            body.extend(_dot(f, x, y, 1, colour) for x, y in np.asarray(pts)[:, :2])
    if baseline is not None and len(baseline) > 1:
        body.append(_polyline(f, np.asarray(baseline)[:, :2],
                              'stroke="#555" stroke-width="1" stroke-dasharray="3,3"'))
    S = np.asarray(states)[:, :2]
    body.append(_polyline(f, S, 'stroke="#333" stroke-width="1"'))
    body.extend(_dot(f, *S[k], 2, "#d22") for k in np.flatnonzero(interfered))
    Path(path).write_text(_svg(body, "phase portrait"))


def input_plot(path, learning, applied, bounds):
    """Learning input against applied input over time (first input channel)."""
    uL, u = np.asarray(learning)[:, 0], np.asarray(applied)[:, 0]
    T = len(u)
    lo, hi = float(bounds[0]), float(bounds[1])
    pad = 0.1 * (hi - lo)
    xlim, ylim = (0.0, max(T - 1, 1)), (lo - pad, hi + pad)
    f = _Frame(xlim, ylim)
    body = _axes(f, xlim, ylim, "k", "u")
    for level in (lo, hi):
        body.append(_polyline(f, [(0, level), (xlim[1], level)], 'stroke="black" stroke-width="1"'))
    k = np.arange(T)
    body.append(_polyline(f, np.column_stack([k, uL]), 'stroke="#999" stroke-width="1"'))
    body.append(_polyline(f, np.column_stack([k, u]), 'stroke="#d22" stroke-width="1"'))
    Path(path).write_text(_svg(body, "learning and applied input"))
