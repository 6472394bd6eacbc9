"""Machine-readable artifacts: CSV tables and JSON summaries.

Every file starts with comment lines carrying the configuration hash and the
tool version; data rows print floats at 17 significant digits so identical
configurations produce byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

TOOL_VERSION = "0.1.0"


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return f"{float(x):.17g}"


def _meta_lines(meta):
    return [f"# {k}={v}" for k, v in meta.items()]


def write_csv(path, columns, rows, meta):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    lines = _meta_lines(meta)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    return obj


def write_json(path, obj, meta=None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    payload = {"meta": meta or {}, **_jsonify(obj)} if meta is not None else _jsonify(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def curve_rows(curve, g):
    g1, g2 = g.gradient(curve.z[:, 0], curve.z[:, 1])
    speed = np.hypot(g1, g2)
    cols = ["t", "z1", "z2", "grad_norm"]
    rows = [(curve.t[i], curve.z[i, 0], curve.z[i, 1], speed[i]) for i in range(len(curve))]
    extra = {"period": fmt(curve.period), "x0": f"{fmt(curve.x0[0])};{fmt(curve.x0[1])}",
             "component": curve.component_id}
    return cols, rows, extra


def velocity_rows(V, g, h):
    c = V.curve
    g1, g2 = g.gradient(c.z[:, 0], c.z[:, 1])
    hv = h.value(c.z[:, 0], c.z[:, 1])
    resid = np.abs(g1 * V.w[:, 0] + g2 * V.w[:, 1] + hv)
    cols = ["t", "z1", "z2", "w1", "w2", "residual"]
    rows = [(c.t[i], c.z[i, 0], c.z[i, 1], V.w[i, 0], V.w[i, 1], resid[i])
            for i in range(len(c))]
    extra = {"period": fmt(c.period), "component": c.component_id}
    return cols, rows, extra


def field_rows(fld):
    grid = fld.grid
    inside = fld.mask.inside if fld.mask is not None else np.ones_like(fld.values, bool)
    cols = ["i", "j", "x1", "x2", "value", "inside"]
    rows = []
    for i in range(grid.n):
        x = grid.xs[i]
        for j in range(grid.n):
            rows.append((i, j, x, grid.ys[j], fld.values[i, j], bool(inside[i, j])))
    return cols, rows


def study_rows(study):
    if not study.rows:
        return [], []
    cols = ["lam"] + [k for k in study.rows[0] if k != "lam"]
    rows = [tuple(row[c] for c in cols) for row in study.rows]
    return cols, rows
