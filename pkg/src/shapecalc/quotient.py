"""Difference-quotient studies for the state's directional derivative.

For a shrinking perturbation size the harness compares the zero-extended
quotient (y_perturbed - y)/lambda against the solved derivative field q: sup
differences on the common-domain boundary, Lebesgue norms on the common domain
and on the two exterior strips, and a discrete second-order norm on a compact
interior subset.  Decay of these quantities as lambda -> 0 is the numerically
observable content of the directional-differentiability theorems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .elliptic import discretize, solve_state
from .expressions import check_admissible, linear_combination
from .grid import DiscreteField, boundary_stencil_values, classify, extend_zero, region_fractions
from .sensitivity import boundary_data, solve_derivative
from .tracing import pick_initial_points, trace, trace_components
from .velocity import solve_w

__all__ = [
    "CommonDomain",
    "QuotientStudy",
    "common_domain",
    "quotient",
    "boundary_sup",
    "estimate_order",
    "norm_table",
    "evaluate_gates",
]


@dataclass(frozen=True)
class CommonDomain:
    """Node mask of the intersection domain and sampled split of its boundary:
    the fixed part (on {g=0}) and the part moving with the perturbation."""

    mask_g: object
    mask_l: object
    omega: np.ndarray
    gamma2_ids: np.ndarray   # intercept indices of mask_g on the fixed part
    varying_ids: np.ndarray  # intercept indices of mask_l inside {g<0}

    @property
    def gamma2_points(self):
        return self.mask_g.points[self.gamma2_ids]

    @property
    def varying_points(self):
        return self.mask_l.points[self.varying_ids]


def common_domain(g, h, lam, grid, mask_g=None, mask_l=None, tol=1e-12):
    """The intersection of {g<0} with {g+lam h<0} and its boundary samples."""
    gl = linear_combination(g, h, lam)
    if mask_g is None:
        mask_g = classify(g, grid)
    if mask_l is None:
        mask_l = classify(gl, grid)
    omega = mask_g.inside & mask_l.inside
    if not omega.any():
        raise ValueError("empty common domain")
    glv = gl.value(mask_g.points[:, 0], mask_g.points[:, 1])
    gamma2_ids = np.nonzero(glv <= tol)[0]
    gv = g.value(mask_l.points[:, 0], mask_l.points[:, 1])
    varying_ids = np.nonzero(gv < -tol)[0]
    return CommonDomain(mask_g=mask_g, mask_l=mask_l, omega=omega,
                        gamma2_ids=gamma2_ids, varying_ids=varying_ids)


def quotient(y_g, y_l, lam):
    """The zero-extended difference quotient (y_l - y_g)/lam on the whole box."""
    vals = (y_l.values - y_g.values) / lam
    return DiscreteField(grid=y_g.grid, values=vals, mask=None)


def boundary_sup(q_lam, q, common):
    """Sup of |q_lam - q| over the boundary samples of the common domain, both
    fields extrapolated one-sidedly from nodes inside the common domain."""
    sups = []
    used = 0
    for mask, ids in ((common.mask_g, common.gamma2_ids),
                      (common.mask_l, common.varying_ids)):
        if len(ids) == 0:
            continue
        a, cnt_a = boundary_stencil_values(q_lam.values, common.omega, mask)
        b, cnt_b = boundary_stencil_values(q.values, common.omega, mask)
        ok = (cnt_a[ids] > 0) & (cnt_b[ids] > 0)
        if not np.all(ok):
            warnings.warn(
                f"{int((~ok).sum())} boundary sample(s) had no usable interior "
                "stencil and were skipped", stacklevel=2,
            )
        vals = np.abs(a[ids][ok] - b[ids][ok])
        used += int(ok.sum())
        if len(vals):
            sups.append(float(vals.max()))
    if not sups:
        raise ValueError("no usable boundary samples for the sup difference")
    return max(sups)


def estimate_order(pairs):
    """Least-squares slope of log(error) against log(lambda)."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (lambda, error) pairs")
    lams = np.array([p[0] for p in pairs], dtype=float)
    errs = np.array([p[1] for p in pairs], dtype=float)
    if np.any(lams <= 0) or np.any(errs <= 0):
        raise ValueError("order estimation needs positive lambdas and errors")
    return float(np.polyfit(np.log(lams), np.log(errs), 1)[0])


def _h2_norms(diff, nodes_ok, hx, hy):
    """Discrete H2 norm and seminorm of diff over nodes whose full 5x5
    neighborhood is usable (nodes_ok is already eroded accordingly)."""
    v = diff
    vx = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * hx)
    vy = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * hy)
    vxx = (np.roll(v, -1, 0) - 2 * v + np.roll(v, 1, 0)) / hx ** 2
    vyy = (np.roll(v, -1, 1) - 2 * v + np.roll(v, 1, 1)) / hy ** 2
    vxy = (np.roll(np.roll(v, -1, 0), -1, 1) - np.roll(np.roll(v, -1, 0), 1, 1)
           - np.roll(np.roll(v, 1, 0), -1, 1) + np.roll(np.roll(v, 1, 0), 1, 1)) / (4 * hx * hy)
    cell = hx * hy
    m = nodes_ok
    semi2 = float(((vxx ** 2 + 2 * vxy ** 2 + vyy ** 2) * m).sum() * cell)
    full2 = semi2 + float(((v ** 2 + vx ** 2 + vy ** 2) * m).sum() * cell)
    return np.sqrt(full2), np.sqrt(semi2)


@dataclass
class QuotientStudy:
    lambdas: list
    rows: list
    slopes: dict
    dropped: list
    r_list: tuple
    omega_note: str = ""

    def column(self, key):
        return [row[key] for row in self.rows]


def _omega_nodes(grid, omega_spec):
    X, Y = grid.meshgrid()
    if omega_spec is None:
        return None, ""
    kind = omega_spec.get("kind", "disk")
    if kind == "disk":
        cx, cy = omega_spec.get("center", (0.0, 0.0))
        r = omega_spec["radius"]
        nodes = (X - cx) ** 2 + (Y - cy) ** 2 < r ** 2
    elif kind == "box":
        x0, x1, y0, y1 = omega_spec["bounds"]
        nodes = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
    else:
        raise ValueError(f"unknown omega kind {kind!r}")
    eroded = ndimage.binary_erosion(nodes, structure=np.ones((3, 3), bool), iterations=2)
    return (nodes, eroded), "omega shrunk by 2 cells for the 5x5 difference stencils"


def norm_table(g, h, f, beta, grid, lambdas, r_list=(1, 2, 4), omega=None,
               selection="right", trace_grid_n=96, floor=1e-13, threads=1):
    """Run the full difference-quotient study.

    Per perturbation size: admissibility and component-count validation (bad
    entries are dropped with a warning), perturbed state solve, quotient field,
    boundary sup, Lebesgue norms on the common domain / whole box / exterior
    strips, and the interior discrete-H2 error.  Slopes are least-squares fits
    of log error against log lambda; sequences entirely below the noise floor
    report a slope of None (converged to zero).  threads > 1 parallelizes the
    per-lambda solves; aggregation stays ordered by lambda.
    """
    lambdas = list(lambdas)
    if any(l2 >= l1 for l1, l2 in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda list must be strictly decreasing")
    r_list = sorted({1, 2} | {int(r) if float(r).is_integer() else float(r) for r in r_list})
    box = grid.box

    mask_g = classify(g, grid)
    disc_g = discretize(mask_g)
    y_g = solve_state(g, f, beta, grid, disc=disc_g, selection=selection)

    base_curves = trace_components(g, box, n=trace_grid_n)
    x0s = pick_initial_points(g, h, base_curves)
    curves = [trace(g, x0, component_id=cid) for cid, x0 in x0s]
    fields = [solve_w(g, h, c) for c in curves]
    bd = boundary_data(y_g, fields, mask_g)
    q = solve_derivative(g, y_g, beta, bd, disc=disc_g, selection=selection)
    q_ext = extend_zero(q)

    omega_nodes, omega_note = _omega_nodes(grid, omega)

    candidates = []
    for lam in lambdas:
        gl = linear_combination(g, h, lam)
        rep = check_admissible(gl, box)
        if not rep.in_F:
            candidates.append((lam, gl, "not admissible"))
            continue
        try:
            pert_curves = trace_components(gl, box, n=trace_grid_n)
        except Exception as exc:  # tracing failure counts as validation failure
            candidates.append((lam, gl, f"tracing failed: {exc}"))
            continue
        if len(pert_curves) != len(base_curves):
            candidates.append((lam, gl, "component count changed"))
            continue
        if not _unique_in_tubes(base_curves, pert_curves):
            candidates.append((lam, gl, "approximating curve not unique in its tube"))
            continue
        candidates.append((lam, gl, None))

    def _solve_one(gl):
        mask_l = classify(gl, grid)
        y_l = solve_state(gl, f, beta, grid, mask=mask_l, selection=selection)
        return mask_l, y_l

    solved = {}
    good = [(lam, gl) for lam, gl, why in candidates if why is None]
    if threads > 1 and len(good) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for (lam, _), res in zip(good, pool.map(lambda t: _solve_one(t[1]), good)):
                solved[lam] = res
    else:
        for lam, gl in good:
            solved[lam] = _solve_one(gl)

    rows, valid, dropped = [], [], []
    for lam, gl, why in candidates:
        if why is not None:
            dropped.append((lam, why))
            warnings.warn(f"lambda={lam} dropped: {why}", stacklevel=2)
            continue
        mask_l, y_l = solved[lam]
        q_lam = quotient(extend_zero(y_g), extend_zero(y_l), lam)
        common = common_domain(g, h, lam, grid, mask_g=mask_g, mask_l=mask_l)
        m_lam = boundary_sup(q_lam, q_ext, common)

        fr = region_fractions(grid, [g.value, gl.value])
        cell = grid.hx * grid.hy
        diff = np.abs(q_lam.values - q.values)
        row = {"lam": float(lam), "m": m_lam,
               "sup_D": float(np.abs(q_lam.values).max()),
               "state_sup": y_l.linf()}
        gx = np.abs(np.diff(y_l.values, axis=0)).max() / grid.hx
        gy = np.abs(np.diff(y_l.values, axis=1)).max() / grid.hy
        row["state_grad_sup"] = float(max(gx, gy))
        for r in r_list:
            key = int(r) if float(r).is_integer() else r
            p = diff ** r
            row[f"Lr{key}_omega"] = float((p * fr[:, :, 3]).sum() * cell) ** (1.0 / r)
            row[f"Lr{key}_D"] = float(p.sum() * cell) ** (1.0 / r)
            row[f"Lr{key}_strip_shrink"] = float((p * fr[:, :, 1]).sum() * cell) ** (1.0 / r)
            row[f"Lr{key}_strip_grow"] = float((p * fr[:, :, 2]).sum() * cell) ** (1.0 / r)
        if omega_nodes is not None:
            nodes, eroded = omega_nodes
            if not np.all(mask_g.inside[nodes]) or not np.all(mask_l.inside[nodes]):
                raise ValueError("omega is not compactly contained in the common domain")
            h2, h2semi = _h2_norms(q_lam.values - q.values, eroded, grid.hx, grid.hy)
            row["H2_omega"] = h2
            row["H2semi_omega"] = h2semi
        rows.append(row)
        valid.append(lam)

    slopes = {}
    if rows:
        for key in rows[0]:
            if key in ("lam",):
                continue
            errs = [row[key] for row in rows]
            if all(e <= floor for e in errs):
                slopes[key] = None  # identically at the noise floor
            elif any(e <= 0 for e in errs) or len(rows) < 2:
                slopes[key] = float("nan")
            else:
                slopes[key] = estimate_order(zip(valid, errs))
    return QuotientStudy(lambdas=valid, rows=rows, slopes=slopes, dropped=dropped,
                         r_list=tuple(r_list), omega_note=omega_note)


def _unique_in_tubes(base_curves, pert_curves):
    """Uniqueness of the approximating curve: inside the epsilon-tube of every
    base component, with epsilon half the minimum inter-component distance,
    there must be exactly one perturbed component."""
    if len(base_curves) < 2:
        return True
    from .tracing import distance_to_curve

    sep = np.inf
    for i, a in enumerate(base_curves):
        for b in base_curves[i + 1:]:
            sep = min(sep, float(distance_to_curve(a.z, b).min()))
    eps = 0.5 * sep
    for b in base_curves:
        inside = sum(1 for p in pert_curves
                     if float(distance_to_curve(p.z, b).max()) < eps)
        if inside != 1:
            return False
    return True


def _monotone_with_one_slip(vals):
    slips = sum(1 for a, b in zip(vals, vals[1:]) if b > a * (1 + 1e-9))
    return slips <= 1


def evaluate_gates(study, kind="slopes", slope_min=0.9, m_ratio_max=0.1, floor=1e-13):
    """Pass/fail gates on a finished study.

    kind "slopes": decay rates of the L2(D) error and both exterior strips must
    reach slope_min, the boundary sup must shrink by 1/m_ratio_max, and the
    interior H2 error must decay monotonically (one noise step allowed).
    kind "monotone": only the monotone-decay gates (no rates are proved for the
    non-smooth case, so none are gated).
    """
    gates = {}
    m_vals = study.column("m")
    l2 = study.column("Lr2_D")
    s1 = study.column("Lr1_strip_shrink")
    s2 = study.column("Lr1_strip_grow")
    h2 = study.column("H2_omega") if "H2_omega" in study.rows[0] else None

    def slope_gate(name, vals):
        if all(v <= floor for v in vals):
            gates[name] = {"pass": True, "slope": None, "note": "at noise floor"}
        else:
            s = estimate_order(zip(study.lambdas, vals))
            gates[name] = {"pass": bool(s >= slope_min), "slope": s}

    def monotone_gate(name, vals):
        if all(v <= floor for v in vals):
            gates[name] = {"pass": True, "note": "at noise floor"}
        else:
            gates[name] = {"pass": bool(_monotone_with_one_slip(vals))}

    if kind == "slopes":
        slope_gate("l2_D_slope", l2)
        slope_gate("strip_shrink_slope", s1)
        slope_gate("strip_grow_slope", s2)
        ratio = m_vals[-1] / m_vals[0] if m_vals[0] > 0 else 0.0
        gates["m_ratio"] = {"pass": bool(ratio <= m_ratio_max), "ratio": ratio}
        if h2 is not None:
            monotone_gate("h2_monotone", h2)
    elif kind == "monotone":
        monotone_gate("l2_D_monotone", l2)
        monotone_gate("strip_shrink_monotone", s1)
        monotone_gate("strip_grow_monotone", s2)
        monotone_gate("m_monotone", m_vals)
        if h2 is not None:
            monotone_gate("h2_monotone", h2)
    else:
        raise ValueError(f"unknown gate kind {kind!r}")
    gates["all_pass"] = all(v["pass"] for k, v in gates.items() if isinstance(v, dict))
    return gates
