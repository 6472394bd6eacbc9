"""Shape functionals, their directional derivatives, and the primal
necessary-condition check for candidate optimal level functions.

Two objective families are supported: a squared discrete-H2 misfit on a fixed
observation set plus pointwise sensor terms, and distributed integrands over
the domain with a running-cost density.  Directional derivatives follow the
solved derivative field q; boundary terms are curve integrals evaluated in the
curve parameter, which absorbs the 1/|grad g| weight exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .elliptic import discretize, solve_state
from .expressions import check_admissible
from .grid import Quadrature, bilinear, ghost_extended_values
from .sensitivity import boundary_data, solve_derivative
from .tracing import NoIntersectionError, pick_initial_points, trace, trace_components
from .velocity import solve_w

__all__ = [
    "Region",
    "DistributedIntegrand",
    "ObjectiveSpec",
    "OptimalityReport",
    "curve_integral",
    "check_FE",
    "objective_value",
    "dirderiv_tracking",
    "dirderiv_distributed",
    "optimality_check",
    "direction_family",
]


# ---------------------------------------------------------------------------
# Observation regions


@dataclass(frozen=True)
class Region:
    kind: str  # "disk" | "box"
    params: dict

    def nodes_mask(self, grid):
        X, Y = grid.meshgrid()
        if self.kind == "disk":
            cx, cy = self.params["center"]
            r = self.params["radius"]
            return (X - cx) ** 2 + (Y - cy) ** 2 <= r ** 2
        if self.kind == "box":
            x0, x1, y0, y1 = self.params["bounds"]
            return (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
        raise ValueError(f"unknown region kind {self.kind!r}")

    def closure_samples(self, n=128):
        if self.kind == "disk":
            cx, cy = self.params["center"]
            r = self.params["radius"]
            rr = np.linspace(0.0, r, max(n // 4, 8))
            th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
            R, T = np.meshgrid(rr, th, indexing="ij")
            return np.column_stack([(cx + R * np.cos(T)).ravel(),
                                    (cy + R * np.sin(T)).ravel()])
        if self.kind == "box":
            x0, x1, y0, y1 = self.params["bounds"]
            xs = np.linspace(x0, x1, n)
            ys = np.linspace(y0, y1, n)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            return np.column_stack([X.ravel(), Y.ravel()])
        raise ValueError(f"unknown region kind {self.kind!r}")

    def contains(self, pt):
        if self.kind == "disk":
            cx, cy = self.params["center"]
            return (pt[0] - cx) ** 2 + (pt[1] - cy) ** 2 <= self.params["radius"] ** 2
        x0, x1, y0, y1 = self.params["bounds"]
        return x0 <= pt[0] <= x1 and y0 <= pt[1] <= y1


def disk_region(center, radius):
    return Region("disk", {"center": tuple(center), "radius": float(radius)})


def box_region(bounds):
    return Region("box", {"bounds": tuple(bounds)})


# ---------------------------------------------------------------------------
# Distributed integrands


@dataclass(frozen=True)
class DistributedIntegrand:
    """Scalar integrand J with directional derivative; kinds: zero, linear,
    tracking (y-yd)^2, relu max(0, y-yd), abs |y-yd|."""

    kind: str
    y_d: float = 0.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "linear":
            return y
        if self.kind == "tracking":
            return (y - self.y_d) ** 2
        if self.kind == "relu":
            return np.maximum(0.0, y - self.y_d)
        if self.kind == "abs":
            return np.abs(y - self.y_d)
        raise ValueError(f"unknown integrand kind {self.kind!r}")

    def dir_deriv(self, y, d):
        y = np.asarray(y, dtype=float)
        d = np.asarray(d, dtype=float)
        if self.kind == "zero":
            return np.zeros(np.broadcast(y, d).shape)
        if self.kind == "linear":
            return d + np.zeros_like(y)
        if self.kind == "tracking":
            return 2.0 * (y - self.y_d) * d
        if self.kind == "relu":
            s = y - self.y_d
            return np.where(s > 0, d, np.where(s == 0, np.maximum(0.0, d), 0.0))
        if self.kind == "abs":
            s = y - self.y_d
            return np.where(s != 0, np.sign(s) * d, np.abs(d))
        raise ValueError(f"unknown integrand kind {self.kind!r}")

    def at_zero(self):
        return float(self(np.array(0.0)))


# ---------------------------------------------------------------------------
# Objective specification


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str  # "tracking_h2" | "distributed"
    E: Region | None = None
    y_d: object = None              # ShapeFunction for tracking_h2
    obs_points: np.ndarray | None = None
    J: DistributedIntegrand | None = None
    psi: object = None              # ShapeFunction running cost

    def __post_init__(self):
        if self.kind == "tracking_h2":
            if self.E is None or self.y_d is None:
                raise ValueError("tracking_h2 needs E and y_d")
            obs = np.zeros((0, 2)) if self.obs_points is None else np.atleast_2d(self.obs_points)
            object.__setattr__(self, "obs_points", np.asarray(obs, dtype=float))
            for p in self.obs_points:
                if not self.E.contains(p):
                    raise ValueError(f"observation point {tuple(p)} outside the closure of E")
        elif self.kind == "distributed":
            if self.J is None or self.psi is None:
                raise ValueError("distributed needs J and psi")
        else:
            raise ValueError(f"unknown objective kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Curve integrals


def curve_integral(curve, phi, weight="dxi"):
    """Integral of phi along a closed curve.

    weight "dxi": arclength measure, computed as the parameter integral of
    phi(z) |z'|; weight "dt": plain parameter measure.  The uniform periodic
    trapezoidal rule is spectrally accurate here.  phi may be a ShapeFunction
    or a plain callable of coordinate arrays.
    """
    fn = phi.value if hasattr(phi, "value") else phi
    vals = np.asarray(fn(curve.z[:, 0], curve.z[:, 1]), dtype=float)
    if weight == "dxi":
        vals = vals * curve.speeds
    elif weight != "dt":
        raise ValueError("weight must be 'dxi' or 'dt'")
    return float(vals.mean() * curve.period)


def check_FE(g, E, n=256):
    """True iff g is strictly negative on the closure of the observation set
    (dense sampling certificate)."""
    pts = E.closure_samples(n)
    return bool(np.max(g.value(pts[:, 0], pts[:, 1])) < 0.0)


# ---------------------------------------------------------------------------
# Discrete H2 inner products on E


def _h2_stencil(grid, E, inside=None, margin=2):
    nodes = E.nodes_mask(grid)
    if inside is not None:
        dilated = ndimage.binary_dilation(nodes, structure=np.ones((3, 3), bool),
                                          iterations=margin)
        if not np.all(inside[dilated]):
            raise ValueError("observation set not compactly contained in the domain "
                             f"with a {margin}-cell margin")
    core = ndimage.binary_erosion(nodes, structure=np.ones((3, 3), bool), iterations=1)
    if not core.any():
        raise ValueError("observation set too small for the difference stencils")
    return core


def _h2_parts(v, hx, hy):
    vx = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * hx)
    vy = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * hy)
    vxx = (np.roll(v, -1, 0) - 2 * v + np.roll(v, 1, 0)) / hx ** 2
    vyy = (np.roll(v, -1, 1) - 2 * v + np.roll(v, 1, 1)) / hy ** 2
    vxy = (np.roll(np.roll(v, -1, 0), -1, 1) - np.roll(np.roll(v, -1, 0), 1, 1)
           - np.roll(np.roll(v, 1, 0), -1, 1) + np.roll(np.roll(v, 1, 0), 1, 1)) / (4 * hx * hy)
    return v, vx, vy, vxx, vxy, vyy


def h2_inner(grid, a_vals, b_vals, core):
    """Discrete H2(E) inner product over the core stencil nodes."""
    pa = _h2_parts(a_vals, grid.hx, grid.hy)
    pb = _h2_parts(b_vals, grid.hx, grid.hy)
    cell = grid.hx * grid.hy
    acc = (pa[0] * pb[0] + pa[1] * pb[1] + pa[2] * pb[2]
           + pa[3] * pb[3] + 2 * pa[4] * pb[4] + pa[5] * pb[5])
    return float((acc * core).sum() * cell)


# ---------------------------------------------------------------------------
# Objective values and directional derivatives


def objective_value(spec, g, y, grid, curves=None):
    """Evaluate the objective for a solved state y on {g < 0}."""
    X, Y = grid.meshgrid()
    if spec.kind == "tracking_h2":
        core = _h2_stencil(grid, spec.E, inside=y.mask.inside if y.mask else None)
        yd = spec.y_d.value(X, Y)
        diff = y.values - yd
        val = 0.5 * h2_inner(grid, diff, diff, core)
        if len(spec.obs_points):
            yo = bilinear(grid, y.values, spec.obs_points)
            ydo = spec.y_d.value(spec.obs_points[:, 0], spec.obs_points[:, 1])
            val += 0.5 * float(((yo - ydo) ** 2).sum())
        return val
    quad = Quadrature(grid, [g.value])
    return quad.integrate(1, values=spec.J(y.values), point_fn=spec.psi.value)


def dirderiv_tracking(spec, y, q, grid):
    """Directional derivative of the H2-misfit objective: the H2(E) inner
    product of (y - y_d) with q plus the sensor terms."""
    X, Y = grid.meshgrid()
    core = _h2_stencil(grid, spec.E, inside=y.mask.inside if y.mask else None)
    yd = spec.y_d.value(X, Y)
    val = h2_inner(grid, y.values - yd, q.values, core)
    if len(spec.obs_points):
        yo = bilinear(grid, y.values, spec.obs_points)
        ydo = spec.y_d.value(spec.obs_points[:, 0], spec.obs_points[:, 1])
        qo = bilinear(grid, q.values, spec.obs_points)
        val += float(((yo - ydo) * qo).sum())
    return val


def dirderiv_distributed(spec, g, h, y, q, curves, grid):
    """Directional derivative of the distributed objective: interior term
    J'(y; q) plus the boundary term -(J(0) + psi) weighted by h, integrated in
    the curve parameter (no division by the gradient magnitude).

    The interior integrand is interpolated from ghost-extended nodal values:
    q carries a nonzero boundary trace, so its zero extension would bias the
    boundary-band quadrature."""
    q_ghost = ghost_extended_values(q)
    y_ghost = y.values  # state is continuous across the boundary (zero trace)
    integrand = spec.J.dir_deriv(y_ghost, q_ghost)
    quad = Quadrature(grid, [g.value])
    vol = quad.integrate(1, values=integrand)
    j0 = spec.J.at_zero()

    def integrand(x1, x2):
        return (j0 + spec.psi.value(x1, x2)) * h.value(x1, x2)

    bnd = sum(curve_integral(c, integrand, weight="dt") for c in curves)
    return vol - bnd


# ---------------------------------------------------------------------------
# Optimality check


@dataclass(frozen=True)
class OptimalityReport:
    j_value: float
    tolerance: float
    rows: list                   # dicts: label, qualifying, jprime, violation
    multi_component: bool

    @property
    def violations(self):
        return [r for r in self.rows if r["violation"]]

    @property
    def qualifying(self):
        return [r for r in self.rows if r["qualifying"]]


def optimality_check(g_star, spec, directions, f, beta, grid, tol_factor=1e-4,
                     selection="right", trace_grid_n=96):
    """Evaluate the primal first-order condition j'(g*; h) >= 0 over a family
    of directions.

    Directions whose zero set misses a boundary component are dropped with a
    warning (they do not qualify for the condition).  Violations are the
    qualifying directions with j' below -tol, tol = tol_factor (1 + |j(g*)|).
    """
    box = grid.box
    curves0 = trace_components(g_star, box, n=trace_grid_n)
    mask = None
    disc = None
    from .grid import classify

    mask = classify(g_star, grid)
    disc = discretize(mask)
    y = solve_state(g_star, f, beta, grid, disc=disc, selection=selection)
    j0 = objective_value(spec, g_star, y, grid, curves=curves0)
    tol = tol_factor * (1.0 + abs(j0))

    rows = []
    any_qualifying = False
    for label, h in directions:
        try:
            x0s = pick_initial_points(g_star, h, curves0)
        except NoIntersectionError as exc:
            warnings.warn(f"direction {label!r} does not qualify: {exc}", stacklevel=2)
            rows.append({"label": label, "qualifying": False, "jprime": None,
                         "violation": False})
            continue
        any_qualifying = True
        curves = [trace(g_star, x0, component_id=cid) for cid, x0 in x0s]
        fields = [solve_w(g_star, h, c) for c in curves]
        bd = boundary_data(y, fields, mask)
        q = solve_derivative(g_star, y, beta, bd, disc=disc, selection=selection)
        if spec.kind == "tracking_h2":
            jp = dirderiv_tracking(spec, y, q, grid)
        else:
            jp = dirderiv_distributed(spec, g_star, h, y, q, curves, grid)
        rows.append({"label": label, "qualifying": True, "jprime": float(jp),
                     "violation": bool(jp < -tol)})
    if not any_qualifying:
        raise NoIntersectionError("no direction in the family qualifies: none of "
                                  "their zero sets meets every boundary component")
    return OptimalityReport(j_value=float(j0), tolerance=float(tol), rows=rows,
                            multi_component=len(curves0) > 1)


# ---------------------------------------------------------------------------
# Direction families


def _dist_to_box(p, box):
    return min(p[0] - box.xmin, box.xmax - p[0], p[1] - box.ymin, box.ymax - p[1])


def _circle_expr(center, radius):
    from .expressions import parse

    cx, cy = float(center[0]), float(center[1])
    return parse(f"(x1 - {cx!r})^2 + (x2 - {cy!r})^2 - {float(radius) ** 2!r}")


def _ellipse_expr(center, ax, ay, rho2):
    from .expressions import parse

    cx, cy = float(center[0]), float(center[1])
    return parse(f"((x1 - {cx!r})/{float(ax)!r})^2 + ((x2 - {cy!r})/{float(ay)!r})^2 - {float(rho2)!r}")


def direction_family(g_star, curves, box, count=8, seed=0):
    """A documented finite family of admissible directions for the primal check.

    Circle and ellipse level functions constrained to vanish at a point of each
    boundary component: the first two are the tangent circles at the anchor
    (inner and outer), the rest are randomly shifted circles/ellipses through
    the anchors.  Every candidate is validated by the sampled admissibility
    certificate; failed draws are redrawn.
    """
    rng = np.random.default_rng(seed)
    if len(curves) > 2:
        raise ValueError("direction families support at most two boundary components")
    out = []
    attempts = 0
    k = 0
    while len(out) < count and attempts < 40 * count:
        attempts += 1
        # anchor point(s), stratified along the parameter with jitter
        anchors = []
        for c in curves:
            tk = (k / count + 0.13 * rng.random()) * c.period
            p = c.point_at(np.array([tk]))[0]
            v = c.velocity_at(np.array([tk]))[0]
            n_out = np.array([v[1], -v[0]])
            n_out /= np.hypot(*n_out)
            anchors.append((p, n_out))
        if len(curves) == 1:
            p, n_out = anchors[0]
            rho = rng.uniform(0.15, 0.35) * _dist_to_box(p, box)
            if k == 0:
                center, label = p - rho * n_out, f"tangent_in@{k}"
                hdir = _circle_expr(center, rho)
            elif k == 1:
                center, label = p + rho * n_out, f"tangent_out@{k}"
                hdir = _circle_expr(center, rho)
            elif k % 2 == 0:
                ang = rng.uniform(0, 2 * np.pi)
                center = p + rho * np.array([np.cos(ang), np.sin(ang)])
                hdir = _circle_expr(center, rho)
                label = f"circle@{k}"
            else:
                ang = rng.uniform(0, 2 * np.pi)
                center = p + rho * np.array([np.cos(ang), np.sin(ang)])
                ax, ay = rng.uniform(0.6, 1.6, 2)
                rho2 = ((p[0] - center[0]) / ax) ** 2 + ((p[1] - center[1]) / ay) ** 2
                hdir = _ellipse_expr(center, ax, ay, rho2)
                label = f"ellipse@{k}"
        else:
            (p1, _), (p2, _) = anchors
            mid = 0.5 * (p1 + p2)
            bis = np.array([-(p2 - p1)[1], (p2 - p1)[0]])
            nb = np.hypot(*bis)
            if nb < 1e-12:
                continue
            bis /= nb
            s = rng.uniform(-0.5, 0.5) * np.hypot(*(p2 - p1))
            center = mid + s * bis
            radius = float(np.hypot(*(p1 - center)))
            hdir = _circle_expr(center, radius)
            label = f"circle2@{k}"
        rep = check_admissible(hdir, box, n=64)
        if rep.in_F:
            out.append((label, hdir))
            k += 1
    if len(out) < count:
        warnings.warn(f"only {len(out)} of {count} directions passed admissibility",
                      stacklevel=2)
    return out
