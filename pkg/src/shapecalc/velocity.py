"""Boundary velocity fields from the linearized tracing system.

Along a traced curve z the perturbation direction h induces a velocity w
solving

    w1' = -(d12 g) w1 - (d22 g) w2 - d2 h,   w2' = (d11 g) w1 + (d12 g) w2 + d1 h,

with w(0) = 0, all coefficients evaluated at z(t).  The field W on the curve is
W(z(t)) = w(t); it satisfies grad g . W + h = 0 on the level set and acts as the
initial velocity of the equivalent boundary flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressions import check_admissible, linear_combination

__all__ = [
    "VelocityField",
    "LipschitzEstimate",
    "solve_w",
    "transversality_residual",
    "lipschitz_estimate",
    "flow_consistency",
    "local_opt_radius",
]


@dataclass(frozen=True)
class VelocityField:
    """Velocity samples w(t_i) aligned with the samples of the underlying curve."""

    curve: object
    w: np.ndarray
    dw: np.ndarray

    def w_at(self, tq):
        """Cubic Hermite interpolation of w at parameter values tq (periodic in
        the curve period; w itself is not periodic but the interpolant only
        ever uses in-range intervals)."""
        c = self.curve
        i, j, s, ht = c._locate(tq)
        s = s[..., None] if np.ndim(s) else s
        p0, p1 = self.w[i], self.w[j]
        m0, m1 = self.dw[i] * ht, self.dw[j] * ht
        s2, s3 = s * s, s * s * s
        return ((2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0
                + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1)

    def W_at(self, x):
        """W at a point x on (or near) the curve, by arc interpolation."""
        t_hat = self.curve.nearest_parameter(x)
        return self.w_at(np.array([t_hat]))[0], t_hat


def _w_rhs(g, h):
    def rhs(p, w):
        g11, g12, g22 = g.hessian(p[0], p[1])
        h1, h2 = h.gradient(p[0], p[1])
        return np.array([
            -g12 * w[0] - g22 * w[1] - h2,
            g11 * w[0] + g12 * w[1] + h1,
        ])

    return rhs


def solve_w(g, h, curve, mode="interp"):
    """Integrate the linearized system along the curve; w(0) = 0 exactly.

    mode "interp" (default) drives the coefficients through the curve's cubic
    interpolant; mode "coupled" re-integrates the position jointly with w as a
    four-dimensional system and serves as a cross-check.
    """
    n = len(curve)
    ht = curve.period / n
    rhs = _w_rhs(g, h)
    w = np.zeros((n, 2))
    dw = np.empty((n, 2))

    if mode == "interp":
        wk = np.zeros(2)
        for i in range(n):
            w[i] = wk
            t0 = curve.t[i]
            p0 = curve.z[i]
            p_half = curve.point_at(np.array([t0 + 0.5 * ht]))[0]
            p1 = curve.z[(i + 1) % n]
            k1 = rhs(p0, wk)
            dw[i] = k1
            k2 = rhs(p_half, wk + 0.5 * ht * k1)
            k3 = rhs(p_half, wk + 0.5 * ht * k2)
            k4 = rhs(p1, wk + ht * k3)
            wk = wk + (ht / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    elif mode == "coupled":
        from .tracing import _field, _rk4_step, project

        f = _field(g)

        def rhs4(u):
            p, ww = u[:2], u[2:]
            return np.concatenate([f(p), rhs(p, ww)])

        u = np.concatenate([curve.x0, np.zeros(2)])
        for i in range(n):
            w[i] = u[2:]
            dw[i] = rhs(u[:2], u[2:])
            u = _rk4_step(rhs4, u, ht)
            u[:2] = project(g, u[:2])
    else:
        raise ValueError(f"unknown mode {mode!r}")

    w[0] = 0.0  # initial condition holds exactly
    return VelocityField(curve=curve, w=w, dw=dw)


def transversality_residual(g, h, fields):
    """max over samples of |grad g . w + h|, across one or more components."""
    if isinstance(fields, VelocityField):
        fields = [fields]
    worst = 0.0
    for V in fields:
        z = V.curve.z
        g1, g2 = g.gradient(z[:, 0], z[:, 1])
        hv = h.value(z[:, 0], z[:, 1])
        res = np.abs(g1 * V.w[:, 0] + g2 * V.w[:, 1] + hv)
        worst = max(worst, float(res.max()))
    return worst


@dataclass(frozen=True)
class LipschitzEstimate:
    lw: float          # empirical Lipschitz constant of W over close sample pairs
    delta: float       # pair-distance cutoff used
    apriori: float     # 2*sqrt(2)*L_w / min |grad g| on the curve
    lw_time: float     # Lipschitz constant of t -> w(t), from max |w'|
    min_grad: float


def lipschitz_estimate(V, delta=None):
    """Empirical Lipschitz constant of W on the curve, with the a-priori bound.

    The cutoff delta defaults to an estimate derived from the curve's speed
    and curvature; pass delta explicitly to shrink the pair set.  Pairs are
    additionally restricted to a small parameter window: the velocity is
    continuous along the parametrization but carries the period-sensitivity
    jump across the seam at t = 0, so quotients across the seam measure that
    jump rather than the regularity of the field.
    """
    c = V.curve
    speeds = c.speeds
    min_grad = float(speeds.min())
    lw_time = float(np.hypot(V.dw[:, 0], V.dw[:, 1]).max())
    apriori = 2.0 * np.sqrt(2.0) * lw_time / min_grad

    ht = c.period / len(c)
    zpp = (np.roll(c.dz, -1, axis=0) - np.roll(c.dz, 1, axis=0)) / (2 * ht)
    cmax = 0.5 * float(np.hypot(zpp[:, 0], zpp[:, 1]).max())
    eps = 0.25 * min_grad
    tspan = min(eps / max(cmax, 1e-30), 0.25 * c.period)
    if delta is None:
        delta = min_grad / (2 * np.sqrt(2.0)) * tspan

    dz = c.z[:, None, :] - c.z[None, :, :]
    dist = np.hypot(dz[..., 0], dz[..., 1])
    dwp = V.w[:, None, :] - V.w[None, :, :]
    wdist = np.hypot(dwp[..., 0], dwp[..., 1])
    # non-wrapped parameter distance: w is continuous on [0, T] but takes two
    # values at the seam point itself, so pairs bridging t = 0 are excluded
    dt = np.abs(c.t[:, None] - c.t[None, :])
    mask = (dist <= delta) & (dist > 0.0) & (dt <= tspan)
    lw = float((wdist[mask] / dist[mask]).max()) if np.any(mask) else 0.0
    return LipschitzEstimate(lw=lw, delta=float(delta), apriori=apriori,
                             lw_time=lw_time, min_grad=min_grad)


def _project_batch(fn, pts, tol=1e-13, max_iter=60):
    x = pts.copy()
    for _ in range(max_iter):
        v = fn.value(x[:, 0], x[:, 1])
        active = np.abs(v) > tol
        if not np.any(active):
            break
        g1, g2 = fn.gradient(x[:, 0], x[:, 1])
        n2 = g1 * g1 + g2 * g2
        step = np.where(active, v / np.maximum(n2, 1e-30), 0.0)
        x[:, 0] -= step * g1
        x[:, 1] -= step * g2
    return x


def flow_consistency(g, h, V, lambdas, box=None):
    """First-order check that an Euler step of the boundary flow lands on the
    perturbed level set: for each lam, the residual max |(g+lam h)(z + lam w)|
    is second order in lam.  Also reports the geometric distance of the moved
    points to the perturbed level set, via projection.

    Returns a list of dicts with keys lam, residual, proj_dist.
    """
    rows = []
    z, w = V.curve.z, V.w
    for lam in lambdas:
        gl = linear_combination(g, h, lam)
        if box is not None and lam != 0.0:
            rep = check_admissible(gl, box)
            if not rep.in_F:
                raise ValueError(f"g + {lam}*h leaves the admissible class")
        moved = z + lam * w
        res = float(np.abs(gl.value(moved[:, 0], moved[:, 1])).max())
        proj = _project_batch(gl, moved)
        pd = float(np.hypot(*(moved - proj).T).max())
        rows.append({"lam": float(lam), "residual": res, "proj_dist": pd})
    return rows


def local_opt_radius(g, curves, R, box, n=256):
    """Radius of the parametrization ball that maps into a given Hausdorff ball.

    r = R / (T exp(2 T max_i L_i)) with T the largest period among the traced
    components and L_i the Lipschitz constant of the i-th gradient component,
    estimated as the largest Hessian row norm over a dense sample of the box.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    T = max(c.period for c in curves)
    X, Y = box.interior_grid(n)
    g11, g12, g22 = g.hessian(X, Y)
    L1 = float(np.hypot(g11, g12).max())
    L2 = float(np.hypot(g12, g22).max())
    return R / (T * np.exp(2.0 * T * max(L1, L2)))
