"""Tracing level-set boundaries as closed curves of a Hamiltonian flow.

A component of {g = 0} is swept by the system z' = (-d2 g(z), d1 g(z)).  The
tracer integrates it with an adaptive Dormand-Prince 4/5 stepper, reprojects
onto the level set after every accepted step to remove drift, detects the
first return to the start point through a transversal section, and finally
resamples the curve at uniform parameter values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

__all__ = [
    "Curve",
    "BoundaryPartition",
    "TraceError",
    "ProjectionError",
    "NoIntersectionError",
    "TooManyComponentsError",
    "project",
    "trace",
    "trace_at_times",
    "find_components",
    "trace_components",
    "pick_initial_points",
    "hausdorff",
    "classify_boundary",
]


class TraceError(RuntimeError):
    pass


class ProjectionError(RuntimeError):
    pass


class NoIntersectionError(RuntimeError):
    """A direction's zero level set misses a boundary component, violating the
    intersection requirement for initial points."""


class TooManyComponentsError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Dormand-Prince 4(5) coefficients

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _dp_step(f, z, h):
    """One Dormand-Prince step; returns (z5, error_estimate_vector)."""
    k = [f(z)]
    for i in range(1, 7):
        zi = z + h * sum(a * kk for a, kk in zip(_DP_A[i], k))
        k.append(f(zi))
    k = np.asarray(k)
    z5 = z + h * (_DP_B5[:, None] * k).sum(axis=0)
    err = h * ((_DP_B5 - _DP_B4)[:, None] * k).sum(axis=0)
    return z5, err


def _rk4_step(f, z, h):
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _field(g):
    def f(z):
        g1, g2 = g.gradient(z[0], z[1])
        return np.array([-g2, g1])

    return f


def project(g, x, tol=1e-12, max_iter=50):
    """Newton projection of x onto {g = 0} along the gradient direction."""
    x = np.asarray(x, dtype=float).copy()
    for _ in range(max_iter):
        v = g.value(x[0], x[1])
        if abs(v) <= tol:
            return x
        g1, g2 = g.gradient(x[0], x[1])
        norm2 = g1 * g1 + g2 * g2
        if norm2 < 1e-24:
            raise ProjectionError(f"vanishing gradient at {tuple(x)}; cannot project")
        x -= (v / norm2) * np.array([g1, g2])
    raise ProjectionError(f"projection did not converge near {tuple(x)}")


# ---------------------------------------------------------------------------
# Curve


@dataclass(frozen=True)
class Curve:
    """One closed component of a zero level set, sampled at uniform parameter
    values t_i = i*T/N.  dz holds the flow velocities at the samples."""

    t: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    period: float
    x0: np.ndarray
    component_id: int = 0

    def __len__(self):
        return len(self.t)

    @property
    def speeds(self):
        return np.hypot(self.dz[:, 0], self.dz[:, 1])

    def _locate(self, tq):
        T = self.period
        n = len(self.t)
        ht = T / n
        tq = np.asarray(tq, dtype=float) % T
        i = np.minimum((tq / ht).astype(int), n - 1)
        s = (tq - i * ht) / ht
        return i, (i + 1) % n, s, ht

    def point_at(self, tq):
        """Cubic Hermite interpolation of z at parameter values tq (periodic)."""
        i, j, s, ht = self._locate(tq)
        s = s[..., None] if np.ndim(s) else s
        p0, p1 = self.z[i], self.z[j]
        m0, m1 = self.dz[i] * ht, self.dz[j] * ht
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        return h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1

    def velocity_at(self, tq):
        """Derivative of the Hermite interpolant at tq."""
        i, j, s, ht = self._locate(tq)
        s = s[..., None] if np.ndim(s) else s
        p0, p1 = self.z[i], self.z[j]
        m0, m1 = self.dz[i] * ht, self.dz[j] * ht
        s2 = s * s
        d00 = 6 * s2 - 6 * s
        d10 = 3 * s2 - 4 * s + 1
        d01 = -6 * s2 + 6 * s
        d11 = 3 * s2 - 2 * s
        return (d00 * p0 + d10 * m0 + d01 * p1 + d11 * m1) / ht

    def accel_at(self, tq):
        """Second derivative of the Hermite interpolant at tq."""
        i, j, s, ht = self._locate(tq)
        s = s[..., None] if np.ndim(s) else s
        p0, p1 = self.z[i], self.z[j]
        m0, m1 = self.dz[i] * ht, self.dz[j] * ht
        a00 = 12 * s - 6
        a10 = 6 * s - 4
        a01 = -12 * s + 6
        a11 = 6 * s - 2
        return (a00 * p0 + a10 * m0 + a01 * p1 + a11 * m1) / ht ** 2

    def nearest_parameter(self, x):
        """Parameter of the curve point closest to x (x should be near the curve)."""
        return float(self.nearest_parameters(np.asarray(x, dtype=float)[None, :])[0])

    def nearest_parameters(self, pts):
        """Vectorized closest-point parameters for points near the curve."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d2 = ((pts[:, None, :] - self.z[None, :, :]) ** 2).sum(axis=2)
        i0 = np.argmin(d2, axis=1)
        ht = self.period / len(self.t)
        t = self.t[i0].astype(float)
        lo, hi = t - ht, t + ht
        for _ in range(40):
            p = self.point_at(t)
            v = self.velocity_at(t)
            a = self.accel_at(t)
            diff = p - pts
            dphi = (diff * v).sum(axis=1)
            d2phi = (v * v).sum(axis=1) + (diff * a).sum(axis=1)
            step = dphi / np.where(np.abs(d2phi) > 1e-30, d2phi, 1.0)
            t_new = np.clip(t - step, lo, hi)
            if np.max(np.abs(t_new - t)) < 1e-14 * max(1.0, self.period):
                t = t_new
                break
            t = t_new
        return t % self.period

    def max_spacing(self):
        d = np.diff(self.z, axis=0, append=self.z[:1])
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))


def _polyline_segments(curve):
    a = curve.z
    b = np.roll(curve.z, -1, axis=0)
    return a, b


def distance_to_curve(points, curve):
    """Distance from each point to the closed polyline through curve samples."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a, b = _polyline_segments(curve)
    ab = b - a  # (M,2)
    denom = (ab ** 2).sum(axis=1)
    denom = np.where(denom == 0.0, 1.0, denom)
    ap = pts[:, None, :] - a[None, :, :]  # (K,M,2)
    s = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom[None, :], 0.0, 1.0)
    foot = a[None, :, :] + s[..., None] * ab[None, :, :]
    d = np.hypot(*(pts[:, None, :] - foot).transpose(2, 0, 1))
    return d.min(axis=1)


def hausdorff(curve_a, curve_b):
    """Symmetric Hausdorff distance between two sampled closed curves, with
    polyline segments used for the inner minimum."""
    d_ab = distance_to_curve(curve_a.z, curve_b).max()
    d_ba = distance_to_curve(curve_b.z, curve_a).max()
    return float(max(d_ab, d_ba))


# ---------------------------------------------------------------------------
# Tracing


def _adaptive_period(g, x0, rtol, atol, init_arc, max_arc):
    f = _field(g)
    f0 = f(x0)
    speed0 = np.hypot(*f0)
    if speed0 < 1e-14:
        raise TraceError("flow velocity vanishes at the initial point")
    tau0 = f0 / speed0
    r_excl = 10.0 * init_arc

    t, z = 0.0, x0.copy()
    h = init_arc / speed0
    left_ball = False
    arc = 0.0
    s_prev = 0.0
    min_h = 1e-14

    while arc < max_arc:
        z_new, err = _dp_step(f, z, h)
        scale = atol + rtol * max(np.max(np.abs(z)), np.max(np.abs(z_new)))
        enorm = np.max(np.abs(err)) / scale
        if enorm > 1.0:
            h = max(min_h, h * max(0.2, 0.9 * enorm ** -0.2))
            continue
        z_new = project(g, z_new)
        t_new = t + h
        arc += np.hypot(*(z_new - z))
        dist = np.hypot(*(z_new - x0))
        if not left_ball and dist > r_excl:
            left_ball = True
        s_new = float((z_new - x0) @ tau0)
        if left_ball and dist < r_excl and s_prev < 0.0 <= s_new:
            fz = f(z_new)
            align = float(fz @ f0) / (np.hypot(*fz) * speed0)
            if align > 0.9:
                return _refine_return(g, f, t_new, z_new, x0, tau0)
        s_prev = s_new
        t, z = t_new, z_new
        if enorm > 0.0:
            h = min(h * min(5.0, 0.9 * enorm ** -0.2), h * 5.0)
    raise TraceError(
        f"period not detected within arc budget {max_arc}; "
        "component may not close or the initial step is too large"
    )


def _refine_return(g, f, t, z, x0, tau0):
    """Newton iteration on the section crossing: returns (period, end point)."""
    z = z.copy()
    for _ in range(50):
        s = float((z - x0) @ tau0)
        ds = float(f(z) @ tau0)
        dt = -s / ds
        if abs(dt) < 1e-15 * max(1.0, t):
            break
        z = project(g, _rk4_step(f, z, dt))
        t += dt
    return t, z


def trace(g, x0, tol=1e-9, n_samples=1024, rtol=1e-10, atol=1e-12,
          init_arc=0.01, max_arc=None, closure_tol=1e-8, component_id=0):
    """Trace the closed component of {g = 0} through x0.

    x0 must lie on the level set (it is projected first).  Returns a Curve with
    n_samples uniform parameter samples; every sample satisfies |g| <= tol.
    """
    x0 = project(g, np.asarray(x0, dtype=float))
    if max_arc is None:
        max_arc = 1e4 * init_arc * 100  # generous; roughly 10^4 typical curve lengths
    period, z_end = _adaptive_period(g, x0, rtol, atol, init_arc, max_arc)
    closure = float(np.hypot(*(z_end - x0)))
    if closure > closure_tol:
        raise TraceError(f"curve failed to close: |z(T)-z(0)| = {closure:.3e}")

    f = _field(g)
    h = period / n_samples
    z = x0.copy()
    zs = np.empty((n_samples, 2))
    for i in range(n_samples):
        zs[i] = z
        z_new, _ = _dp_step(f, z, h)
        z = project(g, z_new)
    resample_closure = float(np.hypot(*(z - x0)))
    if resample_closure > 10 * closure_tol:
        raise TraceError(f"resampling drift {resample_closure:.3e} exceeds tolerance")

    drift = np.abs(g.value(zs[:, 0], zs[:, 1])).max()
    if drift > tol:
        raise TraceError(f"level-set drift {drift:.3e} exceeds tolerance {tol:.3e}")

    dzs = np.empty_like(zs)
    g1, g2 = g.gradient(zs[:, 0], zs[:, 1])
    dzs[:, 0] = -np.asarray(g2)
    dzs[:, 1] = np.asarray(g1)
    ts = np.arange(n_samples) * h
    return Curve(t=ts, z=zs, dz=dzs, period=period, x0=x0, component_id=component_id)


def trace_at_times(g, x0, times, substep=None):
    """Integrate the boundary flow from x0, reporting z at the given times.

    Unlike trace(), no closure is required; used for difference-quotient
    studies where a perturbed trajectory is sampled on the unperturbed grid.
    """
    x0 = project(g, np.asarray(x0, dtype=float))
    f = _field(g)
    times = np.asarray(times, dtype=float)
    if substep is None:
        substep = max(times[-1], 1e-6) / (4 * max(len(times), 256))
    out = np.empty((len(times), 2))
    z, t = x0.copy(), 0.0
    for k, tk in enumerate(times):
        span = tk - t
        if span > 0:
            m = max(1, int(np.ceil(span / substep)))
            hstep = span / m
            for _ in range(m):
                z_new, _ = _dp_step(f, z, hstep)
                z = project(g, z_new)
            t = tk
        out[k] = z
    return out


# ---------------------------------------------------------------------------
# Component discovery


def _grid_zero_candidates(g, box, n):
    X, Y = box.interior_grid(n)
    V = g.value(X, Y)
    pts = []
    sx = V[:-1, :] * V[1:, :]
    ix, iy = np.nonzero(sx < 0)
    for i, j in zip(ix, iy):
        pts.append((0.5 * (X[i, j] + X[i + 1, j]), Y[i, j]))
    sy = V[:, :-1] * V[:, 1:]
    ix, iy = np.nonzero(sy < 0)
    for i, j in zip(ix, iy):
        pts.append((X[i, j], 0.5 * (Y[i, j] + Y[i, j + 1])))
    zx, zy = np.nonzero(V == 0.0)
    for i, j in zip(zx, zy):
        pts.append((X[i, j], Y[i, j]))
    return pts


def trace_components(g, box, n=96, existing=(), max_components=16, **trace_kw):
    """Trace one Curve per connected component of {g = 0}.

    Candidate seeds come from sign changes on grid edges; a candidate within
    one sample spacing of an already traced curve is considered covered.
    """
    candidates = _grid_zero_candidates(g, box, n)
    curves = list(existing)
    new_curves = []
    for cx, cy in candidates:
        try:
            seed = project(g, (cx, cy))
        except ProjectionError:
            continue
        covered = False
        for c in curves:
            tube = 2.0 * c.max_spacing()
            if distance_to_curve(seed, c)[0] < tube:
                covered = True
                break
        if covered:
            continue
        if len(curves) >= max_components:
            raise TooManyComponentsError(
                f"more than {max_components} boundary components found; raise the cap"
            )
        curve = trace(g, seed, component_id=len(curves), **trace_kw)
        curves.append(curve)
        new_curves.append(curve)
    return new_curves


def find_components(g, box, n=96, existing=(), max_components=16):
    """Seed points, one per connected component of {g = 0} not already covered
    by a curve in `existing`.  Empty when the grid sees no sign change."""
    return [c.x0 for c in trace_components(g, box, n=n, existing=existing,
                                           max_components=max_components)]


# ---------------------------------------------------------------------------
# Initial points on {g = 0} intersect {h = 0}


def _newton_2d(g, h, x, tol=1e-12, max_iter=60):
    x = np.asarray(x, dtype=float).copy()
    for _ in range(max_iter):
        vg = g.value(x[0], x[1])
        vh = h.value(x[0], x[1])
        if abs(vg) <= tol and abs(vh) <= tol:
            return x, True
        J = np.array([g.grad_at(x), h.grad_at(x)])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-14:
            return x, False
        dx = np.linalg.solve(J, -np.array([vg, vh]))
        x += dx
    return x, False


def pick_initial_points(g, h, curves, tol=1e-8):
    """For each component of {g = 0}, one point where h vanishes too.

    Transversal sign changes of h along the curve are preferred and refined by
    bracketed root finding plus a two-dimensional Newton polish; tangential
    touch points are accepted only when no crossing exists on the component.
    """
    out = []
    for curve in curves:
        hv = np.asarray(h.value(curve.z[:, 0], curve.z[:, 1]))
        n = len(hv)
        found = None
        for i in range(n):
            a, b = hv[i], hv[(i + 1) % n]
            if a == 0.0:
                found = curve.z[i].copy()
                break
            if a * b < 0.0:
                ta, tb = curve.t[i], curve.t[i] + curve.period / n

                def phi(tq):
                    p = curve.point_at(np.array([tq]))[0]
                    return float(h.value(p[0], p[1]))

                t_star = brentq(phi, ta, tb, xtol=1e-14)
                x_star = curve.point_at(np.array([t_star]))[0]
                x_new, ok = _newton_2d(g, h, x_star)
                found = x_new if ok else project(g, x_star)
                break
        if found is None:
            # tangential touch: minimize |h| along the curve near the sample minimum
            i = int(np.argmin(np.abs(hv)))
            ht = curve.period / n

            def phi2(tq):
                p = curve.point_at(np.array([tq]))[0]
                return float(h.value(p[0], p[1])) ** 2

            res = minimize_scalar(phi2, bounds=(curve.t[i] - ht, curve.t[i] + ht),
                                  method="bounded", options={"xatol": 1e-13})
            x_star = project(g, curve.point_at(np.array([float(res.x)]))[0])
            if abs(h.value(x_star[0], x_star[1])) <= tol:
                found = x_star
        if found is None:
            raise NoIntersectionError(
                f"the zero set of direction '{h.label}' does not meet boundary "
                f"component {curve.component_id}; every component must be intersected"
            )
        if abs(g.value(found[0], found[1])) > tol or abs(h.value(found[0], found[1])) > tol:
            raise NoIntersectionError(
                f"intersection refinement failed on component {curve.component_id}"
            )
        out.append((curve.component_id, found))
    return out


# ---------------------------------------------------------------------------
# Boundary partition


@dataclass(frozen=True)
class BoundaryPartition:
    """Split of curve sample indices by the sign of the direction h: gamma2
    carries h <= 0 (the part inside the closure of every perturbed domain),
    gamma1 the rest.  Independent of the perturbation size."""

    gamma1: np.ndarray
    gamma2: np.ndarray


def classify_boundary(g, h, curve):
    hv = np.asarray(h.value(curve.z[:, 0], curve.z[:, 1]))
    idx = np.arange(len(hv))
    return BoundaryPartition(gamma1=idx[hv > 0.0], gamma2=idx[hv <= 0.0])
