"""Boundary data and solve for the state's directional derivative.

On the boundary the derivative equals -grad y . W.  Since the state vanishes
on the boundary, its gradient there is normal: grad y = (dy/dn) n with
n = grad g / |grad g|, so the data is assembled from a one-sided normal
derivative of the solved state and the interpolated boundary velocity.  The
field itself solves  -Lap q + beta'(y; q) = 0  inside with that Dirichlet data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .elliptic import discretize, solve_semilinear
from .grid import _DIRS, boundary_stencil_derivative, extend_zero  # noqa: F401

__all__ = ["BoundaryData", "boundary_data", "solve_derivative", "extend_zero"]


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet values at the mask's intercept points, with provenance."""

    mask: object
    values: np.ndarray       # (K,)
    points: np.ndarray       # (K,2)
    component: np.ndarray    # (K,) curve index the velocity was read from
    t_hat: np.ndarray        # (K,) parameter of the interpolation point
    stencil_size: np.ndarray
    fallback: np.ndarray     # (K,) bool, filled from a neighbor intercept


def boundary_data(y, fields, mask, min_normal=0.05):
    """Assemble q = -grad y . W at every intercept of the mask.

    y is the solved state (zero on the boundary); fields is one VelocityField
    per boundary component.  The normal derivative of y comes from a one-sided
    second-order stencil along the intercept's grid axis; W is arc-interpolated
    from the curve samples.  Intercepts whose boundary normal is nearly
    orthogonal to the stencil axis are filled from the nearest valid intercept,
    with a warning.
    """
    if not isinstance(fields, (list, tuple)):
        fields = [fields]
    K = mask.n_intercepts
    if K == 0:
        raise ValueError("mask has no boundary intercepts")
    pts = mask.points

    # nearest component per intercept
    comp = np.zeros(K, dtype=int)
    if len(fields) > 1:
        dists = np.stack([
            np.min(((pts[:, None, :] - V.curve.z[None, :, :]) ** 2).sum(axis=2), axis=1)
            for V in fields
        ])
        comp = np.argmin(dists, axis=0)

    t_hat = np.zeros(K)
    Wb = np.zeros((K, 2))
    normal = np.zeros((K, 2))
    for ci, V in enumerate(fields):
        sel = comp == ci
        if not np.any(sel):
            continue
        th = V.curve.nearest_parameters(pts[sel])
        t_hat[sel] = th
        Wb[sel] = V.w_at(th)
        vel = V.curve.velocity_at(th)
        grad = np.column_stack([vel[:, 1], -vel[:, 0]])  # grad g from the flow
        normal[sel] = grad / np.hypot(grad[:, 0], grad[:, 1])[:, None]

    bvals = np.zeros(K)  # state vanishes on the boundary
    dn, count = boundary_stencil_derivative(y.values, bvals, mask.inside, mask)
    if np.any(count < 2):
        bad = int((count < 2).sum())
        raise ValueError(
            f"{bad} intercept(s) have fewer than 2 inside nodes along their axis; "
            "refine the grid"
        )
    d_inward = -_DIRS[mask.owner[:, 2]].astype(float)
    n_dot_d = (normal * d_inward).sum(axis=1)
    ok = np.abs(n_dot_d) >= min_normal
    dy_dn = np.zeros(K)
    dy_dn[ok] = dn[ok] / n_dot_d[ok]
    qb = -dy_dn * (normal * Wb).sum(axis=1)

    fallback = ~ok
    if np.any(fallback):
        warnings.warn(
            f"{int(fallback.sum())} intercept(s) nearly tangential to their grid axis; "
            "boundary data filled from the nearest valid intercept", stacklevel=2,
        )
        good = np.nonzero(ok)[0]
        for k in np.nonzero(fallback)[0]:
            j = good[np.argmin(((pts[good] - pts[k]) ** 2).sum(axis=1))]
            qb[k] = qb[j]

    return BoundaryData(mask=mask, values=qb, points=pts, component=comp,
                        t_hat=t_hat, stencil_size=count, fallback=fallback)


def solve_derivative(g, y, beta, bd, grid=None, disc=None, selection="right",
                     tol_rel=1e-10, initial=None):
    """Solve  -Lap q + beta'(y; q) = 0  on {g < 0} with Dirichlet data bd.

    The term is positively homogeneous in q; where the state sits exactly on a
    kink of beta the equation stays genuinely semilinear and the same
    semismooth iteration handles it.  Returns a DiscreteField with solve log.
    """
    mask = bd.mask
    if disc is None:
        disc = discretize(mask)
    y_in = y.values[disc.nodes[:, 0], disc.nodes[:, 1]]
    rhs = disc.B @ bd.values
    u0 = None
    if initial is not None:
        u0 = np.asarray(initial, dtype=float)
        if u0.ndim == 2:
            u0 = u0[disc.nodes[:, 0], disc.nodes[:, 1]]
    q, log = solve_semilinear(
        disc, rhs,
        term=lambda v: np.asarray(beta.dir_deriv(y_in, v), dtype=float),
        term_slope=lambda v: beta.slope(y_in, d=v),
        tol_rel=tol_rel, u0=u0, selection=selection,
    )
    out = disc.to_field(q)
    out.log = log
    return out
