"""Boundary-fitted finite differences for the non-smooth Dirichlet problem.

The Laplacian uses the 5-point stencil with shortened legs where the boundary
cuts a grid segment; Dirichlet data lives at the intercept points.  The
semilinear system  -Lap_h u + m(u) = f  with a monotone nodewise map m is
solved by a damped semismooth Newton iteration (generalized slope selection at
kinks) with a relaxed Picard fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import DiscreteField, classify

__all__ = [
    "NonconvergenceError",
    "SolveLog",
    "Discretization",
    "discretize",
    "solve_semilinear",
    "solve_state",
]


class NonconvergenceError(RuntimeError):
    def __init__(self, message, residuals):
        super().__init__(f"{message}; residual history: "
                         + ", ".join(f"{r:.3e}" for r in residuals[-8:]))
        self.residuals = residuals


@dataclass
class SolveLog:
    newton_iters: int = 0
    picard_iters: int = 0
    damped_steps: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    selection: str = "right"


@dataclass(frozen=True)
class Discretization:
    mask: object
    index: np.ndarray        # (n,n) int, -1 outside
    nodes: np.ndarray        # (N,2) int node coordinates of the unknowns
    A: object                # sparse negative discrete Laplacian (N,N)
    B: object                # boundary operator (N, K): rhs += B @ dirichlet_values

    @property
    def n_unknowns(self):
        return len(self.nodes)

    def to_field(self, u):
        grid = self.mask.grid
        vals = np.zeros((grid.n, grid.n))
        vals[self.nodes[:, 0], self.nodes[:, 1]] = u
        return DiscreteField(grid=grid, values=vals, mask=self.mask)


def discretize(mask):
    """Assemble the boundary-fitted negative Laplacian on the inside nodes."""
    grid = mask.grid
    n = grid.n
    inside = mask.inside
    index = np.full((n, n), -1, dtype=int)
    src = np.argwhere(inside)
    index[src[:, 0], src[:, 1]] = np.arange(len(src))
    N = len(src)

    rows, cols, vals = [], [], []
    brows, bcols, bvals = [], [], []
    diag = np.zeros(N)

    # legs per axis: (+x, -x) use hx, (+y, -y) use hy
    from .grid import _DIRS

    h_of_dir = [grid.hx, grid.hx, grid.hy, grid.hy]
    legs = np.empty((N, 4))
    nbr = np.full((N, 4), -1, dtype=int)
    icp = np.full((N, 4), -1, dtype=int)
    for d, (di, dj) in enumerate(_DIRS):
        ni, nj = src[:, 0] + di, src[:, 1] + dj
        ok = (ni >= 0) & (ni < n) & (nj >= 0) & (nj < n)
        inb = np.zeros(N, dtype=bool)
        inb[ok] = inside[ni[ok], nj[ok]]
        legs[:, d] = np.where(inb, h_of_dir[d], np.nan)
        nbr[inb, d] = index[ni[inb], nj[inb]]
        cut = ~inb
        th = mask.theta[src[cut, 0], src[cut, 1], d]
        ids = mask.intercept_id[src[cut, 0], src[cut, 1], d]
        if np.any(np.isnan(th)):
            raise RuntimeError("inside node with neither inside neighbor nor intercept")
        legs[cut, d] = th * h_of_dir[d]
        icp[cut, d] = ids

    for axis, (dp, dm) in enumerate([(0, 1), (2, 3)]):
        hp, hm = legs[:, dp], legs[:, dm]
        diag += 2.0 / (hp * hm)
        for d, hh, other in ((dp, hp, hm), (dm, hm, hp)):
            coef = 2.0 / (hh * (hp + hm))
            interior = nbr[:, d] >= 0
            rows.extend(np.nonzero(interior)[0])
            cols.extend(nbr[interior, d])
            vals.extend(-coef[interior])
            cutk = icp[:, d] >= 0
            brows.extend(np.nonzero(cutk)[0])
            bcols.extend(icp[cutk, d])
            bvals.extend(coef[cutk])

    rows.extend(range(N))
    cols.extend(range(N))
    vals.extend(diag)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    B = sp.csr_matrix((bvals, (brows, bcols)), shape=(N, max(mask.n_intercepts, 1)))
    return Discretization(mask=mask, index=index, nodes=src, A=A, B=B)


def solve_semilinear(disc, rhs, term, term_slope, tol_rel=1e-10, u0=None,
                     max_newton=60, selection="right"):
    """Solve A u + term(u) = rhs with monotone nodewise term.

    Residuals are measured in the max norm relative to the data scale.  Raises
    NonconvergenceError with the residual history when both the damped Newton
    iteration and the Picard fallback stall.
    """
    A = sp.csc_matrix(disc.A)
    scale = max(float(np.abs(rhs).max()) if len(rhs) else 0.0, 1e-300)
    target = tol_rel * scale
    u = np.zeros(disc.n_unknowns) if u0 is None else np.asarray(u0, dtype=float).copy()
    log = SolveLog(selection=selection)

    def F(v):
        return disc.A @ v + term(v) - rhs

    res = F(u)
    rnorm = float(np.abs(res).max()) if len(res) else 0.0
    log.residuals.append(rnorm)
    for _ in range(max_newton):
        if rnorm <= target:
            log.converged = True
            return u, log
        slopes = np.maximum(np.asarray(term_slope(u), dtype=float), 0.0)
        J = A + sp.diags(slopes).tocsc()
        delta = spla.spsolve(J, -res)
        step = 1.0
        improved = False
        for _ in range(40):
            cand = u + step * delta
            rc = F(cand)
            rc_norm = float(np.abs(rc).max())
            if rc_norm < (1.0 - 1e-4 * step) * rnorm:
                u, res, rnorm = cand, rc, rc_norm
                improved = True
                break
            step *= 0.5
            log.damped_steps += 1
        log.newton_iters += 1
        log.residuals.append(rnorm)
        if not improved:
            # relaxed Picard sweeps, then return to Newton
            made_progress = False
            lu = spla.splu(A)
            for _ in range(10):
                u_new = lu.solve(rhs - term(u))
                cand = 0.5 * (u + u_new)
                rc = F(cand)
                rc_norm = float(np.abs(rc).max())
                log.picard_iters += 1
                if rc_norm < rnorm:
                    u, res, rnorm = cand, rc, rc_norm
                    made_progress = True
                log.residuals.append(rnorm)
            if not made_progress:
                raise NonconvergenceError(
                    "semismooth Newton stalled and Picard fallback made no progress",
                    log.residuals,
                )
    if rnorm <= target:
        log.converged = True
        return u, log
    raise NonconvergenceError("iteration budget exhausted", log.residuals)


def solve_state(g, f, beta, grid, mask=None, disc=None, selection="right",
                tol_rel=1e-10, initial=None):
    """Solve  -Lap y + beta(y) = f  on {g < 0} with zero Dirichlet data.

    f may be a ShapeFunction or any callable of coordinate arrays.  Returns the
    solution as a DiscreteField (zero outside); the solve log is attached.
    """
    if disc is None:
        if mask is None:
            mask = classify(g, grid)
        disc = discretize(mask)
    else:
        mask = disc.mask
    x, y = mask.grid.node_xy(disc.nodes[:, 0], disc.nodes[:, 1])
    fv = np.asarray(f(x, y) if callable(f) else f, dtype=float)
    rhs = fv  # zero Dirichlet: no boundary contribution
    u0 = None
    if initial is not None:
        u0 = initial.values[disc.nodes[:, 0], disc.nodes[:, 1]]
    u, log = solve_semilinear(
        disc, rhs,
        term=lambda v: np.asarray(beta(v), dtype=float),
        term_slope=lambda v: beta.slope(v, selection=selection),
        tol_rel=tol_rel, u0=u0, selection=selection,
    )
    out = disc.to_field(u)
    out.log = log
    return out
