"""Catalog of monotone scalar nonlinearities with directional derivatives.

Each entry is monotone nondecreasing, locally Lipschitz, and directionally
differentiable; the directional derivative d -> beta'(y; d) is positively
homogeneous.  At kinks the one-sided slopes differ and a selection (right by
default) provides the generalized slope used by the semismooth solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Nonlinearity", "zero", "linear", "relu", "pwl", "cubic"]


def _pwl_integral(y, xs, slopes):
    """Integral of the piecewise-constant slope function from 0 to y."""
    y = np.asarray(y, dtype=float)
    edges = np.concatenate([[-np.inf], xs, [np.inf]])
    out = np.zeros_like(y)
    lo_pt = np.minimum(0.0, y)
    hi_pt = np.maximum(0.0, y)
    for i, s in enumerate(slopes):
        lo, hi = edges[i], edges[i + 1]
        overlap = np.clip(hi_pt, lo, hi) - np.clip(lo_pt, lo, hi)
        out += s * overlap * np.where(y >= 0.0, 1.0, -1.0)
    return out


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    params: dict = field(default_factory=dict)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        k = self.kind
        if k == "zero":
            return np.zeros_like(y)
        if k == "linear":
            return self.params["a"] * y
        if k == "relu":
            return np.maximum(0.0, y - self.params["c"])
        if k == "cubic":
            return y ** 3
        if k == "pwl":
            xs, slopes = self._pwl_data()
            return _pwl_integral(y, xs, slopes)
        raise ValueError(f"unknown nonlinearity kind {k!r}")

    def _one_sided_slopes(self, y):
        """(left slope, right slope) of beta at y."""
        y = np.asarray(y, dtype=float)
        k = self.kind
        if k == "zero":
            z = np.zeros_like(y)
            return z, z
        if k == "linear":
            a = np.full_like(y, self.params["a"])
            return a, a
        if k == "cubic":
            s = 3.0 * y ** 2
            return s, s
        if k == "relu":
            c = self.params["c"]
            return np.where(y > c, 1.0, 0.0), np.where(y >= c, 1.0, 0.0)
        if k == "pwl":
            xs, slopes = self._pwl_data()
            return (slopes[np.searchsorted(xs, y, side="left")],
                    slopes[np.searchsorted(xs, y, side="right")])
        raise ValueError(f"unknown nonlinearity kind {k!r}")

    def dir_deriv(self, y, d):
        """Directional derivative beta'(y; d), positively homogeneous in d."""
        d = np.asarray(d, dtype=float)
        left, right = self._one_sided_slopes(y)
        return np.where(d >= 0.0, right * d, left * d)

    def slope(self, y, d=None, selection="right"):
        """Generalized slope at y for the semismooth iteration.

        With d given, returns the slope of the map d' -> beta'(y; d') at d
        (the active one-sided slope); otherwise the kink side is picked by
        `selection`.
        """
        left, right = self._one_sided_slopes(y)
        if d is not None:
            return np.where(np.asarray(d, dtype=float) >= 0.0, right, left)
        return right if selection == "right" else left

    # piecewise-linear parameter handling; beta(0) = 0 anchors the values
    def _pwl_data(self):
        xs = np.asarray(self.params["breakpoints"], dtype=float)
        slopes = np.asarray(self.params["slopes"], dtype=float)
        if len(slopes) != len(xs) + 1:
            raise ValueError("pwl needs len(slopes) == len(breakpoints) + 1")
        if np.any(slopes < 0):
            raise ValueError("pwl slopes must be nonnegative (monotone map)")
        if len(xs) > 1 and np.any(np.diff(xs) <= 0):
            raise ValueError("pwl breakpoints must be strictly increasing")
        return xs, slopes

    def lipschitz_bound(self, M):
        """Lipschitz constant of beta on [-M, M]."""
        k = self.kind
        if k == "zero":
            return 0.0
        if k == "linear":
            return float(self.params["a"])
        if k == "relu":
            return 1.0
        if k == "cubic":
            return 3.0 * M ** 2
        if k == "pwl":
            _, slopes = self._pwl_data()
            return float(slopes.max())
        raise ValueError(f"unknown nonlinearity kind {k!r}")


def zero():
    return Nonlinearity("zero")


def linear(a):
    if a < 0:
        raise ValueError("slope must be nonnegative")
    return Nonlinearity("linear", {"a": float(a)})


def relu(c=0.0):
    return Nonlinearity("relu", {"c": float(c)})


def pwl(breakpoints, slopes):
    nl = Nonlinearity("pwl", {"breakpoints": list(map(float, breakpoints)),
                              "slopes": list(map(float, slopes))})
    nl._pwl_data()  # validate eagerly
    return nl


def cubic():
    return Nonlinearity("cubic")
