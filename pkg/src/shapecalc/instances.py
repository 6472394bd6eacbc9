"""Bundled experiment instances.

disk      -- internally tangent circle pair with a manufactured state (the
             workhorse: every identity has a closed form here).
annulus   -- two-component boundary (ring domain) with a transversal direction.
nonsmooth -- the disk geometry with the state crossing the nonlinearity kink
             on a set of positive area; convergence gates are monotone-only.
"""

from __future__ import annotations

DISK = {
    "g": "x1^2 + x2^2 - 1",
    "h": "(x1-0.25)^2 + x2^2 - 0.5625",
    "f": "5 - x1^2 - x2^2",
    "beta": {"kind": "relu", "c": 0.0},
    "grid_n": 129,
    "box": [-2.0, 2.0, -2.0, 2.0],
    "lambdas": [0.08, 0.04, 0.02, 0.01, 0.005, 0.0025],
    "r_list": [1, 2, 4],
    "omega": {"kind": "disk", "center": [0.0, 0.0], "radius": 0.5},
    "objective": {
        "kind": "tracking_h2",
        "y_d": "0",
        "E": {"kind": "disk", "center": [0.0, 0.0], "radius": 0.3},
        "obs_points": [[0.0, 0.0]],
    },
    "directions": {"count": 8, "seed": 0},
    "gates": {"kind": "slopes", "slope_min": 0.9, "m_ratio_max": 0.1},
    "out_dir": "out/disk",
}

ANNULUS = {
    "g": "(x1^2 + x2^2 - 1)*(x1^2 + x2^2 - 2.25)/2.25",
    "h": "(x1-1.25)^2 + x2^2 - 0.09",
    "f": "1",
    "beta": {"kind": "relu", "c": 0.0},
    "grid_n": 129,
    "box": [-2.0, 2.0, -2.0, 2.0],
    "lambdas": [0.02, 0.01, 0.005, 0.0025],
    "r_list": [1, 2, 4],
    "omega": {"kind": "box", "bounds": [1.1, 1.35, -0.1, 0.1]},
    "objective": {
        "kind": "distributed",
        "J": {"kind": "zero"},
        "psi": "1",
    },
    "directions": {"count": 8, "seed": 0},
    "gates": {"kind": "monotone"},
    "out_dir": "out/annulus",
}

NONSMOOTH = {
    "g": "x1^2 + x2^2 - 1",
    "h": "(x1-0.25)^2 + x2^2 - 0.5625",
    "f": "5 - x1^2 - x2^2",
    "beta": {"kind": "relu", "c": 0.5},
    "grid_n": 129,
    "box": [-2.0, 2.0, -2.0, 2.0],
    "lambdas": [0.08, 0.04, 0.02, 0.01],
    "r_list": [1, 2, 4],
    "omega": {"kind": "disk", "center": [0.0, 0.0], "radius": 0.5},
    "objective": {
        "kind": "distributed",
        "J": {"kind": "relu", "y_d": 0.5},
        "psi": "0",
    },
    "directions": {"count": 8, "seed": 0},
    "gates": {"kind": "monotone"},
    "out_dir": "out/nonsmooth",
}

BUNDLED = {"disk": DISK, "annulus": ANNULUS, "nonsmooth": NONSMOOTH}
