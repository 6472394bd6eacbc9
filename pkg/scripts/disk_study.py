#!/usr/bin/env python3
"""Difference-quotient convergence study on the tangent circle pair.

Traces the boundary, solves the velocity system, assembles the derivative
field, then sweeps the perturbation size and prints the norm table with the
fitted decay rates.
"""

import numpy as np

from shapecalc import Grid, HoldAll, norm_table, parse, relu
from shapecalc.quotient import evaluate_gates

g = parse("x1^2 + x2^2 - 1")
h = parse("(x1-0.25)^2 + x2^2 - 0.5625")
f = parse("5 - x1^2 - x2^2")
box = HoldAll(-2, 2, -2, 2)
grid = Grid(box, 129)

study = norm_table(g, h, f.value, relu(0.0), grid,
                   [0.08, 0.04, 0.02, 0.01, 0.005, 0.0025],
                   omega={"kind": "disk", "center": (0, 0), "radius": 0.5})

cols = ["lam", "m", "Lr2_omega", "Lr2_D", "Lr1_strip_shrink", "H2_omega", "sup_D"]
print("  ".join(f"{c:>16s}" for c in cols))
for row in study.rows:
    print("  ".join(f"{row[c]:16.6e}" for c in cols))
print("\nfitted log-log slopes:")
for c in cols[1:]:
    s = study.slopes[c]
    print(f"  {c:18s} {s if s is None else f'{s:.3f}'}")

gates = evaluate_gates(study)
print("\ngates:", {k: v for k, v in gates.items()})
