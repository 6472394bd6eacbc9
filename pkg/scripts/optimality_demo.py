#!/usr/bin/env python3
"""Primal optimality check on two objectives over the same direction family.

With the running cost equal to the level function itself, the boundary
integrand vanishes on the zero set and every direction is stationary; with a
pure area objective, shrink directions always reduce the value and get
flagged as violations.
"""

from shapecalc import (DistributedIntegrand, Grid, HoldAll, ObjectiveSpec, constant,
                       direction_family, optimality_check, parse, relu, trace)

g = parse("x1^2 + x2^2 - 1")
f = parse("5 - x1^2 - x2^2")
box = HoldAll(-2, 2, -2, 2)
grid = Grid(box, 129)
curve = trace(g, (1.0, 0.0))
family = direction_family(g, [curve], box, count=8, seed=0)

for name, psi in (("stationary (running cost = level function)", g),
                  ("pure area", constant(1.0))):
    spec = ObjectiveSpec(kind="distributed", J=DistributedIntegrand("zero"), psi=psi)
    report = optimality_check(g, spec, family, f.value, relu(0.0), grid)
    print(f"\n{name}: j = {report.j_value:.6f}, tol = {report.tolerance:.2e}")
    for row in report.rows:
        flag = "VIOLATION" if row["violation"] else ("ok" if row["qualifying"] else "skipped")
        print(f"  {row['label']:16s} j' = {row['jprime']:+.6e}  {flag}")
