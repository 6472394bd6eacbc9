import numpy as np
import pytest

from shapecalc import (Grid, HoldAll, boundary_data, classify, discretize, parse, relu,
                       solve_derivative, solve_state, solve_w, trace)


@pytest.fixture(scope="session")
def box():
    return HoldAll(-2, 2, -2, 2)


@pytest.fixture(scope="session")
def circle():
    return parse("x1^2 + x2^2 - 1", label="g")


@pytest.fixture(scope="session")
def tangent_dir():
    # internally tangent circle: vanishes at (1, 0), positive elsewhere on the unit circle
    return parse("(x1-0.25)^2 + x2^2 - 0.5625", label="h")


@pytest.fixture(scope="session")
def transversal_dir():
    # crosses the unit circle at x1 = 0.76
    return parse("(x1-0.5)^2 + x2^2 - 0.49", label="h_trans")


@pytest.fixture(scope="session")
def disk_f():
    # manufactured right-hand side for the exact state 1 - x1^2 - x2^2 with relu beta
    return parse("5 - x1^2 - x2^2", label="f")


@pytest.fixture(scope="session")
def annulus():
    return parse("(x1^2 + x2^2 - 1)*(x1^2 + x2^2 - 2.25)/2.25", label="g_ann")


@pytest.fixture(scope="session")
def circle_curve(circle):
    return trace(circle, (1.0, 0.0))


@pytest.fixture(scope="session")
def disk_velocity(circle, tangent_dir, circle_curve):
    return solve_w(circle, tangent_dir, circle_curve)


@pytest.fixture(scope="session")
def disk_pipeline(box, circle, tangent_dir, disk_f, circle_curve, disk_velocity):
    """Solved state, boundary data and derivative field on the n=129 grid."""
    grid = Grid(box, 129)
    mask = classify(circle, grid)
    disc = discretize(mask)
    beta = relu(0.0)
    y = solve_state(circle, disk_f.value, beta, grid, disc=disc)
    bd = boundary_data(y, disk_velocity, mask)
    q = solve_derivative(circle, y, beta, bd, disc=disc)
    return {"grid": grid, "mask": mask, "disc": disc, "beta": beta,
            "y": y, "bd": bd, "q": q}
