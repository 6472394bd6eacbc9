import numpy as np
import pytest

from shapecalc import (Grid, VelocityField, boundary_data, classify, constant, discretize,
                       parse, relu, solve_derivative, solve_state, solve_w, trace)
from shapecalc.sensitivity import BoundaryData


def test_boundary_data_matches_analytic(disk_pipeline):
    # on the unit circle grad y = -2x and 2x.W = -h, so q_b = -h = -0.5(1 - x1)
    bd = disk_pipeline["bd"]
    exact = -0.5 * (1 - bd.points[:, 0])
    assert np.abs(bd.values - exact).max() <= 1e-3


def test_boundary_data_zero_at_initial_point(disk_pipeline):
    bd = disk_pipeline["bd"]
    k = np.argmin(((bd.points - [1.0, 0.0]) ** 2).sum(axis=1))
    assert np.allclose(bd.points[k], [1.0, 0.0], atol=1e-12)
    assert bd.values[k] == 0.0


def test_boundary_data_zero_velocity(circle, circle_curve, disk_pipeline):
    V0 = VelocityField(curve=circle_curve, w=np.zeros((len(circle_curve), 2)),
                       dw=np.zeros((len(circle_curve), 2)))
    bd0 = boundary_data(disk_pipeline["y"], V0, disk_pipeline["mask"])
    assert np.abs(bd0.values).max() == 0.0


def test_boundary_data_provenance(disk_pipeline, circle_curve):
    bd = disk_pipeline["bd"]
    assert np.all(bd.component == 0)
    zz = circle_curve.point_at(bd.t_hat)
    assert np.abs(zz - bd.points).max() <= 1e-9


def test_zero_dirichlet_gives_zero_derivative(circle, disk_pipeline):
    bd = disk_pipeline["bd"]
    bd0 = BoundaryData(mask=bd.mask, values=np.zeros_like(bd.values), points=bd.points,
                       component=bd.component, t_hat=bd.t_hat,
                       stencil_size=bd.stencil_size, fallback=bd.fallback)
    q0 = solve_derivative(circle, disk_pipeline["y"], disk_pipeline["beta"], bd0)
    assert q0.linf() <= 1e-12


def test_derivative_sign(disk_pipeline):
    # boundary data <= 0 and the monotone linearization preserve the sign
    assert disk_pipeline["q"].values.max() <= 1e-12


def test_unique_fixed_point_random_init(circle, disk_pipeline):
    rng = np.random.default_rng(11)
    init = rng.uniform(-1, 1, disk_pipeline["q"].values.shape)
    q2 = solve_derivative(circle, disk_pipeline["y"], disk_pipeline["beta"],
                          disk_pipeline["bd"], disc=disk_pipeline["disc"],
                          initial=init)
    assert np.abs(q2.values - disk_pipeline["q"].values).max() <= 1e-9


def test_single_newton_step_when_linear(disk_pipeline):
    # y > 0 away from the relu kink inside the disk: the equation is linear in q
    assert disk_pipeline["q"].log.newton_iters == 1


def test_grid_refinement_against_fine_oracle(circle, tangent_dir, disk_f, box,
                                             circle_curve, disk_velocity):
    beta = relu(0.0)

    def solve_at(n):
        grid = Grid(box, n)
        mask = classify(circle, grid)
        disc = discretize(mask)
        y = solve_state(circle, disk_f.value, beta, grid, disc=disc)
        bd = boundary_data(y, disk_velocity, mask)
        return solve_derivative(circle, y, beta, bd, disc=disc)

    q_ref = solve_at(257)
    errs = []
    for n, stride in ((33, 8), (65, 4)):
        q = solve_at(n)
        sub = q_ref.values[::stride, ::stride]
        common = q.mask.inside & q_ref.mask.inside[::stride, ::stride]
        errs.append(np.abs(q.values - sub)[common].max())
    order = np.log2(errs[0] / errs[1])
    assert order == pytest.approx(2.0, abs=0.7)


def test_insufficient_stencil_error(box):
    # a domain thinner than two grid cells across has intercepts with a single
    # usable inside node along the axis
    g = parse("x2^2 + (x1/1.5)^2 - 0.0049")
    grid = Grid(box, 33)
    mask = None
    import warnings as w

    with w.catch_warnings():
        w.simplefilter("ignore")
        try:
            mask = classify(g, grid)
        except ValueError:
            pytest.skip("domain unresolved at this grid, stencil error unreachable")
    disc = discretize(mask)
    y = solve_state(g, lambda a, b: np.ones_like(a), relu(0.0), grid, disc=disc)
    c = trace(g, (0.105, 0.0))
    V = solve_w(g, constant(0.0), c)
    with pytest.raises(ValueError, match="fewer than 2"):
        boundary_data(y, V, mask)
