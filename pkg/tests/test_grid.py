import numpy as np
import pytest

from shapecalc import DiscreteField, Grid, Quadrature, classify, extend_zero, parse
from shapecalc.grid import (_DIRS, bilinear, boundary_stencil_derivative,
                            boundary_stencil_values, ghost_extended_values,
                            region_fractions)


def test_grid_validation(box):
    with pytest.raises(ValueError):
        Grid(box, 8)
    g = Grid(box, 65)
    assert g.hx == pytest.approx(4 / 64)
    assert g.xs[0] == -2 and g.xs[-1] == 2


def test_classify_inside_count(circle, box):
    grid = Grid(box, 65)
    mask = classify(circle, grid)
    expected = np.pi / 16 * 64 ** 2
    assert abs(mask.n_inside - expected) / expected <= 0.05


def test_classify_intercept_residual(circle, box):
    mask = classify(circle, Grid(box, 65))
    resid = np.abs(circle.value(mask.points[:, 0], mask.points[:, 1]))
    assert resid.max() <= 1e-12


def test_classify_empty_error(box):
    g = parse("x1^2 + x2^2 + 1")
    with pytest.raises(ValueError, match="nonnegative"):
        classify(g, Grid(box, 33))


def test_classify_touching_holdall_error():
    from shapecalc import HoldAll

    g = parse("x1^2 + x2^2 - 2.25")  # pokes through the box edges
    with pytest.raises(ValueError, match="hold-all"):
        classify(g, Grid(HoldAll(-1, 1, -1, 1), 33))


def test_intercept_example_at_n129(circle, box):
    grid = Grid(box, 129)
    mask = classify(circle, grid)
    i = round((0.96875 + 2) / grid.hx)
    j = round((0.0 + 2) / grid.hy)
    th = mask.theta[i, j, 0]
    assert 0.96875 + th * grid.hx == pytest.approx(1.0, abs=1e-12)


def test_every_inside_node_has_neighbors_or_intercepts(circle, box):
    mask = classify(circle, Grid(box, 65))
    src = np.argwhere(mask.inside)
    for d, (di, dj) in enumerate(_DIRS):
        nb_inside = mask.inside[src[:, 0] + di, src[:, 1] + dj]
        has_icp = ~np.isnan(mask.theta[src[:, 0], src[:, 1], d])
        assert np.all(nb_inside | has_icp)


def test_under_resolution_warning(box):
    g = parse("x1^2 + x2^2 - 0.04")  # radius 0.2: ~3 nodes across at n=33
    with pytest.warns(UserWarning, match="under-resolved|across"):
        classify(g, Grid(box, 33))


def test_multiple_crossings_warn_and_proceed(box):
    # thin ring: both circles (radii 1 and ~1.049) cross single grid segments
    g = parse("(x1^2 + x2^2 - 1)*(x1^2 + x2^2 - 1.1)/1.1")
    with pytest.warns(UserWarning, match="more than once|across"):
        mask = classify(g, Grid(box, 33))
    assert mask.n_inside > 0  # proceeds despite the warning


def test_region_fractions_area(circle, box):
    grid = Grid(box, 129)
    fr = region_fractions(grid, [circle.value])
    area = fr[:, :, 1].sum() * grid.hx * grid.hy
    assert area == pytest.approx(np.pi, rel=1e-2)
    # partition of unity
    np.testing.assert_allclose(fr.sum(axis=2), 1.0)


def test_quadrature_matches_fractions(circle, box):
    grid = Grid(box, 65)
    quad = Quadrature(grid, [circle.value])
    area = quad.integrate(1)
    fr = region_fractions(grid, [circle.value])
    assert area == pytest.approx(fr[:, :, 1].sum() * grid.hx * grid.hy, rel=1e-12)
    # smooth integrand over the disk: int (1 - r^2) = pi/2; bilinear
    # interpolation under-integrates concave data at O(h^2 |D2 f| / 12)
    X, Y = grid.meshgrid()
    val = quad.integrate(1, values=1 - X ** 2 - Y ** 2)
    assert val == pytest.approx(np.pi / 2, rel=5e-3)
    # exact point function route agrees with nodal-bilinear route for smooth data
    val2 = quad.integrate(1, point_fn=lambda a, b: 1 - a ** 2 - b ** 2)
    assert val2 == pytest.approx(np.pi / 2, rel=1e-4)


def test_discrete_field_zero_outside(circle, box):
    grid = Grid(box, 33)
    mask = classify(circle, grid)
    vals = np.ones((33, 33))
    fld = DiscreteField(grid=grid, values=vals, mask=mask)
    assert fld.values[0, 0] == 0.0
    assert fld.values[mask.inside].min() == 1.0


def test_extend_zero(circle, box):
    grid = Grid(box, 65)
    mask = classify(circle, grid)
    X, Y = grid.meshgrid()
    fld = DiscreteField(grid=grid, values=(1 - X ** 2 - Y ** 2) * mask.inside, mask=mask)
    ext = extend_zero(fld)
    i = round((1.9 + 2) / grid.hx)
    assert ext.values[i, i] == 0.0  # far-outside node reads zero
    assert ext.linf() == fld.linf()  # max attained inside
    assert ext.values.sum() == fld.values.sum()  # integral unchanged
    assert ext.mask is None


def test_bilinear_interpolation(box):
    grid = Grid(box, 33)
    X, Y = grid.meshgrid()
    vals = 2 * X + 3 * Y + 1  # bilinear functions are reproduced exactly
    pts = np.array([[0.1, 0.2], [-1.3, 0.7], [1.99, -1.99]])
    out = bilinear(grid, vals, pts)
    np.testing.assert_allclose(out, 2 * pts[:, 0] + 3 * pts[:, 1] + 1, atol=1e-12)


def test_boundary_stencils_quadratic_exact(circle, box):
    grid = Grid(box, 65)
    mask = classify(circle, grid)
    X, Y = grid.meshgrid()
    vals = (1 - X ** 2 - Y ** 2) * mask.inside
    ev, cnt = boundary_stencil_values(vals, mask.inside, mask)
    assert np.abs(ev).max() <= 1e-12  # field vanishes on the boundary
    dv, cnt2 = boundary_stencil_derivative(vals, np.zeros(mask.n_intercepts),
                                           mask.inside, mask)
    dvec = -_DIRS[mask.owner[:, 2]]
    exact = -2 * (mask.points[:, 0] * dvec[:, 0] + mask.points[:, 1] * dvec[:, 1])
    assert np.abs(dv - exact).max() <= 1e-11


def test_ghost_extension(circle, box):
    grid = Grid(box, 65)
    mask = classify(circle, grid)
    X, Y = grid.meshgrid()
    # field with nonzero trace: x1 on the inside, zero extension outside
    fld = DiscreteField(grid=grid, values=X * mask.inside, mask=mask)
    gv = ghost_extended_values(fld)
    own = mask.owner
    gi = own[:, 0] + _DIRS[own[:, 2], 0]
    gj = own[:, 1] + _DIRS[own[:, 2], 1]
    ghost_nodes = np.unique(np.column_stack([gi, gj]), axis=0)
    got = gv[ghost_nodes[:, 0], ghost_nodes[:, 1]]
    want = grid.xs[ghost_nodes[:, 0]]
    # ghost values extrapolate the trace x1 to within O(h^2)-ish of the band
    assert np.abs(got - want).max() <= 0.1
    assert np.abs(got - want).mean() <= 0.03
