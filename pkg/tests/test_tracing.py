import numpy as np
import pytest

from shapecalc import (NoIntersectionError, ProjectionError, TooManyComponentsError,
                       classify_boundary, find_components, hausdorff, linear_combination,
                       parse, pick_initial_points, project, trace, trace_at_times,
                       trace_components)


def test_circle_period_and_closure(circle, circle_curve):
    c = circle_curve
    assert abs(c.period - np.pi) <= 1e-6
    end = c.point_at(np.array([c.period]))[0]
    assert np.hypot(*(end - c.x0)) <= 1e-8
    drift = np.abs(circle.value(c.z[:, 0], c.z[:, 1])).max()
    assert drift <= 1e-9


def test_circle_orientation(circle_curve):
    # counter-clockwise: tangent at (1, 0) points in +x2
    assert np.allclose(circle_curve.dz[0], [0.0, 2.0], atol=1e-12)


def test_speed_identity_five_point(circle, circle_curve):
    c = circle_curve
    ht = c.period / len(c)
    zp, zm = np.roll(c.z, -1, 0), np.roll(c.z, 1, 0)
    zp2, zm2 = np.roll(c.z, -2, 0), np.roll(c.z, 2, 0)
    dz_fd = (8 * (zp - zm) - (zp2 - zm2)) / (12 * ht)
    sp_fd = np.hypot(dz_fd[:, 0], dz_fd[:, 1])
    g1, g2 = circle.gradient(c.z[:, 0], c.z[:, 1])
    sp = np.hypot(g1, g2)
    assert np.max(np.abs(sp_fd - sp) / sp) <= 1e-6


def test_ellipse_level_set_drift(box):
    g = parse("(x1/1.3)^2 + x2^2 - 1")
    c = trace(g, (1.3, 0.0))
    assert np.abs(g.value(c.z[:, 0], c.z[:, 1])).max() <= 1e-9


def test_project(circle):
    x = project(circle, (1.1, 0.0))
    assert np.allclose(x, [1.0, 0.0], atol=1e-12)
    x2 = project(circle, (1.0, 0.0))
    assert np.allclose(x2, [1.0, 0.0], atol=1e-12)
    with pytest.raises(ProjectionError):
        project(circle, (0.0, 0.0))


def test_find_components_circle(circle, box):
    seeds = find_components(circle, box)
    assert len(seeds) == 1
    assert abs(circle.value(*seeds[0])) <= 1e-10


def test_find_components_annulus(annulus, box):
    curves = trace_components(annulus, box)
    assert len(curves) == 2
    radii = sorted(np.hypot(*c.x0) for c in curves)
    assert radii[0] == pytest.approx(1.0, abs=1e-9)
    assert radii[1] == pytest.approx(1.5, abs=1e-9)


def test_find_components_too_coarse(box):
    g = parse("x1^2 + x2^2 - 0.01")
    assert find_components(g, box, n=4) == []


def test_component_cap(annulus, box):
    with pytest.raises(TooManyComponentsError):
        trace_components(annulus, box, max_components=1)


def test_existing_curves_not_reseeded(circle, box, circle_curve):
    assert find_components(circle, box, existing=[circle_curve]) == []


def test_retrace_reproducibility(circle, circle_curve):
    mid = circle_curve.z[217]
    c2 = trace(circle, mid)
    assert hausdorff(circle_curve, c2) <= 1e-6


def test_equal_component_counts_under_perturbation(annulus, tangent_dir, box):
    lam = 0.02
    gl = linear_combination(annulus, parse("(x1-1.25)^2 + x2^2 - 0.09"), lam)
    assert len(trace_components(gl, box)) == len(trace_components(annulus, box))


def test_period_convergence(circle, tangent_dir):
    T = np.pi
    errs = []
    for lam in (0.1, 0.05, 0.025):
        gl = linear_combination(circle, tangent_dir, lam)
        cl = trace(gl, (1.0, 0.0))
        errs.append(abs(cl.period - T))
    assert errs[0] > errs[1] > errs[2]


def test_pick_initial_tangential(circle, tangent_dir, circle_curve):
    pts = pick_initial_points(circle, tangent_dir, [circle_curve])
    assert len(pts) == 1
    cid, x0 = pts[0]
    assert np.allclose(x0, [1.0, 0.0], atol=1e-7)


def test_pick_initial_transversal(circle, transversal_dir, circle_curve):
    (_, x0), = pick_initial_points(circle, transversal_dir, [circle_curve])
    assert abs(circle.value(*x0)) <= 1e-10
    assert abs(transversal_dir.value(*x0)) <= 1e-10
    assert x0[0] == pytest.approx(0.76, abs=1e-9)


def test_pick_initial_no_intersection(circle, circle_curve):
    h = parse("x1^2 + x2^2 - 4")
    with pytest.raises(NoIntersectionError):
        pick_initial_points(circle, h, [circle_curve])


def test_pick_initial_identical(circle, circle_curve):
    pts = pick_initial_points(circle, circle, [circle_curve])
    assert np.allclose(pts[0][1], circle_curve.z[0], atol=1e-9)


def test_hausdorff_identical(circle_curve):
    assert hausdorff(circle_curve, circle_curve) == 0.0


def test_hausdorff_concentric(circle):
    gb = parse("x1^2 + x2^2 - 1.21")
    cb = trace(gb, (1.1, 0.0))
    c = trace(circle, (1.0, 0.0), n_samples=512)
    assert hausdorff(c, cb) == pytest.approx(0.1, abs=1e-4)


def test_hausdorff_perturbed_linear_decay(circle, tangent_dir):
    c = trace(circle, (1.0, 0.0), n_samples=512)
    ds = []
    for lam in (0.1, 0.05, 0.025):
        gl = linear_combination(circle, tangent_dir, lam)
        cl = trace(gl, (1.0, 0.0), n_samples=512)
        d = hausdorff(c, cl)
        # analytic: perturbed circle, farthest point on the far side
        a = lam * 0.25 / (1 + lam)
        r = np.sqrt((1 + 0.5 * lam) / (1 + lam) + a ** 2)
        assert d == pytest.approx(1 - (r - a), rel=2e-2)
        ds.append(d)
    assert ds[0] / ds[1] == pytest.approx(2.0, rel=0.15)
    assert ds[1] / ds[2] == pytest.approx(2.0, rel=0.15)


def test_classify_boundary_tangent(circle, tangent_dir, circle_curve):
    bp = classify_boundary(circle, tangent_dir, circle_curve)
    # h = 0.5 (1 - cos 2t) on the circle: only the touch point joins gamma2
    assert len(bp.gamma2) == 1
    assert bp.gamma2[0] == 0
    assert len(bp.gamma1) == len(circle_curve) - 1


def test_classify_boundary_negative_direction(circle, circle_curve):
    h = parse("x1^2 + x2^2 - 4")  # negative on the whole unit circle
    bp = classify_boundary(circle, h, circle_curve)
    assert len(bp.gamma2) == len(circle_curve)
    assert len(bp.gamma1) == 0


def test_classify_boundary_identical(circle, circle_curve):
    bp = classify_boundary(circle, circle, circle_curve)
    assert len(bp.gamma2) == len(circle_curve)


def test_trace_at_times_matches_curve(circle, circle_curve):
    zz = trace_at_times(circle, (1.0, 0.0), circle_curve.t[:16])
    assert np.abs(zz - circle_curve.z[:16]).max() <= 1e-10
