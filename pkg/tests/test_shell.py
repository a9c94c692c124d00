import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltaflow.directions import make_global_directions
from deltaflow.errors import InsufficientNeighbors, InvalidWavenumbers, MissingThreshold, RankDeficientFit
from deltaflow.geometry import multidomain_from_mesh
from deltaflow.meshes import bump_shell, cylinder_mesh, quad_grid, sphere_cap_mesh, structured_triangles
from deltaflow.shell import ShellRule, ThresholdRule, estimate_curvature, fit_quadric, geodesic_rule, threshold_angle
from deltaflow.transfer import assemble, discretize

CYL_R = 2 / (3 * math.pi)  # curvature 3 pi / 2


def _cyl_e1_3d(md, curv):
    return np.array([md.embedding[j].rotation.T @ np.r_[curv.e1[j], 0.0] for j in range(len(md.cells))])


def test_flat_plate_has_no_curvature():
    g = np.linspace(0, 1, 6)
    X, Y = np.meshgrid(g, g, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), np.zeros(36)])
    md = multidomain_from_mesh(nodes, structured_triangles(5, 5))
    c = estimate_curvature(md)
    np.testing.assert_allclose(c.kappa1, 0.0, atol=1e-12)
    assert c.flat.all()
    assert np.isinf(c.radius).all()


def test_cylinder_curvature_and_direction():
    md = cylinder_mesh(CYL_R, 0.05)
    c = estimate_curvature(md)
    np.testing.assert_allclose(np.abs(c.kappa1), 3 * math.pi / 2, rtol=0.05)
    np.testing.assert_allclose(c.kappa2, 0.0, atol=1e-10)
    # e1 is circumferential, i.e. orthogonal to the cylinder axis (y)
    np.testing.assert_allclose(_cyl_e1_3d(md, c)[:, 1], 0.0, atol=1e-12)
    assert not c.flat.any()


def test_sphere_curvature():
    c = estimate_curvature(sphere_cap_mesh(1.0, 0.05))
    np.testing.assert_allclose(np.abs(c.kappa1), 1.0, rtol=0.05)
    np.testing.assert_allclose(np.abs(c.kappa2), 1.0, rtol=0.05)


@pytest.mark.parametrize("make", [lambda h: cylinder_mesh(CYL_R, h), lambda h: sphere_cap_mesh(1.0, h)])
def test_curvature_fit_converges_under_refinement(make):
    errs = []
    for h in (0.1, 0.05, 0.025):
        md = make(h)
        c = estimate_curvature(md)
        target = 3 * math.pi / 2 if np.allclose(c.kappa2, 0, atol=1e-8) else 1.0
        errs.append(np.abs(np.abs(c.kappa1) / target - 1).max())
    assert errs[1] < errs[0] / 2 and errs[2] < errs[1] / 2


def test_fit_quadric_exact_paraboloid():
    rng = np.random.default_rng(0)
    xy = rng.uniform(-0.1, 0.1, size=(12, 2))
    z = 0.5 * (2.0 * xy[:, 0] ** 2 - 0.5 * xy[:, 1] ** 2)
    e1, e2, k1, k2 = fit_quadric(np.column_stack([xy, z]))
    assert (k1, k2) == (pytest.approx(2.0, rel=1e-10), pytest.approx(-0.5, rel=1e-10))
    np.testing.assert_allclose(np.abs(e1), [1, 0], atol=1e-10)
    with pytest.raises(RankDeficientFit):
        fit_quadric(np.column_stack([np.linspace(0, 1, 8), np.zeros(8), np.zeros(8)]))


def test_curvature_needs_a_shell():
    with pytest.raises(InsufficientNeighbors):
        estimate_curvature(quad_grid(2))


def test_threshold_angle_examples():
    assert threshold_angle(1.0, 1.0) == math.pi / 2
    assert threshold_angle(2.0, 1.0) == pytest.approx(math.pi / 6)
    assert threshold_angle(1.0, math.sqrt(0.5)) == pytest.approx(math.pi / 4)
    for k, ky in [(1.0, 1.5), (0.0, 0.0), (1.0, 0.0), (-1.0, -0.5)]:
        with pytest.raises(InvalidWavenumbers):
            threshold_angle(k, ky)


@given(st.floats(0.1, 100), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_threshold_angle_monotone_in_ky(k, a, b):
    lo, hi = sorted((a, b))
    assert threshold_angle(k, lo * k) <= threshold_angle(k, hi * k)
    assert 0 < threshold_angle(k, lo * k) < math.pi / 2


def test_threshold_rule_lookup():
    r = ThresholdRule(default=0.3, per_edge={(1, 2): 0.7})
    assert r.angle(1, 2) == 0.7 and r.angle(0, 0) == 0.3
    assert ThresholdRule.from_wavenumbers(2.0, 1.0).provenance == "computed"
    with pytest.raises(MissingThreshold):
        ThresholdRule().angle(0, 0)
    with pytest.raises(ValueError):
        ThresholdRule(default=2.0)


def test_missing_threshold_on_curved_mesh():
    md = bump_shell(6)
    with pytest.raises(MissingThreshold):
        ShellRule(md, estimate_curvature(md), None)


@pytest.mark.parametrize("secondary", ["angle", "side"])
def test_weights_are_binary(secondary):
    md = bump_shell(6)
    rule = ShellRule(md, estimate_curvature(md), 0.4 * math.pi, secondary=secondary)
    for (j, e) in md.adjacency:
        for psi in np.linspace(-math.pi, math.pi, 37):
            r, t = rule.weights(j, e, float(psi))
            assert (r, t) in ((0.0, 1.0), (1.0, 0.0))


def test_cylinder_reflects_only_steep_rays():
    md = cylinder_mesh(CYL_R, 0.1)
    curv = estimate_curvature(md)
    rule = ShellRule(md, curv, math.pi / 4)
    e1 = _cyl_e1_3d(md, curv)
    for (j, e), nb in md.adjacency.items():
        i = nb.cell
        for psi in np.linspace(-math.pi, math.pi, 25):
            a = psi + rule.info[(j, e)].offset
            d3 = md.embedding[i].rotation.T @ np.r_[math.cos(a), math.sin(a), 0.0]
            ang = math.acos(min(1.0, abs(d3 @ e1[i])))
            if ang < math.pi / 4 - 1e-9:
                assert rule.weights(j, e, float(psi)) == (0.0, 1.0)


def test_disabled_curvature_is_geodesic():
    md = bump_shell(6, mu=0.2)
    disc = discretize(md, make_global_directions(24), 1.0)
    off = assemble(disc, ShellRule(md, estimate_curvature(md), 0.4 * math.pi, enabled=False)).matrix
    geo = assemble(disc, geodesic_rule()).matrix
    assert (off != geo).nnz == 0
    on = assemble(disc, ShellRule(md, estimate_curvature(md), 0.1 * math.pi)).matrix
    assert (on != geo).nnz > 0
