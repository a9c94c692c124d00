import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaflow.directions import local_map, make_global_directions
from deltaflow.dispersion import ALUMINIUM_SHELL, SHELL_OMEGA
from deltaflow.errors import Grazing, NoMatchingEdge, SourceNotVertex, SourceOnBoundary
from deltaflow.meshes import bump_shell, split_square, unit_square
from deltaflow.sources import (
    AcousticPointSource,
    LineSource,
    ShellPointSource,
    coordinate_selector,
    line_source_weights,
    project_acoustic_point_source,
    project_line_source,
    project_shell_point_source,
    star_cells,
)
from deltaflow.transfer import UniformRule, discretize

MU = math.pi / 2
OMEGA = 100 * math.pi


def edge_flux(disc, rho0):
    """sum of entry * |E|^{1/2} per (cell, edge)."""
    w = rho0 * np.sqrt(disc.element_lengths())
    return {k: float(w[b.offset : b.offset + b.size].sum()) for k, b in disc.blocks.items()}


# -- line sources --------------------------------------------------------------------


def test_line_source_aligned_square(square_l4):
    rho0 = project_line_source(LineSource(coordinate_selector(x=0)), square_l4)
    assert np.count_nonzero(rho0) == 1
    assert rho0[square_l4.block(0, 3).offset] == 1.0


def test_line_source_fine_elements():
    disc = discretize(unit_square(mu=MU), make_global_directions(4), 0.0125)
    rho0 = project_line_source(LineSource(coordinate_selector(x=0)), disc)
    nz = rho0[rho0 != 0]
    assert len(nz) == 80
    np.testing.assert_allclose(nz, math.sqrt(0.0125), rtol=1e-12)
    with pytest.raises(NoMatchingEdge):
        project_line_source(LineSource(coordinate_selector(x=7)), disc)


def test_ridge_source_angles_are_nodes():
    for theta0 in (0.39 * math.pi, 0.41 * math.pi):
        disc = discretize(unit_square(mu=0.3), make_global_directions(200), 1.0)
        b = disc.block(0, 3)
        rho0 = project_line_source(LineSource([(0, 3)], theta0), disc)
        (n,) = np.flatnonzero(rho0[b.offset : b.offset + b.size])
        assert b.lmap.phi[n] == pytest.approx(theta0, abs=1e-12)


def test_line_source_refining_directions_keeps_node_mass():
    theta0 = 0.41 * math.pi
    vals = []
    for L in (200, 400, 800):
        disc = discretize(unit_square(mu=0.3), make_global_directions(L), 0.25)
        rho0 = project_line_source(LineSource([(0, 3)], theta0), disc)
        b = disc.block(0, 3)
        nodes = b.lmap.phi[np.flatnonzero(rho0[b.offset : b.offset + b.size]) % b.n_dirs]
        np.testing.assert_allclose(nodes, theta0, atol=1e-12)
        vals.append(np.sort(rho0[rho0 > 0]))
    for v in vals[1:]:
        np.testing.assert_array_equal(v, vals[0])


def test_line_source_between_nodes_is_split_evenly():
    m = local_map(0.0, make_global_directions(8, offset=True).angles)
    assert line_source_weights(m, 0.0) == [(1, 0.5), (2, 0.5)]
    assert line_source_weights(m, 0.1) == [(2, 1.0)]
    with pytest.raises(Grazing):
        line_source_weights(m, math.pi / 2)


# -- acoustic point source -----------------------------------------------------------


def test_point_source_integrand_at_wall_midpoint():
    h = 1e-3
    disc = discretize(unit_square(mu=MU), make_global_directions(4), h)
    rho0 = project_acoustic_point_source(AcousticPointSource((0.5, 0.5), OMEGA), disc)
    b = disc.block(0, 0)
    m = int(0.5 / h)  # element starting at x = 0.5
    entries = rho0[b.offset + m * b.n_dirs : b.offset + (m + 1) * b.n_dirs]
    integrand = entries.sum() / math.sqrt(h)
    assert integrand == pytest.approx(OMEGA * math.exp(-MU * 0.5) / (8 * math.pi * 0.5), rel=1e-5)
    assert integrand == pytest.approx(11.40, abs=5e-3)


def test_point_source_rejects_boundary_location():
    disc = discretize(unit_square(mu=MU), make_global_directions(8), 0.5)
    with pytest.raises(SourceOnBoundary):
        project_acoustic_point_source(AcousticPointSource((0.0, 0.5), OMEGA), disc)


def test_point_source_coupled_cavities():
    md = split_square(mu=MU)
    dirs = make_global_directions(64)
    disc = discretize(md, dirs, 0.1)
    rho0 = project_acoustic_point_source(AcousticPointSource((0.25, 0.5), OMEGA), disc, UniformRule())
    flux = edge_flux(disc, rho0)
    for e in (0, 1, 2):
        assert flux[(1, e)] == 0.0
    assert flux[(0, 1)] == 0.0  # transparent: nothing reflects off the interface
    assert flux[(1, 3)] > 0
    # the transmitted copy keeps its global direction: it matches the reflection the interface would give
    refl = project_acoustic_point_source(AcousticPointSource((0.25, 0.5), OMEGA), disc, UniformRule(reflection=1, transmission=0))
    assert edge_flux(disc, refl)[(0, 1)] == pytest.approx(flux[(1, 3)], rel=1e-12)
    b1, b0 = disc.block(1, 3), disc.block(0, 1)
    t_dirs = set(b1.lmap.global_index[np.flatnonzero(rho0[b1.offset : b1.offset + b1.size]) % b1.n_dirs].tolist())
    incoming = {l for l in range(64) if math.cos(dirs.angles[l]) > 1e-9}
    assert t_dirs <= incoming


def _stratified_edge_flux(md, r0, cell, constant, n_rays=1_000_000):
    """Cast equally spaced rays from r0 and attribute C*2pi/n to the edge each one hits."""
    psi = (np.arange(n_rays) + 0.5) * 2 * math.pi / n_rays
    d = np.column_stack([np.cos(psi), np.sin(psi)])
    c = md.cells[cell]
    normals = np.array([e.normal for e in c.edges])
    dist = c.signed_distances(np.asarray(r0)[None])[0]
    nd = -(normals @ d.T)  # rate of approach to each edge line
    with np.errstate(divide="ignore"):
        t = np.where(nd > 0, dist[:, None] / np.where(nd > 0, nd, 1), np.inf)
    hit = np.argmin(t, axis=0)
    return {e.index: constant * 2 * math.pi / n_rays * float((hit == e.index).sum()) for e in c.edges}


def test_point_source_flux_matches_ray_casting():
    md = split_square(mu=0.0)
    disc = discretize(md, make_global_directions(40, offset=True), 0.1)
    r0 = (0.21, 0.37)
    spec = AcousticPointSource(r0, OMEGA)
    rho0 = project_acoustic_point_source(spec, disc, UniformRule(reflection=0.3, transmission=0.7))
    flux = edge_flux(disc, rho0)
    mc = _stratified_edge_flux(md, r0, 0, spec.constant)
    for e in (0, 2, 3):
        assert flux[(0, e)] == pytest.approx(mc[e], rel=1e-4)
    assert flux[(0, 1)] + flux[(1, 3)] == pytest.approx(mc[1], rel=1e-4)
    assert flux[(0, 1)] == pytest.approx(0.3 * mc[1], rel=1e-4)
    assert sum(flux.values()) == pytest.approx(2 * math.pi * spec.constant, rel=1e-10)


def test_point_source_quadrature_converged():
    disc = discretize(split_square(mu=MU), make_global_directions(128), 0.05)
    spec = AcousticPointSource((0.25, 0.5), OMEGA)
    a = project_acoustic_point_source(spec, disc, order=16)
    b = project_acoustic_point_source(spec, disc, order=32)
    assert np.abs(a - b).max() <= 1e-10 * np.abs(b).max()


@settings(max_examples=15)
@given(st.floats(0.02, 0.98), st.floats(0.02, 0.98), st.integers(5, 60))
def test_point_source_nonnegative(x, y, L):
    disc = discretize(unit_square(mu=0.2), make_global_directions(L), 0.2)
    rho0 = project_acoustic_point_source(AcousticPointSource((x, y), 10.0), disc)
    assert np.all(rho0 >= 0)


# -- shell point source --------------------------------------------------------------


def test_shell_source_constants():
    spec = ShellPointSource(0, SHELL_OMEGA, ALUMINIUM_SHELL)
    k = ALUMINIUM_SHELL.wavenumber(SHELL_OMEGA)
    assert ALUMINIUM_SHELL.slowness == pytest.approx(0.5068, abs=1e-4)
    assert k == pytest.approx(120.527, abs=1e-3)
    assert spec.constant == pytest.approx(k**2 / (16 * math.pi * 2.5e-3 * 2700 * SHELL_OMEGA**1.5), rel=1e-15)


def test_shell_source_support_and_flux():
    md = bump_shell(8, mu=0.0)
    disc = discretize(md, make_global_directions(36), 1.0)
    v = 4 * 9 + 4  # interior vertex
    spec = ShellPointSource(v, SHELL_OMEGA, ALUMINIUM_SHELL)
    rho0 = project_shell_point_source(spec, disc)
    star = set(star_cells(md, v))
    near = star | {md.adjacency[(j, e)].cell for j in star for e in range(3) if (j, e) in md.adjacency}
    flux = edge_flux(disc, rho0)
    for (j, e), f in flux.items():
        if j not in near:
            assert f == 0.0
    # rays leave through the edge opposite the vertex and fill the angle each star cell subtends there;
    # on a curved shell those angles sum to less than 2 pi
    total_angle = 0.0
    for j in star:
        c = md.cells[j]
        k = list(md.shell.tris[j]).index(v)
        a, b = c.vertices[(k + 1) % 3] - c.vertices[k], c.vertices[(k + 2) % 3] - c.vertices[k]
        total_angle += math.acos(a @ b / np.linalg.norm(a) / np.linalg.norm(b))
    assert total_angle < 2 * math.pi
    assert sum(flux.values()) == pytest.approx(total_angle * spec.constant, rel=1e-10)
    with pytest.raises(SourceNotVertex):
        project_shell_point_source(ShellPointSource(None, SHELL_OMEGA, ALUMINIUM_SHELL, (0.51, 0.5, 0.0)), disc)
