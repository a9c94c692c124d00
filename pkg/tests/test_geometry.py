import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltaflow.errors import ClockwiseOrder, DegenerateEdge, MeshFormatError, NonConformingEdge, NonConvex, OutOfRange
from deltaflow.geometry import (
    arclength_to_point,
    build_element_grid,
    build_multidomain,
    build_polygon_domain,
    multidomain_from_mesh,
    point_to_arclength,
    read_mesh,
    subdivide_boundary,
    write_mesh,
)
from deltaflow.meshes import UNIT_SQUARE, quad_grid, rectangle, split_square, triangulate_square


def test_unit_square_arclength_and_fourth_edge():
    sq = build_polygon_domain(UNIT_SQUARE, eta=1, mu=math.pi / 2)
    assert sq.perimeter == 4
    e = sq.edges[3]
    assert (e.s_start, e.s_end) == (3, 4)
    np.testing.assert_array_equal(e.start, [0, 1])
    np.testing.assert_array_equal(e.end, [0, 0])
    np.testing.assert_allclose(e.normal, [1, 0])


def test_triangle_perimeter():
    tri = build_polygon_domain([(0, 0), (1, 0), (0, 1)])
    assert tri.perimeter == pytest.approx(2 + math.sqrt(2), rel=1e-15)


def test_rejects_bad_polygons():
    with pytest.raises((DegenerateEdge, NonConvex)):
        build_polygon_domain([(0, 0), (1, 0), (2, 0)])
    with pytest.raises(ClockwiseOrder):
        build_polygon_domain([(0, 0), (0, 1), (1, 1), (1, 0)])
    with pytest.raises(NonConvex):
        build_polygon_domain([(0, 0), (2, 0), (1, 0.2), (1, 2)])
    with pytest.raises(DegenerateEdge):
        build_polygon_domain([(0, 0), (1, 0), (1, 1e-14), (0, 1)])


def test_subdivision_counts():
    sq = build_polygon_domain(UNIT_SQUARE)
    els = subdivide_boundary(sq, 0.0125)
    assert len(els) == 320
    assert all(el.length == pytest.approx(0.0125, rel=1e-12) for el in els)
    assert len(subdivide_boundary(sq, 2.0)) == 4
    strip = build_polygon_domain([(0, 0), (0.3, 0), (0.3, 1), (0, 1)])
    bottom = [el for el in subdivide_boundary(strip, 0.0125) if el.edge == 0]
    assert len(bottom) == 24
    assert sum(el.length for el in bottom) == pytest.approx(0.3, rel=1e-14)


@given(st.floats(0.01, 0.7))
def test_elements_tile_the_perimeter(h):
    cell = build_polygon_domain([(0, 0), (1.3, 0.1), (1.1, 0.9), (0.2, 1.2)])
    els = subdivide_boundary(cell, h)
    assert els[0].s_lo == 0.0
    assert els[-1].s_hi == cell.perimeter
    for a, b in zip(els, els[1:]):
        assert a.s_hi == b.s_lo
    assert sum(el.length for el in els) == pytest.approx(cell.perimeter, rel=1e-12)
    for el in els:
        e = cell.edges[el.edge]
        assert e.s_start <= el.s_lo < el.s_hi <= e.s_end


def test_arclength_to_point_half_open():
    sq = build_polygon_domain(UNIT_SQUARE)
    p, k = arclength_to_point(sq, 0.5)
    np.testing.assert_allclose(p, [0.5, 0])
    assert k == 0
    p, k = arclength_to_point(sq, 1.0)
    np.testing.assert_allclose(p, [1, 0])
    assert k == 1
    p, k = arclength_to_point(sq, 3.25)
    np.testing.assert_allclose(p, [0, 0.75])
    assert k == 3
    with pytest.raises(OutOfRange):
        arclength_to_point(sq, 4.0)


def test_split_square_adjacency():
    md = split_square()
    assert md.shared_edges() == [((0, 1), (1, 3))]
    assert md.adjacency[(0, 1)].cell == 1 and md.adjacency[(1, 3)].cell == 0


def test_quad_grid_shared_edge_count():
    md = quad_grid(10)
    assert len(md.shared_edges()) == 180
    for (j, e), nb in md.adjacency.items():
        back = md.adjacency[(nb.cell, nb.edge)]
        assert (back.cell, back.edge) == (j, e)


def test_nonconforming_edge():
    md = build_multidomain([rectangle(0, 0, 1, 1), rectangle(1, 0, 2, 1)])
    with pytest.raises(NonConformingEdge):
        build_element_grid(md, [[1, 3, 1, 1], [1, 1, 1, 4]])
    build_element_grid(md, [[1, 4, 1, 1], [1, 1, 1, 4]])


@given(st.integers(1, 12), st.floats(0.0, 1.0))
def test_shared_edge_correspondence_roundtrip(n, u):
    md = split_square()
    grid = build_element_grid(md, 1.0 / n)
    j, e = 0, 1
    edge = md.cells[j].edges[e]
    s = edge.s_start + u * edge.length * (1 - 1e-12)
    p = edge.start + (s - edge.s_start) * edge.tangent
    local = min(int((s - edge.s_start) / edge.length * n), n - 1)
    i, ei, li = grid.partner(md, j, e, local)
    other = md.cells[i].edges[ei]
    s_i = point_to_arclength(md.cells[i], ei, p)
    el = grid.on_edge(i, ei)[li]
    assert el.s_lo - 1e-12 <= s_i <= el.s_hi + 1e-12
    assert grid.partner(md, i, ei, li) == (j, e, local)
    assert other.length == pytest.approx(edge.length)


@given(st.integers(0, 10**6))
def test_chords_stay_inside(seed):
    rng = np.random.default_rng(seed)
    cell = build_polygon_domain([(0, 0), (1.3, 0.1), (1.1, 0.9), (0.2, 1.2)])
    s = rng.uniform(0, cell.perimeter, size=2)
    a, _ = arclength_to_point(cell, s[0])
    b, _ = arclength_to_point(cell, s[1])
    t = rng.uniform(0, 1, size=20)[:, None]
    assert cell.contains(a + t * (b - a), tol=1e-12).all()


def test_shell_embedding_preserves_lengths():
    nodes = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0.3], [0, 1, 0.3]], dtype=float)
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    md = multidomain_from_mesh(nodes, tris)
    for j, t in enumerate(tris):
        for k, e in enumerate(md.cells[j].edges):
            a, b = nodes[t[k]], nodes[t[(k + 1) % 3]]
            assert e.length == pytest.approx(np.linalg.norm(b - a), rel=1e-13)
            np.testing.assert_allclose(md.to_3d(j, e.start), a, atol=1e-13)
    assert len(md.shared_edges()) == 1


def test_mesh_file_roundtrip(tmp_path):
    nodes, tris = triangulate_square(0.4)
    path = tmp_path / "m.txt"
    write_mesh(path, nodes, tris, [(0, 4)])
    n2, t2, free = read_mesh(path)
    np.testing.assert_array_equal(n2[:, :2], nodes)
    np.testing.assert_array_equal(t2, tris)
    assert free == [(0, 4)]
    bad = tmp_path / "bad.txt"
    bad.write_text("nodes 2\n0 0 0\n")
    with pytest.raises(MeshFormatError):
        read_mesh(bad)
