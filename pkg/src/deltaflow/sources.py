"""Initial boundary densities projected onto the delta/interval basis.

Line sources put a momentum delta on selected edges. Point sources deposit
the direct field on the boundary as it leaves after its first reflection or
transmission; each edge is cut wherever the outgoing angle crosses an
interval boundary so every piece feeds a single DOF, and the pieces are
integrated with Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .directions import wrap
from .dispersion import PlateMaterial
from .errors import Grazing, NoMatchingEdge, SourceNotVertex, SourceOnBoundary
from .transfer import TRANSPARENT, Discretization, InterfaceRule

GAUSS_ORDER = 16
BOUNDARY_TOL = 1e-12

EdgeSelector = Union[Sequence[tuple[int, int]], Callable[[np.ndarray, np.ndarray], bool]]


@dataclass(frozen=True)
class LineSource:
    edges: EdgeSelector  # (cell, edge) pairs, or predicate on the 3D end points
    theta0: float = 0.0
    amplitude: float = 1.0


@dataclass(frozen=True)
class AcousticPointSource:
    location: tuple[float, float]
    omega: float
    rho_fluid: float = 1.0

    @property
    def constant(self) -> float:
        return self.omega * self.rho_fluid / (8 * math.pi)


@dataclass(frozen=True)
class ShellPointSource:
    vertex: int | None
    omega: float
    material: PlateMaterial
    location: tuple[float, float, float] | None = None

    @property
    def constant(self) -> float:
        m = self.material
        k = m.wavenumber(self.omega)
        return k**2 / (16 * math.pi * m.thickness * m.density * self.omega**1.5)


SourceSpec = Union[LineSource, AcousticPointSource, ShellPointSource]


def select_edges(disc: Discretization, selector: EdgeSelector) -> list[tuple[int, int]]:
    md = disc.md
    if callable(selector):
        out = []
        for j, c in enumerate(md.cells):
            for e in c.edges:
                a = md.to_3d(j, e.start)
                b = md.to_3d(j, e.end)
                if selector(a, b):
                    out.append((j, e.index))
        return out
    return [tuple(x) for x in selector]


def coordinate_selector(**fixed: float) -> Callable[[np.ndarray, np.ndarray], bool]:
    """Edges whose both end points satisfy e.g. x=0, z=0 (tolerance 1e-9)."""
    axis = {"x": 0, "y": 1, "z": 2}
    idx = [(axis[k], v) for k, v in fixed.items()]

    def pred(a, b):
        return all(abs(a[i] - v) < 1e-9 and abs(b[i] - v) < 1e-9 for i, v in idx)

    return pred


def line_source_weights(lmap, theta0: float, tol: float = BOUNDARY_TOL) -> list[tuple[int, float]]:
    """Local directions receiving a momentum delta at theta0, with their shares.

    A delta sitting exactly on the common end of two test intervals is shared
    equally between them, so a source midway between two nodes stays symmetric.
    """
    n = int(lmap.bin(theta0))
    if n < 0:
        raise Grazing(f"line source angle {theta0} is grazing")
    if len(lmap.bounds):
        k = int(np.argmin(np.abs(lmap.bounds - theta0)))
        if abs(lmap.bounds[k] - theta0) <= tol:
            return [(k, 0.5), (k + 1, 0.5)]
    return [(n, 1.0)]


def project_line_source(spec: LineSource, disc: Discretization) -> np.ndarray:
    edges = select_edges(disc, spec.edges)
    if not edges:
        raise NoMatchingEdge("line source selects no edge")
    rho0 = np.zeros(disc.n_dofs)
    for j, e in edges:
        b = disc.block(j, e)
        lens = np.diff(b.bounds)
        for n, share in line_source_weights(b.lmap, spec.theta0):
            rho0[b.offset + np.arange(b.count) * b.n_dirs + n] += share * spec.amplitude * np.sqrt(lens)
    return rho0


@dataclass
class _Branch:
    cell: int
    edge: int
    lmap: object
    offset: int
    n_dirs: int
    count: int
    bounds: np.ndarray  # element bounds in the target's arclength
    reverse: bool  # target traverses the edge the other way
    to_theta: Callable[[np.ndarray], np.ndarray]  # source-frame propagation angle -> target local angle
    from_theta: Callable[[np.ndarray], np.ndarray]  # inverse
    weight: Callable[[float], float]


def _branches(disc: Discretization, rule: InterfaceRule, j: int, e: int, free_weight: float | None = None):
    md = disc.md
    edge = md.cells[j].edges[e]
    b = disc.block(j, e)
    g = edge.gamma
    refl = _Branch(
        j, e, b.lmap, b.offset, b.n_dirs, b.count, b.bounds, False,
        lambda psi: -wrap(g + math.pi - psi),
        lambda th: g + math.pi + th,
        (lambda psi: free_weight) if (edge.is_free and free_weight is not None)
        else (lambda psi: rule.free_weight(j, e, psi)) if edge.is_free
        else (lambda psi: rule.weights(j, e, psi)[0]),
    )
    out = [refl]
    if not edge.is_free:
        from .directions import transmit_offset

        nb = md.adjacency[(j, e)]
        bi = disc.block(nb.cell, nb.edge)
        gi = md.cells[nb.cell].edges[nb.edge].gamma
        off = transmit_offset(md, j, e)
        out.append(
            _Branch(
                nb.cell, nb.edge, bi.lmap, bi.offset, bi.n_dirs, bi.count, bi.bounds, True,
                lambda psi: wrap(gi - psi - off),
                lambda th: gi - off - th,
                lambda psi: rule.weights(j, e, psi)[1],
            )
        )
    return out


def _edge_param(edge, r0: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Arclength on ``edge`` where the ray from r0 at angle psi meets the edge line."""
    d = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
    t = edge.tangent
    w = r0 - edge.start
    num = w[0] * d[..., 1] - w[1] * d[..., 0]
    den = t[0] * d[..., 1] - t[1] * d[..., 0]
    return edge.s_start + num / den


def _project_from_point(
    disc: Discretization,
    rule: InterfaceRule,
    emitters: Sequence[tuple[int, np.ndarray, Sequence[int]]],
    constant: float,
    order: int = GAUSS_ORDER,
    free_weight: float | None = None,
) -> np.ndarray:
    """Deposit C cos(theta) exp(-mu D)/D from interior/vertex points onto edges.

    ``emitters`` lists (cell, source point in that cell's frame, edges lit).
    """
    xg, wg = np.polynomial.legendre.leggauss(order)
    rho0 = np.zeros(disc.n_dofs)
    md = disc.md
    for j, r0, edges in emitters:
        cell = md.cells[j]
        mu = cell.mu
        for e in edges:
            edge = cell.edges[e]
            ends = np.array([edge.s_start, edge.s_end])
            pts = edge.start + (ends - edge.s_start)[:, None] * edge.tangent
            psi_ends = np.arctan2(pts[:, 1] - r0[1], pts[:, 0] - r0[0])
            # unwrap so the angle varies continuously along the edge
            psi_ends[1] = psi_ends[0] + wrap(psi_ends[1] - psi_ends[0])
            for br in _branches(disc, rule, j, e, free_weight):
                th_ends = br.to_theta(psi_ends)
                lo, hi = np.sort(th_ends)
                cuts = br.lmap.bounds[(br.lmap.bounds > lo) & (br.lmap.bounds < hi)]
                s_cuts = _edge_param(edge, r0, br.from_theta(cuts)) if len(cuts) else np.zeros(0)
                if br.reverse:
                    el_bounds = edge.s_end - (br.bounds[::-1] - br.bounds[0])
                else:
                    el_bounds = br.bounds
                # clip rather than filter: reversed element bounds can round just past the edge ends
                s_all = np.unique(np.clip(np.concatenate([[edge.s_start, edge.s_end], el_bounds, s_cuts]), edge.s_start, edge.s_end))
                a, bnd = s_all[:-1], s_all[1:]
                good = bnd - a > 1e-14 * edge.length
                a, bnd = a[good], bnd[good]
                half = 0.5 * (bnd - a)
                s_q = (0.5 * (a + bnd))[:, None] + half[:, None] * xg[None, :]
                p_q = edge.start + (s_q - edge.s_start)[..., None] * edge.tangent
                v = p_q - r0
                D = np.hypot(v[..., 0], v[..., 1])
                cos_arr = -(v @ edge.normal) / D
                vals = (constant * cos_arr * np.exp(-mu * D) / D) @ wg * half
                s_mid = 0.5 * (a + bnd)
                p_mid = edge.start + (s_mid - edge.s_start)[:, None] * edge.tangent
                psi_mid = np.arctan2(p_mid[:, 1] - r0[1], p_mid[:, 0] - r0[0])
                n = br.lmap.bin(br.to_theta(psi_mid))
                # element index in the target's own numbering
                local = np.clip(np.searchsorted(el_bounds, s_mid, side="right") - 1, 0, br.count - 1)
                if br.reverse:
                    local = br.count - 1 - local
                w = np.array([br.weight(float(p)) for p in psi_mid]) if len(psi_mid) else np.zeros(0)
                ok = (n >= 0) & (w > 0)
                lens = np.diff(br.bounds)
                idx = br.offset + local[ok] * br.n_dirs + n[ok]
                np.add.at(rho0, idx, w[ok] * vals[ok] / np.sqrt(lens[local[ok]]))
    return rho0


def project_acoustic_point_source(
    spec: AcousticPointSource, disc: Discretization, rule: InterfaceRule = TRANSPARENT, order: int = GAUSS_ORDER
) -> np.ndarray:
    """Acoustic point source in the cell that contains it.

    Free edges of the source cell reflect, shared edges split into R (back into
    the source cell) and T (into the neighbour); every other edge gets nothing.
    """
    md = disc.md
    r0 = np.asarray(spec.location, dtype=float)
    j = int(md.locate(r0[None])[0])
    if j < 0:
        raise SourceOnBoundary(f"source {tuple(r0)} is outside the domain")
    cell = md.cells[j]
    if cell.signed_distances(r0[None]).min() < 1e-9 * cell.diameter:
        raise SourceOnBoundary(f"source {tuple(r0)} is on the boundary of cell {j}")
    return _project_from_point(disc, rule, [(j, r0, range(len(cell.edges)))], spec.constant, order)


def source_vertex(md, spec: ShellPointSource) -> int:
    nodes = md.shell.nodes
    if spec.vertex is not None:
        if not 0 <= spec.vertex < len(nodes):
            raise SourceNotVertex(f"vertex {spec.vertex} does not exist")
        return int(spec.vertex)
    r0 = np.asarray(spec.location, dtype=float)
    dist = np.linalg.norm(nodes - r0, axis=1)
    v = int(np.argmin(dist))
    if dist[v] > 1e-9 * md.diameter:
        raise SourceNotVertex(f"source {tuple(r0)} is not a mesh vertex")
    return v


def star_cells(md, vertex: int) -> list[int]:
    return [j for j, t in enumerate(md.shell.tris) if vertex in t]


def project_shell_point_source(spec: ShellPointSource, disc: Discretization, order: int = GAUSS_ORDER) -> np.ndarray:
    """Bending-wave point source at a mesh vertex.

    Rays from the vertex cross each star cell to its opposite edge; a free
    opposite edge reflects them back, a shared one passes them to the
    neighbouring cell. The neighbourhood of the source is taken as flat and
    homogeneous, so both weights are one.
    """
    md = disc.md
    if md.shell is None:
        raise SourceNotVertex("shell point sources need a triangle mesh")
    v = source_vertex(md, spec)
    emitters = []
    for j in star_cells(md, v):
        t = list(md.shell.tris[j])
        k = t.index(v)
        r0 = md.cells[j].vertices[k]
        opposite = (k + 1) % 3  # edge from t[k+1] to t[k+2]
        emitters.append((j, r0, [opposite]))
    return _project_from_point(disc, TRANSPARENT, emitters, spec.constant, order, free_weight=1.0)


def project_source(spec: SourceSpec, disc: Discretization, rule: InterfaceRule = TRANSPARENT) -> np.ndarray:
    if isinstance(spec, LineSource):
        return project_line_source(spec, disc)
    if isinstance(spec, AcousticPointSource):
        return project_acoustic_point_source(spec, disc, rule)
    if isinstance(spec, ShellPointSource):
        return project_shell_point_source(spec, disc)
    raise TypeError(f"unknown source {spec!r}")
