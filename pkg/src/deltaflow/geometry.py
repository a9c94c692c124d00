"""Convex polygonal cells, boundary elements and multi-domain topology.

All transport math runs in 2D, per cell. Flat multi-domains share one frame
(the global xy-plane); triangulated shells carry a per-cell embedding that maps
cell coordinates to 3D (``Embedding``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ClockwiseOrder,
    DegenerateEdge,
    MeshFormatError,
    NonConformingEdge,
    NonConvex,
    OrphanOverlap,
    OutOfRange,
)


@dataclass(frozen=True)
class Shared:
    """Neighbour across a shared edge."""

    cell: int
    edge: int
    reversed: bool = True


@dataclass(frozen=True, eq=False)
class EdgeRef:
    index: int
    s_start: float
    s_end: float
    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray  # inward unit normal
    gamma: float  # angle of the inward normal in the cell frame
    neighbor: Shared | None = None

    @property
    def length(self) -> float:
        return self.s_end - self.s_start

    @property
    def tangent(self) -> np.ndarray:
        return (self.end - self.start) / self.length

    @property
    def is_free(self) -> bool:
        return self.neighbor is None


@dataclass(frozen=True, eq=False)
class SubDomain:
    id: int
    vertices: np.ndarray
    eta: float
    mu: float
    edges: tuple[EdgeRef, ...]

    @property
    def perimeter(self) -> float:
        return self.edges[-1].s_end

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        a = cr.sum() / 2.0
        return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * a)

    @property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))

    def signed_distances(self, points: np.ndarray) -> np.ndarray:
        """Distance of each point to each edge line, positive inside. Shape (P, E)."""
        pts = np.atleast_2d(points)
        starts = np.array([e.start for e in self.edges])
        normals = np.array([e.normal for e in self.edges])
        return np.einsum("ped,ed->pe", pts[:, None, :] - starts[None], normals)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return (self.signed_distances(points) >= -tol).all(axis=1)

    def with_neighbors(self, neighbors: dict[int, Shared]) -> "SubDomain":
        edges = tuple(replace(e, neighbor=neighbors.get(e.index)) for e in self.edges)
        return replace(self, edges=edges)


@dataclass(frozen=True)
class BoundaryElement:
    cell: int
    edge: int
    index: int  # index within the cell
    local: int  # index within the edge
    s_lo: float
    s_hi: float

    @property
    def length(self) -> float:
        return self.s_hi - self.s_lo


@dataclass(frozen=True, eq=False)
class Embedding:
    """Placement of a flat cell in 3D: p3 = x*ex + y*ey + offset*normal."""

    ex: np.ndarray
    ey: np.ndarray
    normal: np.ndarray
    offset: float

    @property
    def rotation(self) -> np.ndarray:
        return np.array([self.ex, self.ey, self.normal])

    def to_3d(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return xy[..., :1] * self.ex + xy[..., 1:2] * self.ey + self.offset * self.normal

    def to_2d(self, p3: np.ndarray) -> np.ndarray:
        p3 = np.asarray(p3, dtype=float)
        return np.stack([p3 @ self.ex, p3 @ self.ey], axis=-1)


@dataclass(frozen=True, eq=False)
class ShellMesh:
    nodes: np.ndarray  # (N, 3)
    tris: np.ndarray  # (K, 3) node indices, cell j <-> tris[j]
    free_edges: frozenset[tuple[int, int]] = frozenset()


@dataclass(frozen=True, eq=False)
class MultiDomain:
    cells: tuple[SubDomain, ...]
    adjacency: dict[tuple[int, int], Shared]
    embedding: tuple[Embedding, ...] | None = None
    shell: ShellMesh | None = None

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def diameter(self) -> float:
        pts = self.points3d_of_vertices() if self.embedding else np.vstack([c.vertices for c in self.cells])
        lo, hi = pts.min(0), pts.max(0)
        return float(np.linalg.norm(hi - lo))

    def points3d_of_vertices(self) -> np.ndarray:
        if self.shell is not None:
            return self.shell.nodes
        return np.vstack([np.column_stack([c.vertices, np.zeros(len(c.vertices))]) for c in self.cells])

    def centroids(self) -> np.ndarray:
        return np.array([c.centroid for c in self.cells])

    def to_3d(self, cell: int, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        if self.embedding is None:
            return np.concatenate([xy, np.zeros(xy.shape[:-1] + (1,))], axis=-1)
        return self.embedding[cell].to_3d(xy)

    def shared_edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Each shared edge once, as ((j, e), (i, e'))."""
        out = []
        for (j, e), nb in sorted(self.adjacency.items()):
            if (j, e) < (nb.cell, nb.edge):
                out.append(((j, e), (nb.cell, nb.edge)))
        return out

    def locate(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Cell index containing each (planar) point, -1 if none."""
        pts = np.atleast_2d(points)
        out = np.full(len(pts), -1)
        cents = self.centroids()
        tree = cKDTree(cents)
        k = min(len(self.cells), 12)
        _, cand = tree.query(pts, k=k)
        cand = np.asarray(cand).reshape(len(pts), -1)
        for p_idx, p in enumerate(pts):
            for j in cand[p_idx]:
                if self.cells[j].contains(p[None], tol)[0]:
                    out[p_idx] = j
                    break
            else:
                for j, c in enumerate(self.cells):
                    if c.contains(p[None], tol)[0]:
                        out[p_idx] = j
                        break
        return out


def build_polygon_domain(vertices: Sequence[Sequence[float]], eta: float = 1.0, mu: float = 0.0, id: int = 0) -> SubDomain:
    """Convex CCW polygon with arclength parametrisation starting at vertex 0."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise NonConvex("need at least three 2D vertices")
    if not eta > 0 or not mu >= 0:
        raise ValueError("eta must be > 0 and mu >= 0")
    diam = float(np.sqrt(((v[:, None] - v[None]) ** 2).sum(-1)).max())
    vec = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(vec[:, 0], vec[:, 1])
    if diam == 0 or lengths.min() < 1e-12 * diam:
        raise DegenerateEdge("edge shorter than 1e-12 of the diameter")
    nxt = np.roll(vec, -1, axis=0)
    cross = vec[:, 0] * nxt[:, 1] - vec[:, 1] * nxt[:, 0]
    scale = lengths * np.roll(lengths, -1)
    rel = cross / scale
    if np.any(np.abs(rel) < 1e-12):
        raise NonConvex("collinear consecutive edges")
    if np.all(rel < 0):
        raise ClockwiseOrder("vertices are ordered clockwise")
    if not np.all(rel > 0):
        raise NonConvex("polygon is not convex")
    edges = []
    s = 0.0
    n = len(v)
    for k in range(n):
        a, b = v[k], v[(k + 1) % n]
        t = (b - a) / lengths[k]
        normal = np.array([-t[1], t[0]])
        edges.append(
            EdgeRef(
                index=k,
                s_start=s,
                s_end=s + float(lengths[k]),
                start=a.copy(),
                end=b.copy(),
                normal=normal,
                gamma=math.atan2(normal[1], normal[0]),
            )
        )
        s += float(lengths[k])
    return SubDomain(id=id, vertices=v, eta=float(eta), mu=float(mu), edges=tuple(edges))


def element_count(length: float, target_h: float) -> int:
    return max(1, int(round(length / target_h)))


def subdivide_boundary(domain: SubDomain, target_h: float | Sequence[int]) -> list[BoundaryElement]:
    """Equal elements per edge; ``target_h`` may also be an explicit per-edge count list."""
    out = []
    idx = 0
    for e in domain.edges:
        if np.isscalar(target_h):
            if not target_h > 0:
                raise ValueError("target_h must be positive")
            n = element_count(e.length, float(target_h))
        else:
            n = int(target_h[e.index])
        bounds = e.s_start + e.length * np.arange(n + 1) / n
        bounds[-1] = e.s_end
        for k in range(n):
            out.append(BoundaryElement(domain.id, e.index, idx, k, float(bounds[k]), float(bounds[k + 1])))
            idx += 1
    return out


def arclength_to_point(domain: SubDomain, s: float) -> tuple[np.ndarray, int]:
    if not 0.0 <= s < domain.perimeter:
        raise OutOfRange(f"s={s} outside [0, {domain.perimeter})")
    starts = np.array([e.s_start for e in domain.edges])
    k = int(np.searchsorted(starts, s, side="right") - 1)
    e = domain.edges[k]
    return e.start + (s - e.s_start) * e.tangent, k


def point_to_arclength(domain: SubDomain, edge: int, p: np.ndarray) -> float:
    e = domain.edges[edge]
    return e.s_start + float(np.dot(np.asarray(p) - e.start, e.tangent))


def build_multidomain(cells: Sequence[SubDomain], tolerance: float | None = None) -> MultiDomain:
    """Connect cells whose edges coincide (with opposite orientation)."""
    cells = [replace(c, id=j) for j, c in enumerate(cells)]
    allv = np.vstack([c.vertices for c in cells])
    diam = float(np.linalg.norm(allv.max(0) - allv.min(0)))
    tol = 1e-9 * diam if tolerance is None else tolerance
    keys = [(j, e.index) for j, c in enumerate(cells) for e in c.edges]
    starts = np.array([cells[j].edges[k].start for j, k in keys])
    ends = np.array([cells[j].edges[k].end for j, k in keys])
    tree = cKDTree((starts + ends) / 2)
    adjacency: dict[tuple[int, int], Shared] = {}
    for a, b in sorted(tree.query_pairs(max(tol, 1e-300) * 2 + 1e-300)):
        ja, jb = keys[a][0], keys[b][0]
        if ja == jb:
            continue
        rev = np.linalg.norm(starts[a] - ends[b]) <= tol and np.linalg.norm(ends[a] - starts[b]) <= tol
        same = np.linalg.norm(starts[a] - starts[b]) <= tol and np.linalg.norm(ends[a] - ends[b]) <= tol
        if same:
            raise OrphanOverlap(f"cells {ja} and {jb} lie on the same side of a common edge")
        if not rev:
            continue
        if keys[a] in adjacency or keys[b] in adjacency:
            raise OrphanOverlap(f"edge {keys[a]} or {keys[b]} matched more than once")
        adjacency[keys[a]] = Shared(jb, keys[b][1])
        adjacency[keys[b]] = Shared(ja, keys[a][1])
    out = []
    for j, c in enumerate(cells):
        out.append(c.with_neighbors({e: nb for (jj, e), nb in adjacency.items() if jj == j}))
    return MultiDomain(cells=tuple(out), adjacency=adjacency)


def multidomain_from_mesh(
    nodes: np.ndarray,
    tris: np.ndarray,
    free_edges: Iterable[tuple[int, int]] | None = None,
    eta: float = 1.0,
    mu: float = 0.0,
) -> MultiDomain:
    """Triangle mesh (consistently oriented) -> MultiDomain with per-cell 3D embedding.

    Cell j's 2D coordinates live in the frame returned by ``directions.cell_frame``
    for the triangle normal. Edge k of a cell runs from tris[j][k] to tris[j][k+1].
    """
    from .directions import cell_frame

    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape[1] == 2:
        nodes = np.column_stack([nodes, np.zeros(len(nodes))])
    tris = np.asarray(tris, dtype=int)
    free = {tuple(sorted(e)) for e in (free_edges or ())}
    cells = []
    embeds = []
    for j, t in enumerate(tris):
        p = nodes[t]
        nrm = np.cross(p[1] - p[0], p[2] - p[0])
        area2 = np.linalg.norm(nrm)
        if area2 == 0:
            raise DegenerateEdge(f"triangle {j} has zero area")
        nrm = nrm / area2
        frame = cell_frame(nrm)
        rot = frame.rotation
        emb = Embedding(ex=rot[0], ey=rot[1], normal=rot[2], offset=float(np.mean(p @ rot[2])))
        cells.append(build_polygon_domain(emb.to_2d(p), eta=eta, mu=mu, id=j))
        embeds.append(emb)
    directed: dict[tuple[int, int], tuple[int, int]] = {}
    for j, t in enumerate(tris):
        for k in range(3):
            a, b = int(t[k]), int(t[(k + 1) % 3])
            if (a, b) in directed:
                raise OrphanOverlap(f"edge ({a},{b}) used twice with the same orientation; mesh not consistently oriented")
            directed[(a, b)] = (j, k)
    adjacency: dict[tuple[int, int], Shared] = {}
    for (a, b), (j, k) in directed.items():
        other = directed.get((b, a))
        if other is None or tuple(sorted((a, b))) in free:
            continue
        adjacency[(j, k)] = Shared(other[0], other[1])
    out = [c.with_neighbors({e: nb for (jj, e), nb in adjacency.items() if jj == j}) for j, c in enumerate(cells)]
    return MultiDomain(
        cells=tuple(out),
        adjacency=adjacency,
        embedding=tuple(embeds),
        shell=ShellMesh(nodes=nodes, tris=tris, free_edges=frozenset(free)),
    )


@dataclass(frozen=True, eq=False)
class ElementGrid:
    """Boundary elements of every cell with the shared-edge correspondence."""

    elements: tuple[tuple[BoundaryElement, ...], ...]
    edge_elements: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)  # (j,e) -> (first, count)

    def on_edge(self, j: int, e: int) -> tuple[BoundaryElement, ...]:
        first, n = self.edge_elements[(j, e)]
        return self.elements[j][first : first + n]

    def partner(self, md: MultiDomain, j: int, e: int, local: int) -> tuple[int, int, int]:
        """(cell, edge, local element) on the other side of a shared edge."""
        nb = md.adjacency[(j, e)]
        n = self.edge_elements[(j, e)][1]
        return nb.cell, nb.edge, n - 1 - local if nb.reversed else local


def build_element_grid(md: MultiDomain, target_h: float | Sequence[float]) -> ElementGrid:
    """Subdivide every cell; ``target_h`` is global or per cell.

    Raises NonConformingEdge when the two sides of a shared edge disagree.
    """
    per_cell = [target_h] * len(md.cells) if np.isscalar(target_h) else list(target_h)
    elements = []
    edge_elements = {}
    for j, c in enumerate(md.cells):
        els = subdivide_boundary(c, per_cell[j])
        elements.append(tuple(els))
        for e in c.edges:
            idx = [el.index for el in els if el.edge == e.index]
            edge_elements[(j, e.index)] = (idx[0], len(idx))
    for (j, e), nb in md.adjacency.items():
        nj = edge_elements[(j, e)][1]
        ni = edge_elements[(nb.cell, nb.edge)][1]
        if nj != ni:
            raise NonConformingEdge(f"cell {j} edge {e} has {nj} elements, neighbour {nb.cell} edge {nb.edge} has {ni}")
    return ElementGrid(elements=tuple(elements), edge_elements=edge_elements)


# -- mesh files ---------------------------------------------------------------


def read_mesh(path: str | Path) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]] | None]:
    """Read ``nodes N / x y z ... / tris T / a b c ... [/ free_edges F / a b ...]``."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    pos = 0

    def header(name: str) -> int:
        nonlocal pos
        parts = lines[pos].split() if pos < len(lines) else []
        if len(parts) != 2 or parts[0] != name:
            raise MeshFormatError(f"expected '{name} <count>' at data line {pos + 1}")
        pos += 1
        return int(parts[1])

    def block(n: int, width: int, kind: type) -> np.ndarray:
        nonlocal pos
        if pos + n > len(lines):
            raise MeshFormatError("unexpected end of mesh file")
        try:
            rows = [[kind(x) for x in lines[pos + i].split()] for i in range(n)]
        except ValueError as exc:
            raise MeshFormatError(str(exc)) from exc
        if any(len(r) != width for r in rows):
            raise MeshFormatError(f"expected {width} values per row")
        pos += n
        return np.array(rows, dtype=kind).reshape(n, width)

    try:
        nodes = block(header("nodes"), 3, float)
        tris = block(header("tris"), 3, int)
        free = None
        if pos < len(lines):
            free = [tuple(r) for r in block(header("free_edges"), 2, int).tolist()]
    except IndexError as exc:
        raise MeshFormatError("truncated mesh file") from exc
    if tris.size and (tris.min() < 0 or tris.max() >= len(nodes)):
        raise MeshFormatError("triangle references a missing node")
    return nodes, tris, free


def write_mesh(path: str | Path, nodes: np.ndarray, tris: np.ndarray, free_edges: Iterable[tuple[int, int]] | None = None) -> None:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape[1] == 2:
        nodes = np.column_stack([nodes, np.zeros(len(nodes))])
    out = [f"nodes {len(nodes)}"]
    out += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in nodes]
    out.append(f"tris {len(tris)}")
    out += [f"{a} {b} {c}" for a, b, c in np.asarray(tris, dtype=int)]
    if free_edges is not None:
        fe = list(free_edges)
        out.append(f"free_edges {len(fe)}")
        out += [f"{a} {b}" for a, b in fe]
    Path(path).write_text("\n".join(out) + "\n")
