"""Sparse transfer matrix of the damped boundary map in the delta direction basis.

For a source DOF (cell j, element m, direction n) every ray leaves the element
with the same propagation angle, so the rays are the lines of constant
``q = x . d_perp``. Back-projecting all element end points of the cell onto
the q axis splits the source element into pieces on which the receiving
element is fixed and the path length is linear in arclength; each piece is
integrated in closed form.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .directions import EPS_GRAZE, HALF_PI, GlobalDirectionSet, LocalDirectionMap, local_map, transmit_offset, wrap
from .errors import Grazing, NegativeLength, NoHit
from .geometry import ElementGrid, MultiDomain, SubDomain, build_element_grid

DROP_BELOW = 1e-300
SERIES_CUTOFF = 1e-8


# -- discretisation -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EdgeBlock:
    cell: int
    edge: int
    first: int  # first cell-local element index on this edge
    count: int
    offset: int  # first DOF
    lmap: LocalDirectionMap
    bounds: np.ndarray  # element arclength bounds, count + 1 values

    @property
    def n_dirs(self) -> int:
        return len(self.lmap)

    @property
    def size(self) -> int:
        return self.count * self.n_dirs


@dataclass(frozen=True)
class DofIndex:
    cell: int
    element: int  # cell-local element index
    direction: int  # local direction index on the element's edge
    index: int  # packed


@dataclass(eq=False)
class Discretization:
    md: MultiDomain
    dirs: GlobalDirectionSet
    grid: ElementGrid
    blocks: dict[tuple[int, int], EdgeBlock]
    n_dofs: int
    _dof_len: np.ndarray | None = field(default=None, repr=False)

    def block(self, j: int, e: int) -> EdgeBlock:
        return self.blocks[(j, e)]

    def dof(self, j: int, e: int, local: int, n: int) -> int:
        b = self.blocks[(j, e)]
        return b.offset + local * b.n_dirs + n

    def unpack(self, index: int) -> DofIndex:
        for b in self.blocks.values():
            if b.offset <= index < b.offset + b.size:
                local, n = divmod(index - b.offset, b.n_dirs)
                return DofIndex(b.cell, b.first + local, n, index)
        raise IndexError(index)

    def element_lengths(self) -> np.ndarray:
        """|E| of the element carrying each DOF."""
        if self._dof_len is None:
            out = np.empty(self.n_dofs)
            for b in self.blocks.values():
                out[b.offset : b.offset + b.size] = np.repeat(np.diff(b.bounds), b.n_dirs)
            self._dof_len = out
        return self._dof_len

    def cell_slices(self) -> list[slice]:
        out = []
        for j, c in enumerate(self.md.cells):
            first = self.blocks[(j, 0)].offset
            last = self.blocks[(j, len(c.edges) - 1)]
            out.append(slice(first, last.offset + last.size))
        return out


def discretize(md: MultiDomain, dirs: GlobalDirectionSet, target_h: float | Sequence[float]) -> Discretization:
    grid = build_element_grid(md, target_h)
    blocks = {}
    offset = 0
    for j, c in enumerate(md.cells):
        for e in c.edges:
            first, count = grid.edge_elements[(j, e.index)]
            els = grid.elements[j][first : first + count]
            bounds = np.array([el.s_lo for el in els] + [els[-1].s_hi])
            b = EdgeBlock(j, e.index, first, count, offset, local_map(e.gamma, dirs.angles, c.eta), bounds)
            blocks[(j, e.index)] = b
            offset += b.size
    return Discretization(md=md, dirs=dirs, grid=grid, blocks=blocks, n_dofs=offset)


# -- interface rules ----------------------------------------------------------


class InterfaceRule:
    """Reflection/transmission weights, constant per (edge, direction)."""

    def free_weight(self, j: int, e: int, psi: float) -> float:
        return 1.0

    def weights(self, j: int, e: int, psi: float) -> tuple[float, float]:
        """(R, T) for a ray with propagation angle ``psi`` (cell-j frame) hitting shared edge e."""
        return 0.0, 1.0


@dataclass
class UniformRule(InterfaceRule):
    reflection: float = 0.0
    transmission: float = 1.0
    free_reflection: float = 1.0
    overrides: dict[tuple[int, int], tuple[float, float]] = field(default_factory=dict)
    free_overrides: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        vals = [self.reflection, self.transmission, self.free_reflection, *self.free_overrides.values()]
        vals += [v for rt in self.overrides.values() for v in rt]
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("reflection/transmission weights must lie in [0, 1]")

    def free_weight(self, j, e, psi):
        return self.free_overrides.get((j, e), self.free_reflection)

    def weights(self, j, e, psi):
        return self.overrides.get((j, e), (self.reflection, self.transmission))


TRANSPARENT = UniformRule()


# -- scalar ray tracing --------------------------------------------------------


@dataclass(frozen=True)
class RayHit:
    source_s: float
    cell: int
    edge: int
    s: float
    element: int  # cell-local element index, -1 without a grid
    theta_arr: float  # arrival angle against the outward normal, neighbour's sign convention
    psi: float  # propagation angle in the cell frame
    distance: float
    vertex: bool = False


def trace_ray(cell: SubDomain, s: float, theta: float, grid: ElementGrid | None = None) -> RayHit:
    """Follow the ray leaving boundary point s at local angle theta to the next edge."""
    if not abs(theta) < HALF_PI - EPS_GRAZE:
        raise Grazing(f"theta={theta} is grazing")
    starts = np.array([e.s_start for e in cell.edges])
    k0 = int(np.searchsorted(starts, s, side="right") - 1)
    e0 = cell.edges[k0]
    p = e0.start + (s - e0.s_start) * e0.tangent
    psi = e0.gamma - theta
    d = np.array([math.cos(psi), math.sin(psi)])
    tol = 1e-12 * cell.diameter
    best = None
    for e in cell.edges:
        if e.index == k0:
            continue
        ab = e.end - e.start
        den = d[0] * (-ab[1]) - d[1] * (-ab[0])
        if abs(den) < 1e-300:
            continue
        rhs = e.start - p
        t = (rhs[0] * (-ab[1]) - rhs[1] * (-ab[0])) / den
        lam = (d[0] * rhs[1] - d[1] * rhs[0]) / den
        if t <= tol or lam < -1e-12 or lam > 1 + 1e-12:
            continue
        if best is None or t < best[0] - tol:
            best = (t, e, lam)
    if best is None:
        raise NoHit(f"no boundary intersection from s={s}, theta={theta}")
    t, e, lam = best
    vertex = False
    s_hit = e.s_start + min(max(lam, 0.0), 1.0) * e.length
    if s_hit >= e.s_end - tol:
        # half-open rule: the vertex belongs to the edge that starts there
        e = cell.edges[(e.index + 1) % len(cell.edges)]
        s_hit = e.s_start
        vertex = True
    elif s_hit <= e.s_start + tol:
        vertex = True
    element = -1
    if grid is not None:
        first, count = grid.edge_elements[(cell.id, e.index)]
        els = grid.elements[cell.id][first : first + count]
        bounds = np.array([el.s_lo for el in els])
        element = first + int(np.searchsorted(bounds, s_hit, side="right") - 1)
    theta_arr = float(wrap(e.gamma + math.pi - psi))
    return RayHit(s, cell.id, e.index, float(s_hit), element, theta_arr, float(psi), float(t), vertex)


def outgoing_dof(hit: RayHit, rule: InterfaceRule, disc: Discretization) -> list[tuple[DofIndex, float]]:
    """Reflected and transmitted target DOFs with their weights (zero weights omitted)."""
    md = disc.md
    j, e = hit.cell, hit.edge
    b = disc.block(j, e)
    local = hit.element - b.first
    out = []
    edge = md.cells[j].edges[e]
    if edge.is_free:
        r, t = rule.free_weight(j, e, hit.psi), 0.0
    else:
        r, t = rule.weights(j, e, hit.psi)
    if r > 0:
        n = interval_or_raise(b.lmap, -hit.theta_arr)
        idx = disc.dof(j, e, local, n)
        out.append((DofIndex(j, hit.element, n, idx), r))
    if t > 0 and not edge.is_free:
        nb = md.adjacency[(j, e)]
        psi_i = float(wrap(hit.psi + transmit_offset(md, j, e)))
        bi = disc.block(nb.cell, nb.edge)
        theta_i = float(wrap(md.cells[nb.cell].edges[nb.edge].gamma - psi_i))
        n = interval_or_raise(bi.lmap, theta_i)
        li = bi.count - 1 - local
        idx = disc.dof(nb.cell, nb.edge, li, n)
        out.append((DofIndex(nb.cell, bi.first + li, n, idx), t))
    return out


def interval_or_raise(lmap: LocalDirectionMap, theta: float) -> int:
    n = int(lmap.bin(theta))
    if n < 0:
        raise Grazing(f"outgoing angle {theta} is grazing")
    return n


# -- integrals ------------------------------------------------------------------


def segment_integral(D0: float, beta: float, s_lo: float, s_hi: float, mu: float) -> float:
    """Integral of exp(-mu*(D0 + beta*(s - s_lo))) over [s_lo, s_hi]."""
    ds = s_hi - s_lo
    if ds < 0:
        raise NegativeLength(f"s_hi < s_lo ({s_hi} < {s_lo})")
    if mu == 0:
        return ds
    x = mu * beta * ds
    if abs(x) < SERIES_CUTOFF:
        return ds * math.exp(-mu * D0) * (1 - 0.5 * x)
    return -math.exp(-mu * D0) / (mu * beta) * math.expm1(-x)


def _segment_integrals(D0: np.ndarray, D1: np.ndarray, ds: np.ndarray, mu: float) -> np.ndarray:
    if mu == 0:
        return ds.copy()
    x = mu * (D1 - D0)
    small = np.abs(x) < SERIES_CUTOFF
    xs = np.where(small, 1.0, x)
    closed = -np.expm1(-xs) / xs
    factor = np.where(small, 1 - 0.5 * x, closed)
    return ds * np.exp(-mu * D0) * factor


# -- assembly --------------------------------------------------------------------


@dataclass
class AssemblyStats:
    grazing_drops: int = 0
    gap_pieces: int = 0

    def merge(self, other: "AssemblyStats") -> None:
        self.grazing_drops += other.grazing_drops
        self.gap_pieces += other.gap_pieces


@dataclass(eq=False)
class TransferMatrix:
    matrix: sp.csr_matrix
    stats: AssemblyStats

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def dump(self, path: str | Path) -> None:
        write_matrix(path, self.matrix)


class _CellGeometry:
    """Per-cell arrays reused for every direction."""

    def __init__(self, disc: Discretization, j: int):
        cell = disc.md.cells[j]
        self.cell = cell
        self.n_edges = len(cell.edges)
        self.gamma = np.array([e.gamma for e in cell.edges])
        self.blocks = [disc.block(j, e.index) for e in cell.edges]
        self.pts = []  # element end points per edge
        self.lens = []
        for e, b in zip(cell.edges, self.blocks):
            lam = (b.bounds - e.s_start)[:, None]
            self.pts.append(e.start[None, :] + lam * e.tangent[None, :])
            self.lens.append(np.diff(b.bounds))
        self.tangents = np.array([e.tangent for e in cell.edges])
        self.tol = 1e-13 * cell.diameter
        self.neighbors = [e.neighbor for e in cell.edges]
        self.offsets = [transmit_offset(disc.md, j, e.index) if e.neighbor else 0.0 for e in cell.edges]


def _edge_arrays(geo: _CellGeometry, edges: np.ndarray, d: np.ndarray, dperp: np.ndarray):
    q_a, q_b, u_a, u_b, lens, edge_id, local = [], [], [], [], [], [], []
    for e in edges:
        p = geo.pts[e]
        q = p @ dperp
        u = p @ d
        q_a.append(q[:-1])
        q_b.append(q[1:])
        u_a.append(u[:-1])
        u_b.append(u[1:])
        lens.append(geo.lens[e])
        edge_id.append(np.full(len(q) - 1, e))
        local.append(np.arange(len(q) - 1))
    cat = np.concatenate
    return cat(q_a), cat(q_b), cat(u_a), cat(u_b), cat(lens), cat(edge_id), cat(local)


def _locate(q_a: np.ndarray, q_b: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.minimum(q_a, q_b)
    hi = np.maximum(q_a, q_b)
    order = np.argsort(lo, kind="stable")
    k = np.searchsorted(lo[order], q, side="right") - 1
    k = np.clip(k, 0, len(order) - 1)
    idx = order[k]
    ok = (q >= lo[idx]) & (q <= hi[idx])
    return idx, ok


def assemble_column_block(disc: Discretization, j: int, rule: InterfaceRule = TRANSPARENT):
    """Sparse triplets (rows, cols, vals) for every source DOF of cell j."""
    geo = _CellGeometry(disc, j)
    md = disc.md
    mu = geo.cell.mu
    stats = AssemblyStats()
    rows_out, cols_out, vals_out = [], [], []
    angles = disc.dirs.angles
    edge_ids = np.arange(geo.n_edges)
    for l, psi in enumerate(angles):
        theta_in = wrap(geo.gamma - psi)
        theta_arr = wrap(geo.gamma + math.pi - psi)
        entry = edge_ids[np.abs(theta_in) < HALF_PI - EPS_GRAZE]
        exit_ = edge_ids[np.abs(theta_arr) < HALF_PI - EPS_GRAZE]
        if len(entry) == 0 or len(exit_) == 0:
            continue
        c, s = math.cos(psi), math.sin(psi)
        d = np.array([c, s])
        dperp = np.array([-s, c])
        sq_a, sq_b, su_a, su_b, slen, sedge, slocal = _edge_arrays(geo, entry, d, dperp)
        tq_a, tq_b, tu_a, tu_b, tlen, tedge, tlocal = _edge_arrays(geo, exit_, d, dperp)

        # target DOF rows and weights for each receiving element, per branch
        n_t = len(tq_a)
        row_r = np.full(n_t, -1)
        w_r = np.zeros(n_t)
        row_t = np.full(n_t, -1)
        w_t = np.zeros(n_t)
        for e in exit_:
            sel = tedge == e
            b = geo.blocks[e]
            nb = geo.neighbors[e]
            if nb is None:
                r, t = rule.free_weight(j, e, psi), 0.0
            else:
                r, t = rule.weights(j, e, psi)
            if r > 0:
                n = int(b.lmap.bin(-theta_arr[e]))
                if n < 0:
                    stats.grazing_drops += 1
                else:
                    row_r[sel] = b.offset + tlocal[sel] * b.n_dirs + n
                    w_r[sel] = r
            if t > 0:
                bi = disc.block(nb.cell, nb.edge)
                psi_i = psi + geo.offsets[e]
                theta_i = wrap(md.cells[nb.cell].edges[nb.edge].gamma - psi_i)
                n = int(bi.lmap.bin(theta_i))
                if n < 0:
                    stats.grazing_drops += 1
                else:
                    row_t[sel] = bi.offset + (bi.count - 1 - tlocal[sel]) * bi.n_dirs + n
                    w_t[sel] = t
        if not (w_r.any() or w_t.any()):
            continue

        brk = np.unique(np.concatenate([sq_a, sq_b, tq_a, tq_b]))
        keep = np.concatenate([[True], np.diff(brk) > geo.tol])
        brk = brk[keep]
        qa, qb = brk[:-1], brk[1:]
        mid = 0.5 * (qa + qb)
        si, sok = _locate(sq_a, sq_b, mid)
        ti, tok = _locate(tq_a, tq_b, mid)
        ok = sok & tok
        stats.gap_pieces += int((~ok).sum())
        si, ti, qa, qb = si[ok], ti[ok], qa[ok], qb[ok]

        # u linear in q along each element
        s_slope = (su_b[si] - su_a[si]) / (sq_b[si] - sq_a[si])
        t_slope = (tu_b[ti] - tu_a[ti]) / (tq_b[ti] - tq_a[ti])
        D0 = (tu_a[ti] + (qa - tq_a[ti]) * t_slope) - (su_a[si] + (qa - sq_a[si]) * s_slope)
        D1 = (tu_a[ti] + (qb - tq_a[ti]) * t_slope) - (su_a[si] + (qb - sq_a[si]) * s_slope)
        cos_src = np.cos(theta_in[sedge[si]])
        ds = (qb - qa) / cos_src
        vals = _segment_integrals(D0, D1, ds, mu) / np.sqrt(slen[si] * tlen[ti])

        # source DOF columns
        sb_off = np.array([geo.blocks[e].offset for e in range(geo.n_edges)])
        sb_nd = np.array([geo.blocks[e].n_dirs for e in range(geo.n_edges)])
        n_src = np.array([geo.blocks[e].lmap.local_of_global[l] for e in range(geo.n_edges)])
        se = sedge[si]
        cols = sb_off[se] + slocal[si] * sb_nd[se] + n_src[se]

        for rows, w in ((row_r, w_r), (row_t, w_t)):
            wt = w[ti]
            m = wt > 0
            if m.any():
                rows_out.append(rows[ti][m])
                cols_out.append(cols[m])
                vals_out.append(vals[m] * wt[m])
    if rows_out:
        rows = np.concatenate(rows_out)
        cols = np.concatenate(cols_out)
        vals = np.concatenate(vals_out)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    big = np.abs(vals) >= DROP_BELOW
    return rows[big], cols[big], vals[big], stats


def assemble(disc: Discretization, rule: InterfaceRule = TRANSPARENT, workers: int = 1) -> TransferMatrix:
    """Global transfer matrix; column blocks are independent per source cell."""
    cells = range(len(disc.md.cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: assemble_column_block(disc, j, rule), cells))
    else:
        parts = [assemble_column_block(disc, j, rule) for j in cells]
    stats = AssemblyStats()
    for p in parts:
        stats.merge(p[3])
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    n = disc.n_dofs
    B = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    B.sum_duplicates()
    B.sort_indices()
    return TransferMatrix(matrix=B, stats=stats)


# -- binary dump -------------------------------------------------------------------

_TRIPLET = np.dtype([("row", "<u8"), ("col", "<u8"), ("val", "<f8")])


def write_matrix(path: str | Path, B: sp.spmatrix) -> None:
    coo = sp.coo_matrix(B)
    order = np.lexsort((coo.col, coo.row))
    rec = np.empty(coo.nnz, dtype=_TRIPLET)
    rec["row"] = coo.row[order]
    rec["col"] = coo.col[order]
    rec["val"] = coo.data[order]
    with open(path, "wb") as fh:
        fh.write(np.array([B.shape[0], coo.nnz], dtype="<u8").tobytes())
        fh.write(rec.tobytes())


def read_matrix(path: str | Path) -> sp.csr_matrix:
    raw = Path(path).read_bytes()
    n, nnz = np.frombuffer(raw[:16], dtype="<u8")
    rec = np.frombuffer(raw[16:], dtype=_TRIPLET, count=int(nnz))
    return sp.csr_matrix((rec["val"], (rec["row"].astype(np.int64), rec["col"].astype(np.int64))), shape=(int(n), int(n)))
