"""Interior energy density from the stationary boundary density.

Each global direction is traced backwards from the sample point to the cell
boundary; the density carried by that basis node is damped along the path
and converted from boundary flux to volume density by 1/cos(theta).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .directions import EPS_GRAZE, HALF_PI, wrap
from .errors import AtSource, NotInCell
from .sources import AcousticPointSource, LineSource, ShellPointSource, source_vertex, star_cells
from .transfer import Discretization


@dataclass(frozen=True)
class BackTrace:
    point: tuple[float, float]
    direction: int  # global index l
    cell: int
    edge: int
    element: int  # cell-local element index
    local: int  # local direction index n, -1 if l is not inward on this edge
    s: float
    theta: float
    distance: float
    vertex: bool = False


@dataclass
class Diagnostics:
    grazing_skips: int = 0
    vertex_hits: int = 0
    terms: int = 0

    def as_dict(self) -> dict:
        return {"grazing_skips": self.grazing_skips, "vertex_hits": self.vertex_hits, "terms": self.terms}


@dataclass(eq=False)
class InteriorField:
    cells: np.ndarray
    points: np.ndarray  # in-cell 2D coordinates
    xyz: np.ndarray
    values: np.ndarray
    alpha: int = 1
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __len__(self) -> int:
        return len(self.values)

    def write_csv(self, path: str | Path, log10: bool = False) -> None:
        write_field_csv(path, self.cells, self.xyz, self.values, log10)


def write_field_csv(path, cells, xyz, values, log10: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "x", "y", "z", "value"] + (["log10"] if log10 else []))
        for c, p, v in zip(cells, xyz, values):
            row = [int(c), *(repr(float(x)) for x in p), repr(float(v))]
            if log10:
                row.append(repr(math.log10(v)) if v > 0 else "-inf")
            w.writerow(row)


def back_trace(disc: Discretization, point: Sequence[float], l: int, cell: int | None = None) -> BackTrace:
    """Trace direction l backwards from ``point`` to the boundary of its cell."""
    md = disc.md
    p = np.asarray(point, dtype=float)
    if cell is None:
        cell = int(md.locate(p[None])[0])
    if cell < 0 or md.cells[cell].signed_distances(p[None]).min() <= 0:
        raise NotInCell(f"point {tuple(p)} is not strictly inside cell {cell}")
    res = _trace_block(disc, cell, p[None], l)
    e, el, n, s, th, D, vx = (x[0] for x in res)
    return BackTrace(tuple(p), l, cell, int(e), int(el), int(n), float(s), float(th), float(D), bool(vx))


def _trace_block(disc: Discretization, j: int, pts: np.ndarray, l):
    """Back-trace pairs (pts[i], direction l[i]) to the boundary of cell j; l may be a scalar."""
    cell = disc.md.cells[j]
    l = np.broadcast_to(np.asarray(l, dtype=np.int64), (len(pts),))
    psi = disc.dirs.angles[l]
    d = np.column_stack([np.cos(psi), np.sin(psi)])
    normals = np.array([ed.normal for ed in cell.edges])
    dist = cell.signed_distances(pts)  # (m, k)
    nd = d @ normals.T  # (m, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(nd > 1e-300, dist / np.where(nd > 1e-300, nd, 1.0), np.inf)
    e = np.argmin(t, axis=1)
    D = t[np.arange(len(pts)), e]
    hit = pts - D[:, None] * d
    starts = np.array([ed.start for ed in cell.edges])
    tang = np.array([ed.tangent for ed in cell.edges])
    lens = np.array([ed.length for ed in cell.edges])
    s0 = np.array([ed.s_start for ed in cell.edges])
    lam = np.einsum("ij,ij->i", hit - starts[e], tang[e])
    tol = 1e-12 * cell.diameter
    k = len(cell.edges)
    at_end = lam >= lens[e] - tol
    vertex = at_end | (lam <= tol)
    # half-open rule: the vertex belongs to the edge that starts there
    e_alt = np.where(at_end, (e + 1) % k, e)
    lam = np.where(at_end, 0.0, np.clip(lam, 0.0, None))
    gam = np.array([ed.gamma for ed in cell.edges])
    theta = wrap(gam[e_alt] - psi)
    bad = np.abs(theta) >= HALF_PI - EPS_GRAZE
    # a vertex hit whose starting edge cannot emit this direction falls back to the other edge
    back = bad & at_end
    e_alt = np.where(back, e, e_alt)
    lam = np.where(back, lens[e], lam)
    theta = wrap(gam[e_alt] - psi)
    s = s0[e_alt] + lam
    n = np.empty(len(pts), dtype=np.int64)
    element = np.empty(len(pts), dtype=np.int64)
    for ei in np.unique(e_alt):
        sel = e_alt == ei
        b = disc.block(j, int(ei))
        n[sel] = b.lmap.local_of_global[l[sel]]
        loc = np.clip(np.searchsorted(b.bounds, s[sel], side="right") - 1, 0, b.count - 1)
        element[sel] = b.first + loc
    n = np.where(np.abs(theta) < HALF_PI - EPS_GRAZE, n, -1)
    return e_alt, element, n, s, theta, D, vertex


def _cell_values(disc: Discretization, rho: np.ndarray, j: int, pts: np.ndarray, diag: Diagnostics) -> np.ndarray:
    cell = disc.md.cells[j]
    L = disc.dirs.L
    # every (point, direction) pair at once, chunked to bound memory
    chunk = max(1, 200_000 // L)
    out = np.zeros(len(pts))
    for c0 in range(0, len(pts), chunk):
        p = pts[c0 : c0 + chunk]
        m = len(p)
        rows = np.repeat(np.arange(m), L)
        ls = np.tile(np.arange(L), m)
        e, element, n, s, theta, D, vertex = _trace_block(disc, j, p[rows], ls)
        ok = n >= 0
        diag.grazing_skips += int((~ok).sum())
        diag.vertex_hits += int((vertex & ok).sum())
        diag.terms += int(ok.sum())
        idx = np.zeros(len(rows), dtype=np.int64)
        elen = np.ones(len(rows))
        for ei in np.unique(e[ok]):
            sel = ok & (e == ei)
            b = disc.block(j, int(ei))
            loc = element[sel] - b.first
            idx[sel] = b.offset + loc * b.n_dirs + n[sel]
            elen[sel] = b.bounds[loc + 1] - b.bounds[loc]
        val = np.zeros(len(rows))
        val[ok] = np.exp(-cell.mu * D[ok]) * rho[idx[ok]] / (np.sqrt(elen[ok]) * np.cos(theta[ok]))
        # sum over directions in ascending l, as the per-direction loop would
        out[c0 : c0 + m] = val.reshape(m, L).sum(axis=1)
    return cell.eta * out


def sample_points(disc: Discretization, points=None, cells=None):
    """Resolve sample points to (cells, in-cell 2D coordinates, 3D coordinates).

    ``points=None`` gives the cell centroids. Planar points are located; 3D
    points on a shell need explicit ``cells``.
    """
    md = disc.md
    if points is None:
        cells = np.arange(len(md.cells))
        loc = md.centroids()
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if cells is None:
            if pts.shape[1] != 2:
                raise NotInCell("3D sample points need explicit cell ids")
            cells = md.locate(pts)
            if np.any(cells < 0):
                raise NotInCell(f"{int((cells < 0).sum())} sample points lie outside the domain")
            loc = pts
        else:
            cells = np.asarray(cells, dtype=int)
            loc = pts if pts.shape[1] == 2 else np.array([md.embedding[c].to_2d(p) for c, p in zip(cells, pts)])
    xyz = np.array([md.to_3d(int(c), p) for c, p in zip(cells, loc)]) if len(loc) else np.zeros((0, 3))
    return np.asarray(cells, dtype=int), np.asarray(loc, dtype=float), xyz


def evaluate_interior(
    disc: Discretization,
    rho: np.ndarray,
    points=None,
    cells=None,
    alpha: int = 1,
) -> InteriorField:
    """Reconstruct the interior density at sample points (default: centroids)."""
    cells, loc, xyz = sample_points(disc, points, cells)
    rho = np.asarray(rho, dtype=float)
    values = np.zeros(len(loc))
    diag = Diagnostics()
    for j in np.unique(cells):
        sel = cells == j
        cell = disc.md.cells[j]
        if np.any(cell.signed_distances(loc[sel]).min(axis=1) <= 0):
            raise NotInCell(f"a sample point is not strictly inside cell {j}")
        values[sel] = _cell_values(disc, rho, int(j), loc[sel], diag)
    return InteriorField(cells=cells, points=loc, xyz=xyz, values=values / alpha, alpha=alpha, diagnostics=diag)


def direct_field(spec, disc: Discretization, cells: np.ndarray, points: np.ndarray, alpha: int = 1) -> np.ndarray:
    """Unreflected source field eta/alpha * C exp(-mu d)/d, zero outside the source cells."""
    md = disc.md
    out = np.zeros(len(points))
    if isinstance(spec, LineSource):
        return out
    if isinstance(spec, AcousticPointSource):
        r0 = np.asarray(spec.location, dtype=float)
        src = {int(md.locate(r0[None])[0]): r0}
    elif isinstance(spec, ShellPointSource):
        v = source_vertex(md, spec)
        src = {j: md.cells[j].vertices[list(md.shell.tris[j]).index(v)] for j in star_cells(md, v)}
    else:
        raise TypeError(f"unknown source {spec!r}")
    for i, (c, p) in enumerate(zip(cells, points)):
        r0 = src.get(int(c))
        if r0 is None:
            continue
        cell = md.cells[int(c)]
        d = float(np.hypot(*(np.asarray(p) - r0)))
        if d < 1e-9:
            raise AtSource("sample point coincides with the source")
        out[i] = cell.eta / alpha * spec.constant * math.exp(-cell.mu * d) / d
    return out
