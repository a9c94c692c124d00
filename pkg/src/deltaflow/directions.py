"""Global direction set, per-edge local delta nodes with Petrov test intervals,
cell frames for shells and direction transfer across shared edges.

Sign convention: a local angle theta on an edge with inward-normal angle gamma
corresponds to the propagation angle ``gamma - theta`` in the cell frame, so
positive theta means a positive component along the arclength tangent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyLocalSet, Grazing, NormalFlip, NotShared, TooFew

EPS_GRAZE = 1e-9
HALF_PI = 0.5 * math.pi


def wrap(theta):
    """Wrap angles to [-pi, pi)."""
    return np.mod(np.asarray(theta) + math.pi, 2 * math.pi) - math.pi


@dataclass(frozen=True, eq=False)
class GlobalDirectionSet:
    angles: np.ndarray
    offset: bool = False

    @property
    def L(self) -> int:
        return len(self.angles)

    def __len__(self) -> int:
        return len(self.angles)

    def vectors(self) -> np.ndarray:
        return np.column_stack([np.cos(self.angles), np.sin(self.angles)])


def make_global_directions(L: int, offset: bool = False) -> GlobalDirectionSet:
    """Equally spaced set 2*pi*(l-1)/L, or the offset variant (2l-1)*pi/L."""
    if L < 3:
        raise TooFew(f"need at least 3 global directions, got {L}")
    l = np.arange(L, dtype=float)
    angles = (2 * l + 1) * math.pi / L if offset else 2 * math.pi * l / L
    return GlobalDirectionSet(angles=angles, offset=offset)


def custom_directions(angles: Sequence[float]) -> GlobalDirectionSet:
    a = np.asarray(angles, dtype=float)
    if len(a) < 3:
        raise TooFew(f"need at least 3 global directions, got {len(a)}")
    if np.any(np.diff(a) <= 0) or a[0] < 0 or a[-1] >= 2 * math.pi:
        raise ValueError("custom angles must be strictly increasing in [0, 2pi)")
    return GlobalDirectionSet(angles=a)


@dataclass(frozen=True, eq=False)
class LocalDirectionMap:
    gamma: float
    eta: float
    phi: np.ndarray  # ascending local angles
    global_index: np.ndarray  # phi[n] belongs to Phi[global_index[n]]
    bounds: np.ndarray  # right ends of I_1..I_{N-1}
    local_of_global: np.ndarray  # inverse of global_index, -1 where absent

    def __len__(self) -> int:
        return len(self.phi)

    @property
    def p_tilde(self) -> np.ndarray:
        return self.eta * np.sin(self.phi)

    def intervals(self) -> list[tuple[float, float]]:
        """(left, right) of each I_n; I_n is left-open, right-closed except the last."""
        edges = np.concatenate([[-HALF_PI], self.bounds, [HALF_PI]])
        return list(zip(edges[:-1], edges[1:]))

    def bin(self, theta) -> np.ndarray:
        """Vectorised interval index; -1 marks grazing angles."""
        th = np.asarray(theta, dtype=float)
        idx = np.searchsorted(self.bounds, th, side="left")
        return np.where(np.abs(th) < HALF_PI - EPS_GRAZE, idx, -1)


def local_map(gamma: float, angles: np.ndarray, eta: float = 1.0, eps: float = EPS_GRAZE) -> LocalDirectionMap:
    phi_all = wrap(gamma - np.asarray(angles))
    keep = np.flatnonzero(np.abs(phi_all) < HALF_PI - eps)
    if len(keep) == 0:
        raise EmptyLocalSet(f"no global direction enters through an edge with normal angle {gamma:.6g}")
    order = keep[np.argsort(phi_all[keep], kind="stable")]
    phi = phi_all[order]
    bounds = 0.5 * (phi[:-1] + phi[1:])
    inv = np.full(len(angles), -1, dtype=np.int64)
    inv[order] = np.arange(len(order))
    return LocalDirectionMap(gamma=float(gamma), eta=float(eta), phi=phi, global_index=order, bounds=bounds, local_of_global=inv)


def local_directions(edge, cell, dirs: GlobalDirectionSet) -> LocalDirectionMap:
    """Inward subset of ``dirs`` for ``edge`` of ``cell``, sorted by local angle."""
    return local_map(edge.gamma, dirs.angles, cell.eta)


def interval_index(lmap: LocalDirectionMap, theta: float) -> int:
    if not abs(theta) < HALF_PI - EPS_GRAZE:
        raise Grazing(f"local angle {theta} is grazing")
    return int(np.searchsorted(lmap.bounds, theta, side="left"))


# -- shell frames -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellFrame:
    rotation: np.ndarray  # rows: rotated x, y, z axes in global coordinates

    @property
    def ex(self) -> np.ndarray:
        return self.rotation[0]

    @property
    def ey(self) -> np.ndarray:
        return self.rotation[1]

    @property
    def normal(self) -> np.ndarray:
        return self.rotation[2]


def cell_frame(normal: Sequence[float]) -> CellFrame:
    """Rotate the global frame so z lands on ``normal``.

    The rotation axis is the line where the cell's tangent plane meets z=0,
    which makes the frame unique; cells with the same normal get the same frame.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    if np.linalg.norm(n - z) < 1e-12:
        return CellFrame(np.eye(3))
    if np.linalg.norm(n + z) < 1e-9:
        raise NormalFlip("normal is antiparallel to z; the frame rotation is undefined")
    axis = np.cross(z, n)
    s = np.linalg.norm(axis)
    axis /= s
    c = float(n[2])
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + s * K + (1 - c) * (K @ K)
    rot = R.T.copy()
    rot[2] = n
    return CellFrame(rot)


def transmit_offset(md, j: int, e: int) -> float:
    """Angle added to a cell-j propagation angle when the ray crosses edge e.

    Unfolds cell j's tangent plane onto the neighbour's about the shared edge,
    so the angle to the edge is preserved. Zero when both frames are equal.
    """
    nb = md.adjacency.get((j, e))
    if nb is None:
        raise NotShared(f"edge {e} of cell {j} is not shared")
    if md.embedding is None:
        return 0.0
    ej, ei = md.embedding[j], md.embedding[nb.cell]
    if np.array_equal(ej.rotation, ei.rotation):
        return 0.0
    edge_j = md.cells[j].edges[e]
    edge_i = md.cells[nb.cell].edges[nb.edge]
    t3 = edge_j.tangent[0] * ej.ex + edge_j.tangent[1] * ej.ey
    out_j = -(edge_j.normal[0] * ej.ex + edge_j.normal[1] * ej.ey)
    in_i = edge_i.normal[0] * ei.ex + edge_i.normal[1] * ei.ey
    # the tangent direction maps to itself, so the whole map is a rotation by a constant
    d_i = t3  # unfolded image of t3
    ang_j = math.atan2(edge_j.tangent[1], edge_j.tangent[0])
    ang_i = math.atan2(float(d_i @ ei.ey), float(d_i @ ei.ex))
    # sanity: the outward normal of j must unfold onto the inward normal of i
    mapped = math.atan2(float(in_i @ ei.ey), float(in_i @ ei.ex))
    expect = math.atan2(float(out_j @ ej.ey), float(out_j @ ej.ex)) + (ang_i - ang_j)
    if abs(float(wrap(mapped - expect))) > 1e-6:
        raise NotShared(f"edge {e} of cell {j}: frames are inconsistently oriented")
    return float(wrap(ang_i - ang_j))


def transmit_direction(psi, md, j: int, e: int):
    """Propagation angle(s) ``psi`` in cell j's frame, re-expressed in the neighbour's frame."""
    off = transmit_offset(md, j, e)
    if off == 0.0:
        return psi
    return wrap(np.asarray(psi) + off)
