"""Curvature-dependent reflection of bending waves on faceted shells.

Principal curvatures come from a least-squares quadric fitted in each cell's
frame to the nearby mesh vertices. A ray entering a curved cell is transmitted
while its angle to the maximum-curvature direction stays below a threshold
angle, beyond which the curved region no longer supports the wave and the
ray is reflected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .directions import transmit_offset
from .errors import InsufficientNeighbors, InvalidWavenumbers, MissingThreshold, RankDeficientFit
from .geometry import MultiDomain
from .transfer import InterfaceRule

FLAT_TOL_FACTOR = 1e-3
MIN_FIT_POINTS = 6


@dataclass(frozen=True, eq=False)
class CurvatureData:
    e1: np.ndarray  # (K, 2) max-curvature direction in each cell's frame
    e2: np.ndarray
    kappa1: np.ndarray  # largest |kappa|, signed
    kappa2: np.ndarray
    flat_tol: float

    @property
    def flat(self) -> np.ndarray:
        return np.abs(self.kappa1) < self.flat_tol

    @property
    def radius(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.flat, np.inf, 1.0 / np.abs(self.kappa1))


def vertex_rings(tris: np.ndarray, n_nodes: int) -> list[set[int]]:
    nbrs: list[set[int]] = [set() for _ in range(n_nodes)]
    for t in tris:
        for a in t:
            nbrs[a].update(int(b) for b in t if b != a)
    return nbrs


def _neighborhood(t, nbrs, rings: int) -> list[int]:
    seen = set(int(v) for v in t)
    front = set(seen)
    for _ in range(rings):
        front = {w for v in front for w in nbrs[v]} - seen
        seen |= front
    return sorted(seen)


def fit_quadric(local: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Principal directions/curvatures at the origin of points (x, y, z) ~ quadric z(x, y).

    Uses the full quadric with linear terms and the Weingarten map, so a cell
    plane that is only approximately tangent does not bias the curvature.
    """
    x, y, z = local.T
    scale = max(np.abs(local[:, :2]).max(), 1e-300)
    xs, ys = x / scale, y / scale
    A = np.column_stack([xs * xs, xs * ys, ys * ys, xs, ys, np.ones_like(xs)])
    coef, _, rank, sv = np.linalg.lstsq(A, z, rcond=None)
    if rank < 6 or sv[-1] < 1e-10 * sv[0]:
        raise RankDeficientFit(f"quadric fit is rank deficient (rank {rank})")
    a, b, c, d, e, _ = coef
    fxx, fxy, fyy = 2 * a / scale**2, b / scale**2, 2 * c / scale**2
    fx, fy = d / scale, e / scale
    w = math.sqrt(1 + fx * fx + fy * fy)
    I = np.array([[1 + fx * fx, fx * fy], [fx * fy, 1 + fy * fy]])
    II = np.array([[fxx, fxy], [fxy, fyy]]) / w
    S = np.linalg.solve(I, II)
    vals, vecs = np.linalg.eig(S)
    vals, vecs = vals.real, vecs.real
    order = np.argsort(-np.abs(vals), kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    dirs = []
    for k in range(2):
        u, v = vecs[:, k]
        t3 = np.array([u, v, u * fx + v * fy])
        t2 = t3[:2] / np.linalg.norm(t3[:2])
        dirs.append(t2)
    e1 = dirs[0]
    e2 = np.array([-e1[1], e1[0]])
    return e1, e2, float(vals[0]), float(vals[1])


def estimate_curvature(md: MultiDomain, neighborhood_rings: int = 1, flat_tol: float | None = None) -> CurvatureData:
    """Per-cell principal curvatures from a quadric fit around the cell centroid."""
    if md.shell is None or md.embedding is None:
        raise InsufficientNeighbors("curvature estimation needs a shell mesh")
    nodes, tris = md.shell.nodes, md.shell.tris
    nbrs = vertex_rings(tris, len(nodes))
    K = len(tris)
    e1 = np.zeros((K, 2))
    e2 = np.zeros((K, 2))
    k1 = np.zeros(K)
    k2 = np.zeros(K)
    for j, t in enumerate(tris):
        ids = _neighborhood(t, nbrs, neighborhood_rings)
        if len(ids) < MIN_FIT_POINTS:
            raise InsufficientNeighbors(f"cell {j}: only {len(ids)} vertices within {neighborhood_rings} rings")
        emb = md.embedding[j]
        c3 = nodes[t].mean(axis=0)
        local = (nodes[ids] - c3) @ emb.rotation.T
        e1[j], e2[j], k1[j], k2[j] = fit_quadric(local)
    tol = FLAT_TOL_FACTOR / md.diameter if flat_tol is None else flat_tol
    return CurvatureData(e1=e1, e2=e2, kappa1=k1, kappa2=k2, flat_tol=tol)


def threshold_angle(k: float, ky_max: float) -> float:
    """theta* = atan(ky / sqrt(k^2 - ky^2)); ky = k means always transmit."""
    if not (k > 0 and 0 < ky_max <= k):
        raise InvalidWavenumbers(f"need 0 < ky_max <= k, got k={k}, ky_max={ky_max}")
    if ky_max == k:
        return math.pi / 2
    return math.atan2(ky_max, math.sqrt(k * k - ky_max * ky_max))


@dataclass(frozen=True)
class ThresholdRule:
    """theta* per shared edge, with a fallback for edges not listed."""

    default: float | None = None
    per_edge: Mapping[tuple[int, int], float] = field(default_factory=dict)
    provenance: str = "user-supplied"

    def __post_init__(self):
        for v in [self.default, *self.per_edge.values()]:
            if v is not None and not 0 < v <= math.pi / 2:
                raise ValueError(f"threshold angle {v} outside (0, pi/2]")

    @classmethod
    def from_wavenumbers(cls, k: float, ky_max: float) -> "ThresholdRule":
        return cls(default=threshold_angle(k, ky_max), provenance="computed")

    def angle(self, j: int, e: int) -> float:
        v = self.per_edge.get((j, e), self.default)
        if v is None:
            raise MissingThreshold(f"no threshold angle for edge {e} of cell {j}")
        return v


@dataclass(frozen=True)
class _EdgeInfo:
    offset: float
    e1: tuple[float, float] | None  # receiving cell's max-curvature direction, None if flat
    n_j: tuple[float, float]  # inward normal of the edge in the sending cell
    n_i: tuple[float, float]  # inward normal of the edge in the receiving cell
    theta_star: float


class ShellRule(InterfaceRule):
    """Binary reflection/transmission from curvature and threshold angle.

    ``secondary`` chooses how rays steeper than theta* are classified:
    "angle" reflects the ray about the mesh edge and transmits when that
    direction lies within theta* of the principal direction; "side" reflects
    the ray about the principal direction and transmits when the result still
    enters the receiving cell.
    """

    def __init__(
        self,
        md: MultiDomain,
        curvature: CurvatureData,
        threshold: ThresholdRule | float | None,
        enabled: bool = True,
        secondary: str = "angle",
    ):
        if secondary not in ("angle", "side"):
            raise ValueError(f"secondary rule must be 'angle' or 'side', not {secondary!r}")
        if not isinstance(threshold, ThresholdRule):
            threshold = ThresholdRule(default=threshold)
        self.enabled = enabled
        self.secondary = secondary
        self.threshold = threshold
        self.info: dict[tuple[int, int], _EdgeInfo] = {}
        flat = curvature.flat
        for (j, e), nb in md.adjacency.items():
            i = nb.cell
            curved = enabled and not flat[i]
            self.info[(j, e)] = _EdgeInfo(
                offset=transmit_offset(md, j, e),
                e1=tuple(curvature.e1[i]) if curved else None,
                n_j=tuple(md.cells[j].edges[e].normal),
                n_i=tuple(md.cells[i].edges[nb.edge].normal),
                theta_star=threshold.angle(j, e) if curved else math.pi / 2,
            )

    def weights(self, j: int, e: int, psi: float) -> tuple[float, float]:
        inf = self.info[(j, e)]
        if inf.e1 is None:
            return 0.0, 1.0
        a = psi + inf.offset
        dx, dy = math.cos(a), math.sin(a)
        ex, ey = inf.e1
        cos_psi = abs(dx * ex + dy * ey)
        if math.acos(min(cos_psi, 1.0)) < inf.theta_star:
            return 0.0, 1.0
        if self.secondary == "side":
            p = dx * ex + dy * ey
            rx, ry = dx - 2 * p * ex, dy - 2 * p * ey
            return (0.0, 1.0) if rx * inf.n_i[0] + ry * inf.n_i[1] > 0 else (1.0, 0.0)
        # reflect about the mesh edge in the sending cell, then view it in the receiving frame
        cx, cy = math.cos(psi), math.sin(psi)
        nx, ny = inf.n_j
        p = cx * nx + cy * ny
        b = math.atan2(cy - 2 * p * ny, cx - 2 * p * nx) + inf.offset
        cos_r = abs(math.cos(b) * ex + math.sin(b) * ey)
        return (0.0, 1.0) if math.acos(min(cos_r, 1.0)) < inf.theta_star else (1.0, 0.0)


def geodesic_rule() -> InterfaceRule:
    """Pure geodesic transport: every shared edge transmits, free edges reflect."""
    return InterfaceRule()
