"""Reference solutions and error statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateDenominator, LengthMismatch, NonConvexDomain, NonPositiveError, ZeroDamping


def analytic_parallel_wall(x, mu: float):
    """Interior density between reflecting walls y=0, y=1 with a unit line source on x=0.

    Sum over reflection orders of exp(-mu * path) in closed form.
    """
    if not mu > 0:
        raise ZeroDamping("the geometric series needs mu > 0")
    x = np.asarray(x, dtype=float)
    return (np.exp(-mu * x) + np.exp(-mu * (2 - x))) / (-np.expm1(-2 * mu))


def point_source_amplitude(omega: float, rho_fluid: float, eta: float) -> float:
    return rho_fluid * omega * eta / (8 * math.pi)


# -- image sources --------------------------------------------------------------------


@dataclass
class ImageNode:
    position: np.ndarray
    mirrors: tuple[int, ...]
    window: tuple[np.ndarray, np.ndarray] | None  # lit part of the last mirror edge

    @property
    def order(self) -> int:
        return len(self.mirrors)


@dataclass
class ImageTree:
    source: np.ndarray
    max_order: int
    levels: list[list[ImageNode]] = field(default_factory=list)

    def images(self) -> list[ImageNode]:
        return [n for lvl in self.levels for n in lvl]

    def __len__(self) -> int:
        return sum(len(lvl) for lvl in self.levels)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _check_convex(poly: np.ndarray) -> None:
    e = np.roll(poly, -1, axis=0) - poly
    c = _cross(e, np.roll(e, -1, axis=0))
    scale = np.linalg.norm(e, axis=1).max() ** 2
    if np.any(c <= 1e-12 * scale):
        raise NonConvexDomain("image-source oracle needs a strictly convex CCW polygon")


def _reflect(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    t = (b - a) / np.linalg.norm(b - a)
    v = p - a
    return a + 2 * (v @ t) * t - v


def _lit_part(apex, w1, w2, a, b, tol):
    """Part of segment [a, b] inside the cone from ``apex`` through window [w1, w2]."""
    u1, u2 = w1 - apex, w2 - apex
    if _cross(u1, u2) < 0:
        u1, u2 = u2, u1
    lo, hi = 0.0, 1.0
    ab = b - a
    for c0, c1 in ((_cross(u1, a - apex), _cross(u1, ab)), (-_cross(u2, a - apex), -_cross(u2, ab))):
        # c0 + t c1 >= 0
        if abs(c1) < 1e-300:
            if c0 < 0:
                return None
            continue
        t = -c0 / c1
        if c1 > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    if hi - lo <= tol:
        return None
    return a + lo * ab, a + hi * ab


def build_image_tree(polygon: Sequence[Sequence[float]], r0: Sequence[float], max_order: int) -> ImageTree:
    """Beam tree of valid image sources up to ``max_order`` reflections.

    Every image keeps the window through which its rays enter the room;
    children are spawned only on edges that this beam actually lights.
    """
    poly = np.asarray(polygon, dtype=float)
    _check_convex(poly)
    src = np.asarray(r0, dtype=float)
    k = len(poly)
    edges = [(poly[i], poly[(i + 1) % k]) for i in range(k)]
    tol = 1e-13
    tree = ImageTree(source=src, max_order=max_order, levels=[[ImageNode(src, (), None)]])
    for order in range(1, max_order + 1):
        nxt = []
        for node in tree.levels[-1]:
            for f, (a, b) in enumerate(edges):
                if node.mirrors and node.mirrors[-1] == f:
                    continue
                if node.window is None:
                    lit = (a, b)
                else:
                    lit = _lit_part(node.position, *node.window, a, b, tol)
                    if lit is None:
                        continue
                nxt.append(ImageNode(_reflect(node.position, a, b), node.mirrors + (f,), lit))
        if not nxt:
            break
        tree.levels.append(nxt)
    return tree


def _segments_cross(p, q, a, b) -> np.ndarray:
    """Segments p->q[i] and a->b intersect (closed, vectorised over q)."""
    d = q - p
    ab = b - a
    den = _cross(d, ab)
    ap = a - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(ap, ab) / den
        s = _cross(ap, d) / den
    eps = 1e-12
    return (np.abs(den) > 1e-300) & (t >= -eps) & (t <= 1 + eps) & (s >= -eps) & (s <= 1 + eps)


def image_source_field(
    polygon: Sequence[Sequence[float]],
    r0: Sequence[float],
    points,
    max_order: int,
    omega: float,
    rho_fluid: float = 1.0,
    eta: float = 1.0,
    mu: float = 0.0,
    tree: ImageTree | None = None,
) -> np.ndarray:
    """Sum of rho omega eta exp(-mu d)/(8 pi d) over the images visible from each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if tree is None:
        tree = build_image_tree(polygon, r0, max_order)
    amp = point_source_amplitude(omega, rho_fluid, eta)
    out = np.zeros(len(pts))
    for node in tree.images():
        if node.order > max_order:
            continue
        d = np.hypot(*(pts - node.position).T)
        if node.window is None:
            vis = np.ones(len(pts), dtype=bool)
        else:
            vis = _segments_cross(node.position, pts, *node.window)
        out[vis] += amp * np.exp(-mu * d[vis]) / d[vis]
    if np.any(np.hypot(*(pts - np.asarray(r0, dtype=float)).T) == 0):
        raise ValueError("field point coincides with the source")
    return out


def rectangle_image_field(
    size: tuple[float, float],
    r0: Sequence[float],
    points,
    max_order: int,
    omega: float,
    rho_fluid: float = 1.0,
    eta: float = 1.0,
    mu: float = 0.0,
    chunk: int = 200_000,
) -> np.ndarray:
    """Image sum for the rectangle [0, a] x [0, b]; every lattice image is visible.

    Along each axis image m sits at m*a + x0 (m even) or (m+1)*a - x0 (m odd)
    after |m| reflections; the total order is |m| + |n|.
    """
    a, b = size
    x0, y0 = r0
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    amp = point_source_amplitude(omega, rho_fluid, eta)
    N = max_order
    m = np.arange(-N, N + 1)
    X = np.where(m % 2 == 0, m * a + x0, (m + 1) * a - x0)
    Y = np.where(m % 2 == 0, m * b + y0, (m + 1) * b - y0)
    M, Nn = np.meshgrid(np.arange(2 * N + 1), np.arange(2 * N + 1), indexing="ij")
    keep = np.abs(m[M]) + np.abs(m[Nn]) <= N
    ix, iy = X[M[keep]], Y[Nn[keep]]
    out = np.zeros(len(pts))
    step = max(1, chunk // max(len(ix), 1))
    for s in range(0, len(pts), step):
        p = pts[s : s + step]
        d = np.hypot(p[:, :1] - ix[None, :], p[:, 1:] - iy[None, :])
        out[s : s + step] = (np.exp(-mu * d) / d).sum(axis=1)
    return amp * out


def image_tail_bound(mu: float, max_order: int, size: tuple[float, float], amplitude: float = 1.0) -> float:
    """Upper bound on what orders beyond ``max_order`` add anywhere in the rectangle ``size``.

    Images of order k lie at least (k - 2) w / sqrt(2) away, w the shorter
    side, and each sits in its own copy of the room. Comparing the sum with the
    integral of exp(-mu r)/r over the plane outside that radius, with the room
    diagonal as slack, gives the bound. Infinite while the radius is too small.
    """
    if not mu > 0:
        return math.inf
    a, b = size
    area, diag = a * b, math.hypot(a, b)
    r = (max_order - 1) * min(a, b) / math.sqrt(2) - 2 * diag
    if r <= 0:
        return math.inf
    return amplitude * 2 * math.pi / (mu * area) * (1 + diag / r) * math.exp(-mu * r)


# -- error statistics -------------------------------------------------------------------


def _pair(approx, exact):
    a = np.asarray(approx, dtype=float)
    e = np.asarray(exact, dtype=float)
    if a.shape != e.shape:
        raise LengthMismatch(f"{a.shape} vs {e.shape}")
    den = e.sum()
    if not den > 0:
        raise DegenerateDenominator("exact values must have a positive sum")
    return a, e, den


def mre(approx, exact) -> float:
    """Relative mean error sum|a - e| / sum e."""
    a, e, den = _pair(approx, exact)
    return float(np.abs(a - e).sum() / den)


def mean_error(approx, exact) -> float:
    """Relative error of the mean |sum a - sum e| / sum e."""
    a, e, den = _pair(approx, exact)
    return float(abs(a.sum() - den) / den)


def eoc(errors: Sequence[float]) -> list[float]:
    """Estimated orders of convergence log2(e_{k-1}/e_k)."""
    e = np.asarray(errors, dtype=float)
    if len(e) < 2:
        raise NonPositiveError("need at least two refinement levels")
    if np.any(e <= 0):
        raise NonPositiveError("errors must be positive")
    return list(np.log2(e[:-1] / e[1:]))
