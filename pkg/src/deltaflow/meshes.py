"""Benchmark geometries: square meshes, unstructured triangulations and shells."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import Delaunay
from scipy.stats import qmc

from .geometry import MultiDomain, build_multidomain, build_polygon_domain, multidomain_from_mesh

UNIT_SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def unit_square(eta: float = 1.0, mu: float = 0.0) -> MultiDomain:
    return build_multidomain([build_polygon_domain(UNIT_SQUARE, eta=eta, mu=mu)])


def rectangle(x0, y0, x1, y1, eta=1.0, mu=0.0, id=0):
    return build_polygon_domain([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], eta=eta, mu=mu, id=id)


def quad_grid(n: int, eta: float = 1.0, mu: float = 0.0) -> MultiDomain:
    """Unit square cut into n x n equal squares."""
    h = 1.0 / n
    cells = []
    for a in range(n):
        for b in range(n):
            cells.append(rectangle(b * h, a * h, (b + 1) * h, (a + 1) * h, eta, mu, id=len(cells)))
    return build_multidomain(cells)


def split_square(eta: float = 1.0, mu: float = 0.0, x_split: float = 0.5) -> MultiDomain:
    """Unit square split at x = x_split: source cell 0 (left), receiver cell 1 (right)."""
    return build_multidomain([rectangle(0, 0, x_split, 1, eta, mu, 0), rectangle(x_split, 0, 1, 1, eta, mu, 1)])


def triangulate_square(h: float, max_iter: int = 500, seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Force-equilibrium (truss relaxation) triangulation of the unit square with spacing about h.

    Starts from a hexagonal lattice, treats mesh edges as compressed springs
    and relaxes the nodes, re-triangulating by Delaunay as they move; nodes
    leaving the square are projected back onto its boundary. ``seed`` adds a
    small random perturbation to the starting lattice to get a different mesh.
    """
    dy = h * math.sqrt(3) / 2
    rows = np.arange(0, 1 + 1e-12, dy)
    pts = [np.column_stack([np.arange(0.5 * h * (r % 2), 1 + 1e-12, h), np.full(len(np.arange(0.5 * h * (r % 2), 1 + 1e-12, h)), y)]) for r, y in enumerate(rows)]
    p = np.vstack(pts)
    if seed:
        p = np.clip(p + 0.1 * h * np.random.default_rng(seed).uniform(-1, 1, p.shape), 0, 1)
    corners = np.array(UNIT_SQUARE)
    far = np.min(np.linalg.norm(p[:, None, :] - corners[None], axis=2), axis=1) > 0.5 * h
    p = np.vstack([corners, p[far]])
    n_fix = len(corners)
    fscale, dt, ttol, dptol = 1.2, 0.2, 0.1, 1e-3
    old = np.full_like(p, np.inf)
    for _ in range(max_iter):
        if np.max(np.linalg.norm(p - old, axis=1)) / h > ttol:
            old = p.copy()
            tri = Delaunay(p).simplices
            bars = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            bars = np.unique(np.sort(bars, axis=1), axis=0)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        length = np.linalg.norm(vec, axis=1)
        l0 = fscale * math.sqrt(np.sum(length**2) / len(length))
        force = np.maximum(l0 - length, 0)
        fvec = (force / length)[:, None] * vec
        ftot = np.zeros_like(p)
        np.add.at(ftot, bars[:, 0], fvec)
        np.add.at(ftot, bars[:, 1], -fvec)
        ftot[:n_fix] = 0
        step = dt * ftot
        p = np.clip(p + step, 0.0, 1.0)
        inner = np.all((p[n_fix:] > 1e-12) & (p[n_fix:] < 1 - 1e-12), axis=1)
        if np.max(np.linalg.norm(step[n_fix:][inner], axis=1), initial=0) / h < dptol:
            break
    tris = _ccw(p, Delaunay(p).simplices)
    return p, tris


def _ccw(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = nodes[tris]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tris = tris.copy()
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    area = np.abs(cross) / 2
    return tris[area > 1e-14]


def planar_triangles(nodes: np.ndarray, tris: np.ndarray, eta: float = 1.0, mu: float = 0.0) -> MultiDomain:
    cells = [build_polygon_domain(nodes[t], eta=eta, mu=mu, id=j) for j, t in enumerate(tris)]
    return build_multidomain(cells)


def triangle_mesh_square(h: float, eta: float = 1.0, mu: float = 0.0, seed: int | None = None) -> MultiDomain:
    nodes, tris = triangulate_square(h, seed=seed)
    return planar_triangles(nodes, tris, eta, mu)


def halton_points(n: int, box=((0.0, 0.0), (1.0, 1.0)), seed: int = 0, margin: float = 1e-6) -> np.ndarray:
    """Low-discrepancy sample points strictly inside an axis-aligned box."""
    (x0, y0), (x1, y1) = box
    u = qmc.Halton(d=2, scramble=True, seed=seed).random(n)
    u = margin + (1 - 2 * margin) * u
    return np.column_stack([x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]])


# -- shells ------------------------------------------------------------------------


def structured_triangles(nu: int, nv: int) -> np.ndarray:
    """Triangles of an (nu+1) x (nv+1) node grid, node (a, b) -> a*(nv+1) + b."""
    tris = []
    for a in range(nu):
        for b in range(nv):
            p = a * (nv + 1) + b
            q = (a + 1) * (nv + 1) + b
            tris.append((p, q, q + 1))
            tris.append((p, q + 1, p + 1))
    return np.array(tris)


RIDGE_RADIUS = 2 / (3 * math.pi)


def ridge_point(xt: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Flat strip x~ < 1/3, quarter cylinder of radius 2/(3 pi), vertical strip beyond."""
    R = RIDGE_RADIUS
    xt = np.asarray(xt, dtype=float)
    tp = np.clip((xt - 1 / 3) / R, 0, math.pi / 2)
    x = np.where(xt <= 1 / 3, xt, 1 / 3 + R * np.sin(tp))
    z = np.where(xt <= 1 / 3, 0.0, R - R * np.cos(tp))
    vert = xt > 2 / 3
    x = np.where(vert, 1 / 3 + R, x)
    z = np.where(vert, R + xt - 2 / 3, z)
    return np.column_stack([x, np.broadcast_to(y, xt.shape), z])


def ridge_nodes(h: float = 0.05, width: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    per = max(1, round((1 / 3) / h))
    xt = np.concatenate([np.linspace(0, 1 / 3, per + 1)[:-1], np.linspace(1 / 3, 2 / 3, per + 1)[:-1], np.linspace(2 / 3, 1, per + 1)])
    ny = max(1, round(width / h))
    y = np.linspace(0, width, ny + 1)
    X, Y = np.meshgrid(xt, y, indexing="ij")
    nodes = ridge_point(X.ravel(), Y.ravel())
    return nodes, structured_triangles(len(xt) - 1, ny)


def ridge_mesh(h: float = 0.05, eta: float = 1.0, mu: float = 0.0) -> MultiDomain:
    nodes, tris = ridge_nodes(h)
    return multidomain_from_mesh(nodes, tris, eta=eta, mu=mu)


def cylinder_mesh(radius: float, h: float, half_angle: float = 0.45 * math.pi, width: float = 1.0, eta=1.0, mu=0.0) -> MultiDomain:
    """Cylinder patch with axis along y, bulging towards -z, normals with positive z."""
    nt = max(2, round(2 * half_angle * radius / h))
    ny = max(2, round(width / h))
    t = np.linspace(-half_angle, half_angle, nt + 1)
    y = np.linspace(0, width, ny + 1)
    T, Y = np.meshgrid(t, y, indexing="ij")
    nodes = np.column_stack([radius * np.sin(T.ravel()), Y.ravel(), radius - radius * np.cos(T.ravel())])
    return multidomain_from_mesh(nodes, structured_triangles(nt, ny), eta=eta, mu=mu)


def sphere_cap_mesh(radius: float = 1.0, h: float = 0.05, extent: float = 0.5, eta=1.0, mu=0.0) -> MultiDomain:
    """Lower cap of a sphere centred at (0, 0, radius), graph over [-extent, extent]^2."""
    n = max(2, round(2 * extent / h))
    g = np.linspace(-extent, extent, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    z = radius - np.sqrt(radius**2 - x**2 - y**2)
    return multidomain_from_mesh(np.column_stack([x, y, z]), structured_triangles(n, n), eta=eta, mu=mu)


def bump_surface(x, y, height: float = 0.15, width: float = 0.2):
    return height * np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / (2 * width**2))


def bump_shell_nodes(n: int = 16, height: float = 0.15, width: float = 0.2):
    g = np.linspace(0, 1, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    nodes = np.column_stack([x, y, bump_surface(x, y, height, width)])
    return nodes, structured_triangles(n, n)


def bump_shell(n: int = 16, height: float = 0.15, width: float = 0.2, eta=1.0, mu=0.0) -> MultiDomain:
    """Square plate with a smooth Gaussian bump; 2 n^2 triangles."""
    nodes, tris = bump_shell_nodes(n, height, width)
    return multidomain_from_mesh(nodes, tris, eta=eta, mu=mu)
