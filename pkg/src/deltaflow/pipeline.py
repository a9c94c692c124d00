"""Config -> geometry -> assemble -> solve -> evaluate."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .directions import custom_directions, make_global_directions
from .dispersion import PlateMaterial, hysteretic_damping
from .errors import ConfigError, NoOracle
from .geometry import build_multidomain, build_polygon_domain, multidomain_from_mesh, read_mesh
from .interior import InteriorField, direct_field, evaluate_interior
from .meshes import bump_shell_nodes, halton_points, quad_grid, ridge_nodes, split_square, triangle_mesh_square, unit_square
from .oracle import analytic_parallel_wall, image_source_field, rectangle_image_field
from .shell import ShellRule, ThresholdRule, estimate_curvature, threshold_angle
from .solve import SolveReport, solve_stationary
from .sources import AcousticPointSource, LineSource, ShellPointSource, coordinate_selector, project_source
from .transfer import Discretization, TransferMatrix, UniformRule, assemble, discretize


@dataclass
class Physics:
    eta: float
    mu: float
    alpha: int
    k: float | None = None
    material: PlateMaterial | None = None


def resolve_physics(cfg: RunConfig) -> Physics:
    p = cfg.physics
    material = None
    if p.model == "biharmonic":
        if p.eta is not None:
            eta = p.eta
        else:
            material = PlateMaterial(p.thickness, p.youngs, p.density, p.poisson)
            eta = material.slowness
        k = eta * math.sqrt(p.omega)
    else:
        eta = p.eta if p.eta is not None else 1.0 / p.c
        k = eta * p.omega
    if p.damping_fraction is not None:
        mu = hysteretic_damping(p.damping_fraction, k)
    else:
        mu = p.mu or 0.0
    return Physics(eta=eta, mu=mu, alpha=p.alpha, k=k, material=material)


def build_geometry(cfg: RunConfig, phys: Physics):
    g = cfg.geometry
    eta, mu = phys.eta, phys.mu
    if g.kind == "square":
        return unit_square(eta, mu)
    if g.kind == "split_square":
        return split_square(eta, mu)
    if g.kind == "quad_grid":
        return quad_grid(g.n, eta, mu)
    if g.kind == "triangles":
        return triangle_mesh_square(g.h, eta, mu, g.seed)
    if g.kind == "polygons":
        return build_multidomain([build_polygon_domain(poly, eta, mu, id=j) for j, poly in enumerate(g.polygons)])
    if g.kind == "mesh":
        nodes, tris, free = read_mesh(cfg.base_dir / g.mesh)
        return multidomain_from_mesh(nodes, tris, free, eta, mu)
    if g.kind == "ridge":
        nodes, tris = ridge_nodes(g.h)
        return multidomain_from_mesh(nodes, tris, eta=eta, mu=mu)
    if g.kind == "bump":
        nodes, tris = bump_shell_nodes(g.n)
        return multidomain_from_mesh(nodes, tris, eta=eta, mu=mu)
    raise ConfigError(f"unknown geometry kind {g.kind!r}")


def parse_edge_selector(text: str):
    """'x=0, z=0' (coordinate test on both end points) or '0:3 1:2' (cell:edge pairs)."""
    text = text.strip()
    if "=" in text:
        fixed = {}
        for part in text.replace(";", ",").split(","):
            k, v = part.split("=")
            k = k.strip().lower()
            if k not in ("x", "y", "z"):
                raise ConfigError(f"edge selector axis {k!r} is not x, y or z")
            fixed[k] = float(v)
        return coordinate_selector(**fixed)
    pairs = []
    for tok in text.replace(",", " ").split():
        try:
            j, e = tok.split(":")
            pairs.append((int(j), int(e)))
        except ValueError:
            raise ConfigError(f"edge selector entry {tok!r} is not 'cell:edge'") from None
    return pairs


def build_source(cfg: RunConfig, phys: Physics):
    s = cfg.source
    if s.kind == "line":
        return LineSource(parse_edge_selector(s.edges), s.theta0, s.amplitude)
    if s.kind == "acoustic_point":
        return AcousticPointSource(tuple(s.location), cfg.physics.omega, cfg.physics.rho_fluid)
    material = phys.material
    if material is None:
        raise ConfigError("shell point source needs plate constants in [physics]")
    loc = tuple(s.location) if s.location else None
    return ShellPointSource(s.vertex, cfg.physics.omega, material, loc)


def build_rule(cfg: RunConfig, md, phys: Physics):
    it = cfg.interfaces
    if md.shell is not None and cfg.shell.curvature_reflections:
        sh = cfg.shell
        if sh.threshold_angle is not None:
            thr = ThresholdRule(default=sh.threshold_angle)
        else:
            k = sh.k if sh.k is not None else phys.k
            thr = ThresholdRule(default=threshold_angle(k, sh.ky_max), provenance="computed")
        curv = estimate_curvature(md, sh.rings)
        return ShellRule(md, curv, thr, enabled=True, secondary=sh.secondary)
    return UniformRule(it.reflection, it.transmission, it.free_reflection, dict(it.overrides))


def directions_for(cfg: RunConfig, L: int | None = None):
    d = cfg.discretization
    if d.angles is not None and L is None:
        return custom_directions(d.angles)
    return make_global_directions(L or d.L, d.offset)


def sample_locations(cfg: RunConfig, md):
    spec = cfg.output.points
    if spec == "centroids":
        return None
    if spec.startswith("halton:"):
        n = int(spec.split(":")[1])
        if md.shell is not None or len(md.cells) == 0:
            raise ConfigError("halton sample points need a planar domain")
        verts = np.vstack([c.vertices for c in md.cells])
        box = (tuple(verts.min(0)), tuple(verts.max(0)))
        pts = halton_points(4 * n, box)
        inside = md.locate(pts) >= 0
        return pts[inside][:n]
    path = cfg.base_dir / spec
    if not path.exists():
        raise ConfigError(f"sample point file {spec!r} not found")
    return np.loadtxt(path, delimiter=",", ndmin=2)


@dataclass
class RunResult:
    disc: Discretization
    B: TransferMatrix
    rho0: np.ndarray
    rho: np.ndarray
    field: InteriorField
    direct: np.ndarray
    report: SolveReport
    timings: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        return self.field.values + self.direct


def run_config(cfg: RunConfig, threads: int = 1, L: int | None = None, target_h: float | None = None, geometry=None) -> RunResult:
    phys = resolve_physics(cfg)
    md = geometry if geometry is not None else build_geometry(cfg, phys)
    dirs = directions_for(cfg, L)
    t0 = time.perf_counter()
    disc = discretize(md, dirs, target_h or cfg.discretization.target_h)
    rule = build_rule(cfg, md, phys)
    B = assemble(disc, rule, workers=threads)
    t1 = time.perf_counter()
    src = build_source(cfg, phys)
    rho0 = project_source(src, disc, rule)
    rho, report = solve_stationary(B, rho0, cfg.solver.method, cfg.solver.tol, cfg.solver.max_iter)
    t2 = time.perf_counter()
    pts = sample_locations(cfg, md)
    fld = evaluate_interior(disc, rho, pts, alpha=phys.alpha)
    direct = direct_field(src, disc, fld.cells, fld.points, phys.alpha) if cfg.output.include_direct else np.zeros(len(fld))
    t3 = time.perf_counter()
    return RunResult(disc, B, rho0, rho, fld, direct, report, {"assemble": t1 - t0, "solve": t2 - t1, "evaluate": t3 - t2})


def oracle_values(cfg: RunConfig, res: RunResult) -> np.ndarray:
    """Reference field on the run's sample points."""
    oc = cfg.oracle
    phys = resolve_physics(cfg)
    pts = res.field.xyz[:, :2]
    if oc.kind == "parallel_wall":
        return analytic_parallel_wall(pts[:, 0], phys.mu)
    if oc.kind == "image_source":
        if cfg.source.kind != "acoustic_point":
            raise NoOracle("the image-source oracle needs an acoustic point source")
        verts = np.vstack([c.vertices for c in res.disc.md.cells])
        from scipy.spatial import ConvexHull

        hull = verts[ConvexHull(verts).vertices]
        lo, hi = hull.min(0), hull.max(0)
        args = (cfg.source.location, pts, oc.max_order, cfg.physics.omega, cfg.physics.rho_fluid, phys.eta, phys.mu)
        if len(hull) == 4 and _is_box(hull, lo, hi):
            # axis-aligned box: the lattice sum is exact and much faster than beam tracing
            return rectangle_image_field(tuple(hi - lo), tuple(np.asarray(cfg.source.location) - lo), pts - lo, *args[2:])
        return image_source_field(hull, *args)
    raise NoOracle("no oracle defined; add an [oracle] section")


def _is_box(hull, lo, hi) -> bool:
    return all(np.any(np.all(np.isclose(hull, c), axis=1)) for c in ([lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]))


def receiver_mask(cfg: RunConfig, res: RunResult) -> np.ndarray:
    rc = cfg.oracle.receiver_cell
    return np.ones(len(res.field), dtype=bool) if rc is None else res.field.cells == rc
