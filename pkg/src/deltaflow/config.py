"""Run configuration: INI sections parsed into dataclasses.

Angles are written in units of pi (``theta0 = 0.41``); numeric values may use
``pi`` and basic arithmetic (``omega = 100*pi``).
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp}


def eval_number(text: str) -> float:
    """Evaluate a numeric expression with pi, + - * / ** and sqrt/exp."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression element {ast.dump(node)}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from None


@dataclass
class GeometryConfig:
    kind: str = "square"  # square | split_square | quad_grid | triangles | polygons | mesh | ridge | bump
    polygons: list[list[tuple[float, float]]] = field(default_factory=list)
    mesh: str | None = None
    n: int = 5
    h: float = 0.05
    seed: int = 0


@dataclass
class PhysicsConfig:
    model: str = "helmholtz"
    c: float = 1.0
    eta: float | None = None
    omega: float = 1.0
    mu: float | None = None
    damping_fraction: float | None = None
    rho_fluid: float = 1.0
    thickness: float | None = None
    youngs: float | None = None
    density: float | None = None
    poisson: float | None = None

    @property
    def alpha(self) -> int:
        return 2 if self.model == "biharmonic" else 1


@dataclass
class DiscretizationConfig:
    L: int = 4
    offset: bool = False
    angles: list[float] | None = None  # radians
    target_h: float = 1.0


@dataclass
class SourceConfig:
    kind: str = "line"  # line | acoustic_point | shell_point
    edges: str = ""
    theta0: float = 0.0  # radians
    amplitude: float = 1.0
    location: tuple[float, ...] | None = None
    vertex: int | None = None


@dataclass
class InterfaceConfig:
    reflection: float = 0.0
    transmission: float = 1.0
    free_reflection: float = 1.0
    overrides: dict[tuple[int, int], tuple[float, float]] = field(default_factory=dict)


@dataclass
class ShellConfig:
    curvature_reflections: bool = False
    ky_max: float | None = None
    k: float | None = None
    threshold_angle: float | None = None  # radians
    rings: int = 1
    secondary: str = "angle"


@dataclass
class SolverConfig:
    method: str = "auto"
    tol: float = 1e-10
    max_iter: int = 2000


@dataclass
class OutputConfig:
    points: str = "centroids"  # centroids | halton:<n> | <csv path>
    field: str = "field.csv"
    log10: bool = False
    include_direct: bool = True


@dataclass
class OracleConfig:
    kind: str | None = None  # parallel_wall | image_source
    max_order: int = 32
    receiver_cell: int | None = None


@dataclass
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    interfaces: InterfaceConfig = field(default_factory=InterfaceConfig)
    shell: ShellConfig = field(default_factory=ShellConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    base_dir: Path = Path(".")


_SECTIONS = {
    "geometry": {"kind", "polygons", "mesh", "n", "h", "seed"},
    "physics": {"model", "c", "eta", "omega", "mu", "damping_fraction", "rho_fluid", "thickness", "youngs", "density", "poisson"},
    "discretization": {"l", "offset", "angles", "target_h"},
    "source": {"kind", "edges", "theta0", "amplitude", "location", "vertex"},
    "interfaces": {"reflection", "transmission", "free_reflection"},
    "shell": {"curvature_reflections", "ky_max", "k", "threshold_angle", "rings", "secondary"},
    "solver": {"method", "tol", "max_iter"},
    "output": {"points", "field", "log10", "include_direct"},
    "oracle": {"kind", "max_order", "receiver_cell"},
}


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, path: str):
        self.cp = cp
        self.path = path

    def _ctx(self, section, key):
        return f"{self.path}: [{section}] {key}"

    def get(self, section, key, default=None):
        if not self.cp.has_option(section, key):
            return default
        return self.cp.get(section, key).strip()

    def number(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return eval_number(raw)
        except ValueError as exc:
            raise ConfigError(f"{self._ctx(section, key)}: {exc}") from None

    def integer(self, section, key, default=None):
        v = self.number(section, key)
        if v is None:
            return default
        if v != int(v):
            raise ConfigError(f"{self._ctx(section, key)}: expected an integer, got {v}")
        return int(v)

    def flag(self, section, key, default=False):
        raw = self.get(section, key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"{self._ctx(section, key)}: expected on/off, got {raw!r}")

    def numbers(self, section, key, sep=","):
        raw = self.get(section, key)
        if raw is None:
            return None
        try:
            return [eval_number(t) for t in raw.replace("\n", sep).split(sep) if t.strip()]
        except ValueError as exc:
            raise ConfigError(f"{self._ctx(section, key)}: {exc}") from None


def _parse_polygons(text: str, ctx: str) -> list[list[tuple[float, float]]]:
    polys = []
    for chunk in text.replace("\n", ";").split(";"):
        if not chunk.strip():
            continue
        pts = []
        for pair in chunk.split():
            xy = pair.split(",")
            if len(xy) != 2:
                raise ConfigError(f"{ctx}: vertex {pair!r} is not 'x,y'")
            try:
                pts.append((eval_number(xy[0]), eval_number(xy[1])))
            except ValueError as exc:
                raise ConfigError(f"{ctx}: {exc}") from None
        polys.append(pts)
    return polys


def parse_config(text: str, path: str = "<config>", base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"), interpolation=None)
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for sec in cp.sections():
        sname = sec.lower()
        if sname not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        for key in cp.options(sec):
            if key not in _SECTIONS[sname] and not (sname == "interfaces" and key.startswith("edge")):
                raise ConfigError(f"{path}: unknown key [{sec}] {key}")
    r = _Reader(cp, path)
    cfg = RunConfig(base_dir=base_dir or Path("."))

    g = cfg.geometry
    g.kind = r.get("geometry", "kind", g.kind)
    g.mesh = r.get("geometry", "mesh")
    if r.get("geometry", "polygons"):
        g.polygons = _parse_polygons(r.get("geometry", "polygons"), f"{path}: [geometry] polygons")
    g.n = r.integer("geometry", "n", g.n)
    g.h = r.number("geometry", "h", g.h)
    g.seed = r.integer("geometry", "seed", g.seed)
    kinds = {"square", "split_square", "quad_grid", "triangles", "polygons", "mesh", "ridge", "bump"}
    if g.kind not in kinds:
        raise ConfigError(f"{path}: [geometry] kind must be one of {sorted(kinds)}")
    if g.kind == "mesh" and g.polygons or g.kind == "polygons" and g.mesh:
        raise ConfigError(f"{path}: [geometry] give exactly one of polygons or mesh")
    if g.kind == "mesh":
        if not g.mesh:
            raise ConfigError(f"{path}: [geometry] kind = mesh needs 'mesh = <file>'")
        if not (cfg.base_dir / g.mesh).exists():
            raise ConfigError(f"{path}: [geometry] mesh file {g.mesh!r} not found")
    if g.kind == "polygons" and not g.polygons:
        raise ConfigError(f"{path}: [geometry] kind = polygons needs 'polygons = ...'")

    p = cfg.physics
    p.model = r.get("physics", "model", p.model)
    if p.model not in ("helmholtz", "biharmonic"):
        raise ConfigError(f"{path}: [physics] model must be helmholtz or biharmonic")
    for name in ("c", "omega", "rho_fluid"):
        setattr(p, name, r.number("physics", name, getattr(p, name)))
    for name in ("eta", "mu", "damping_fraction", "thickness", "youngs", "density", "poisson"):
        setattr(p, name, r.number("physics", name))
    if p.mu is not None and p.damping_fraction is not None:
        raise ConfigError(f"{path}: [physics] give mu or damping_fraction, not both")
    if p.model == "biharmonic" and p.eta is None:
        missing = [n for n in ("thickness", "youngs", "density", "poisson") if getattr(p, n) is None]
        if missing:
            raise ConfigError(f"{path}: [physics] biharmonic model needs {', '.join(missing)} (or eta)")
    if p.mu is not None and p.mu < 0:
        raise ConfigError(f"{path}: [physics] mu must be >= 0")

    d = cfg.discretization
    d.L = r.integer("discretization", "l", d.L)
    d.offset = r.flag("discretization", "offset", d.offset)
    ang = r.numbers("discretization", "angles")
    d.angles = [a * math.pi for a in ang] if ang else None
    d.target_h = r.number("discretization", "target_h", d.target_h)
    if d.target_h is None or d.target_h <= 0:
        raise ConfigError(f"{path}: [discretization] target_h must be positive")

    s = cfg.source
    s.kind = r.get("source", "kind", s.kind)
    if s.kind not in ("line", "acoustic_point", "shell_point"):
        raise ConfigError(f"{path}: [source] kind must be line, acoustic_point or shell_point")
    s.edges = r.get("source", "edges", s.edges)
    s.theta0 = r.number("source", "theta0", 0.0) * math.pi
    s.amplitude = r.number("source", "amplitude", s.amplitude)
    loc = r.numbers("source", "location")
    s.location = tuple(loc) if loc else None
    s.vertex = r.integer("source", "vertex")
    if s.kind == "line":
        if not s.edges:
            raise ConfigError(f"{path}: [source] line source needs 'edges'")
        if not abs(s.theta0) < math.pi / 2:
            raise ConfigError(f"{path}: [source] theta0 must lie in (-0.5, 0.5) (units of pi)")
    if s.kind == "acoustic_point" and (s.location is None or len(s.location) != 2):
        raise ConfigError(f"{path}: [source] acoustic point source needs 'location = x, y'")
    if s.kind == "shell_point" and s.vertex is None and s.location is None:
        raise ConfigError(f"{path}: [source] shell point source needs 'vertex' or 'location'")

    it = cfg.interfaces
    for name in ("reflection", "transmission", "free_reflection"):
        setattr(it, name, r.number("interfaces", name, getattr(it, name)))
    if cp.has_section("interfaces"):
        for key in cp.options("interfaces"):
            if key.startswith("edge"):
                try:
                    j, e = (int(t) for t in key[4:].strip(" .:_").replace(":", ".").split("."))
                except ValueError:
                    raise ConfigError(f"{path}: [interfaces] {key}: expected 'edge <cell>.<edge> = R, T'") from None
                vals = r.numbers("interfaces", key)
                if len(vals) != 2:
                    raise ConfigError(f"{path}: [interfaces] {key}: expected 'R, T'")
                it.overrides[(j, e)] = (vals[0], vals[1])
    weights = [it.reflection, it.transmission, it.free_reflection, *(v for rt in it.overrides.values() for v in rt)]
    if any(not 0 <= w <= 1 for w in weights):
        raise ConfigError(f"{path}: [interfaces] weights must lie in [0, 1]")

    sh = cfg.shell
    sh.curvature_reflections = r.flag("shell", "curvature_reflections", sh.curvature_reflections)
    sh.ky_max = r.number("shell", "ky_max")
    sh.k = r.number("shell", "k")
    ta = r.number("shell", "threshold_angle")
    sh.threshold_angle = ta * math.pi if ta is not None else None
    sh.rings = r.integer("shell", "rings", sh.rings)
    sh.secondary = r.get("shell", "secondary", sh.secondary)
    if sh.curvature_reflections and sh.ky_max is None and sh.threshold_angle is None:
        raise ConfigError(f"{path}: [shell] curvature reflections need ky_max or threshold_angle")

    sv = cfg.solver
    sv.method = r.get("solver", "method", sv.method)
    sv.tol = r.number("solver", "tol", sv.tol)
    sv.max_iter = r.integer("solver", "max_iter", sv.max_iter)
    if sv.method not in ("auto", "direct", "iterative"):
        raise ConfigError(f"{path}: [solver] method must be auto, direct or iterative")

    o = cfg.output
    o.points = r.get("output", "points", o.points)
    o.field = r.get("output", "field", o.field)
    o.log10 = r.flag("output", "log10", o.log10)
    o.include_direct = r.flag("output", "include_direct", o.include_direct)

    oc = cfg.oracle
    oc.kind = r.get("oracle", "kind")
    oc.max_order = r.integer("oracle", "max_order", oc.max_order)
    oc.receiver_cell = r.integer("oracle", "receiver_cell")
    if oc.kind not in (None, "parallel_wall", "image_source"):
        raise ConfigError(f"{path}: [oracle] kind must be parallel_wall or image_source")

    # solvability: something must absorb energy
    lossless = (p.mu in (None, 0.0)) and p.damping_fraction in (None, 0.0)
    if lossless and all(w == 1 for w in (it.free_reflection,)) and it.reflection + it.transmission >= 1:
        raise ConfigError(f"{path}: no damping and no absorbing weight; I - B would be singular")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} not found")
    return parse_config(path.read_text(), str(path), path.parent)
