"""Run configuration: a small sectioned key = value format.

Grammar (documented for users in the README):

* a line is blank, a comment (starting with ``#`` or ``;``), a section
  header ``[name]``, or an assignment ``key = value``;
* sections are flat (no nesting) and may appear in any order at most
  once; assignments must appear inside a section;
* unknown sections and keys are errors, as are malformed values.

Every key has a default matching the reference experimental setup
(tau = 1e-3, rho = mu = alpha = theta = 1, g = 0, unit sphere at level 2,
Schur solver at tolerance 1e-10), so the empty document is a valid
configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .assembly import SchemeParams
from .errors import ConfigError
from .mesh import SurfaceMesh, build_capsule, build_sphere, build_torus
from .stepper import SolverOptions

__all__ = [
    "MeshConfig",
    "PhysicsConfig",
    "TimeConfig",
    "InitialConfig",
    "SolverConfig",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "serialize_config",
]

MESH_KINDS = ("sphere", "torus", "capsule")
VELOCITY_TAGS = ("zero", "constant", "killing_z", "radial")
SOLVER_METHODS = ("schur", "direct")
OUTPUT_FORMATS = ("csv", "vtk")


@dataclass(frozen=True)
class MeshConfig:
    kind: str = "sphere"
    level: int = 2
    radius: float = 1.0  # sphere and capsule tube radius
    ring_radius: float = 2.0  # torus only
    tube_radius: float = 1.0  # torus only
    half_length: float = 1.0  # capsule only


@dataclass(frozen=True)
class PhysicsConfig:
    rho: float = 1.0
    mu: float = 1.0
    alpha: float = 1.0
    theta: float = 1.0
    gravity: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class TimeConfig:
    tau: float = 1.0e-3
    t_end: float = 1.0


@dataclass(frozen=True)
class InitialConfig:
    velocity: str = "zero"
    vector: tuple = (0.0, 0.0, 0.0)  # used by the "constant" tag


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1.0e-10
    restart: int = 50
    max_iter: int = 500
    method: str = "schur"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    stride: int = 1
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def build_mesh(self) -> SurfaceMesh:
        m = self.mesh
        if m.kind == "sphere":
            return build_sphere(m.level, radius=m.radius)
        if m.kind == "torus":
            return build_torus(
                m.level, ring_radius=m.ring_radius, tube_radius=m.tube_radius
            )
        return build_capsule(m.level, m.half_length, m.radius)

    def scheme_params(self) -> SchemeParams:
        g = np.asarray(self.physics.gravity, dtype=float)
        forcing = None
        if np.any(g != 0.0):
            def forcing(points, g=g):
                return np.broadcast_to(g, points.shape).copy()
        return SchemeParams(
            rho=self.physics.rho,
            mu=self.physics.mu,
            alpha=self.physics.alpha,
            theta=self.physics.theta,
            tau=self.time.tau,
            t_end=self.time.t_end,
            forcing=forcing,
        )

    def initial_velocity(self):
        tag = self.initial.velocity
        if tag == "zero":
            return None
        if tag == "constant":
            vec = np.asarray(self.initial.vector, dtype=float)

            def constant(points, vec=vec):
                return np.broadcast_to(vec, points.shape).copy()

            return constant
        if tag == "killing_z":

            def killing(points):
                return np.stack(
                    [-points[:, 1], points[:, 0], np.zeros(len(points))], axis=1
                )

            return killing

        def radial(points):
            norms = np.linalg.norm(points, axis=1, keepdims=True)
            return points / norms

        return radial

    def solver_options(self) -> SolverOptions:
        s = self.solver
        return SolverOptions(
            method=s.method, tol=s.tol, restart=s.restart, max_iter=s.max_iter
        )


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _parse_float(raw, line, col, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(
            f"{key} expects a number, got {raw!r}", line=line, column=col
        ) from None


def _parse_int(raw, line, col, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(
            f"{key} expects an integer, got {raw!r}", line=line, column=col
        ) from None


def _parse_vector(raw, line, col, key):
    if raw.strip() == "zero":
        return (0.0, 0.0, 0.0)
    parts = raw.split()
    if len(parts) != 3:
        raise ConfigError(
            f"{key} expects 'zero' or three numbers, got {raw!r}",
            line=line,
            column=col,
        )
    return tuple(_parse_float(p, line, col, key) for p in parts)


def _parse_enum(options):
    def convert(raw, line, col, key):
        if raw not in options:
            raise ConfigError(
                f"{key} must be one of {', '.join(options)}; got {raw!r}",
                line=line,
                column=col,
            )
        return raw

    return convert


def _parse_formats(raw, line, col, key):
    parts = tuple(raw.split())
    if not parts:
        raise ConfigError(f"{key} expects at least one format", line=line, column=col)
    for p in parts:
        if p not in OUTPUT_FORMATS:
            raise ConfigError(
                f"{key} entries must be among {', '.join(OUTPUT_FORMATS)}; "
                f"got {p!r}",
                line=line,
                column=col,
            )
    return parts


def _parse_str(raw, line, col, key):
    return raw


_SCHEMA = {
    "mesh": {
        "kind": ("kind", _parse_enum(MESH_KINDS)),
        "level": ("level", _parse_int),
        "radius": ("radius", _parse_float),
        "ring_radius": ("ring_radius", _parse_float),
        "tube_radius": ("tube_radius", _parse_float),
        "half_length": ("half_length", _parse_float),
    },
    "physics": {
        "rho": ("rho", _parse_float),
        "mu": ("mu", _parse_float),
        "alpha": ("alpha", _parse_float),
        "theta": ("theta", _parse_float),
        "g": ("gravity", _parse_vector),
    },
    "time": {
        "tau": ("tau", _parse_float),
        "T": ("t_end", _parse_float),
    },
    "initial": {
        "velocity": ("velocity", _parse_enum(VELOCITY_TAGS)),
        "vector": ("vector", _parse_vector),
    },
    "solver": {
        "tol": ("tol", _parse_float),
        "restart": ("restart", _parse_int),
        "max_iter": ("max_iter", _parse_int),
        "method": ("method", _parse_enum(SOLVER_METHODS)),
    },
    "output": {
        "directory": ("directory", _parse_str),
        "stride": ("stride", _parse_int),
        "formats": ("formats", _parse_formats),
    },
}

_SECTION_TYPES = {
    "mesh": MeshConfig,
    "physics": PhysicsConfig,
    "time": TimeConfig,
    "initial": InitialConfig,
    "solver": SolverConfig,
    "output": OutputConfig,
}


def _validate(config: RunConfig) -> RunConfig:
    def bad(key, message):
        raise ConfigError(f"{key} {message}")

    m = config.mesh
    if m.level < 0:
        bad("mesh.level", f"must be >= 0, got {m.level}")
    if m.radius <= 0.0:
        bad("mesh.radius", f"must be > 0, got {m.radius}")
    if not 0.0 < m.tube_radius < m.ring_radius:
        bad(
            "mesh.tube_radius",
            f"needs 0 < tube_radius < ring_radius, got {m.tube_radius} "
            f"vs {m.ring_radius}",
        )
    if m.half_length < 0.0:
        bad("mesh.half_length", f"must be >= 0, got {m.half_length}")
    p = config.physics
    if p.rho < 0.0:
        bad("physics.rho", f"must be >= 0, got {p.rho}")
    if p.mu <= 0.0:
        bad("physics.mu", f"must be > 0, got {p.mu}")
    if p.alpha < 0.0:
        bad("physics.alpha", f"must be >= 0, got {p.alpha}")
    if p.theta not in (0.0, 1.0):
        bad("physics.theta", f"must be 0 or 1, got {p.theta}")
    t = config.time
    if t.tau <= 0.0:
        bad("time.tau", f"must be > 0, got {t.tau}")
    if t.t_end <= 0.0:
        bad("time.T", f"must be > 0, got {t.t_end}")
    s = config.solver
    if s.tol <= 0.0:
        bad("solver.tol", f"must be > 0, got {s.tol}")
    if s.restart < 1:
        bad("solver.restart", f"must be >= 1, got {s.restart}")
    if s.max_iter < 1:
        bad("solver.max_iter", f"must be >= 1, got {s.max_iter}")
    o = config.output
    if o.stride < 1:
        bad("output.stride", f"must be >= 1, got {o.stride}")
    return config


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    values = {name: {} for name in _SCHEMA}
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        stripped = raw_line.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        indent = len(raw_line) - len(raw_line.lstrip())
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(
                    "section header must close with ']'",
                    line=lineno,
                    column=indent + len(stripped),
                )
            name = stripped[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(
                    f"unknown section [{name}]; expected one of "
                    f"{', '.join(_SCHEMA)}",
                    line=lineno,
                    column=indent + 2,
                )
            section = name
            continue
        if "=" not in stripped:
            raise ConfigError(
                "expected 'key = value' or a [section] header",
                line=lineno,
                column=indent + 1,
            )
        if section is None:
            raise ConfigError(
                "assignment before any [section] header",
                line=lineno,
                column=indent + 1,
            )
        key, _, raw_value = stripped.partition("=")
        key = key.strip()
        value = raw_value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(
                f"unknown key {key!r} in section [{section}]; expected one "
                f"of {', '.join(_SCHEMA[section])}",
                line=lineno,
                column=indent + 1,
            )
        value_col = indent + raw_line.strip().index("=") + 2
        field_name, convert = _SCHEMA[section][key]
        values[section][field_name] = convert(
            value, lineno, value_col, f"{section}.{key}"
        )
    sections = {
        name: _SECTION_TYPES[name](**values[name]) for name in _SECTION_TYPES
    }
    return _validate(RunConfig(**sections))


def serialize_config(config: RunConfig) -> str:
    """Emit a document that parses back to an equal configuration."""
    reverse = {
        name: {field_name: key for key, (field_name, _) in mapping.items()}
        for name, mapping in _SCHEMA.items()
    }
    lines = []
    for name, section_type in _SECTION_TYPES.items():
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for fld in fields(section_type):
            value = getattr(section, fld.name)
            key = reverse[name][fld.name]
            if isinstance(value, tuple) and key != "formats":
                rendered = " ".join(repr(float(v)) for v in value)
            elif key == "formats":
                rendered = " ".join(value)
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            lines.append(f"{key} = {rendered}")
        lines.append("")
    return "\n".join(lines)
