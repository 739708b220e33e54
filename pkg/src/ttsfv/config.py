"""Run configuration files (TOML) with strict key checking.

Example::

    scenario = "burgers-beta"
    mode = "run"
    seed = 7
    output = "out/burgers"

    [mesh]
    cells = 256
    stochastic_cells = 32

    [solver]
    epsilon_tt = 9e-4
    max_rank = 16          # int, per-bond list, or "none"
    integrator = "SSP33"
    cfl = 0.45
    t_final = 0.35
    nu = "pointwise"       # or "global", or a number

    [cross]
    max_rank = 64
    max_sweeps = 10
    kick_rank = 2

    [study]
    grids = [32, 64, 128, 256]
    norm = "L1"
    m_values = [1, 2, 3]
    steps = 2
    repeats = 3
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("run", "converge", "scale", "oracle-compare")
NORMS = ("L1", "L2", "Linf")


class ConfigError(ValueError):
    pass


@dataclass
class MeshSection:
    cells: int | None = None
    stochastic_cells: int | None = None


@dataclass
class SolverSection:
    epsilon_tt: float | None = None
    max_rank: int | list | str | None = None
    integrator: str | None = None
    cfl: float | None = None
    t_final: float | None = None
    nu: str | float | None = None
    weights: str | None = None


@dataclass
class CrossSection:
    max_rank: int | None = None
    max_sweeps: int | None = None
    kick_rank: int | None = None
    init_rank: int | None = None
    n_check: int | None = None


@dataclass
class StudySection:
    grids: list = field(default_factory=lambda: [32, 64, 128, 256])
    norm: str = "L1"
    m_values: list = field(default_factory=lambda: list(range(1, 9)))
    steps: int = 2
    repeats: int = 3
    samples: int = 4096


@dataclass
class RunConfig:
    scenario: str = "advection"
    mode: str = "run"
    seed: int = 0
    output: str = "out"
    distribution: str | None = None
    mesh: MeshSection = field(default_factory=MeshSection)
    solver: SolverSection = field(default_factory=SolverSection)
    cross: CrossSection = field(default_factory=CrossSection)
    study: StudySection = field(default_factory=StudySection)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.study.norm not in NORMS:
            raise ConfigError(f"norm must be one of {NORMS}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        s = self.solver
        if s.epsilon_tt is not None and not s.epsilon_tt > 0:
            raise ConfigError("epsilon_tt must be positive")
        if s.cfl is not None and not 0 < s.cfl <= 1:
            raise ConfigError("cfl must lie in (0, 1]")
        if s.t_final is not None and s.t_final < 0:
            raise ConfigError("t_final must be non-negative")
        for name in ("cells", "stochastic_cells"):
            v = getattr(self.mesh, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"mesh.{name} must be a positive integer")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"mesh": MeshSection, "solver": SolverSection, "cross": CrossSection, "study": StudySection}


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(extra)}")
    return cls(**data)


def from_dict(data: dict) -> RunConfig:
    data = dict(data)
    sections = {}
    for name, cls in _SECTIONS.items():
        sub = data.pop(name, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"[{name}] must be a table")
        sections[name] = _build(cls, sub, f"[{name}]")
    top = _build(RunConfig, data, "top level")
    for name, val in sections.items():
        setattr(top, name, val)
    return top.validate()


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data)
