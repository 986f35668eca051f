"""JSON run configuration.

Example::

    {
      "mode": "compare",
      "grid": {"n_s": 64, "length": 1.0},
      "integrator": {"cfl": 0.25, "t_end": 1.0, "fd_order": 2},
      "physics": {"I": [1, 2, 3], "J": [2, 1, 1], "e": 1.0, "chi": [0, 0, 1]},
      "initial": {"kind": "twist", "parameters": {"amplitude": 0.3, "mode": 1}, "seed": 0},
      "outputs": {"directory": "out", "snapshot_stride": 4}
    }

Optional sections: ``convergence`` (``n_s`` list and ``min_order``) and
``verify`` (``points``, ``tolerance``).
"""

import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .dynamics import Grid, IntegratorConfig
from .errors import ConfigError, InvalidInput, ValidationError
from .strand import StrandParams

MODES = ("simulate-unreduced", "simulate-reduced", "compare", "verify-identities", "convergence")
KINDS = {
    "equilibrium": ("phi", "chi"),
    "twist": ("amplitude", "mode"),
    "fourier": ("amplitude", "momentum_amplitude", "modes"),
}


@dataclass
class GridSection:
    n_s: int = 64
    length: float = 1.0


@dataclass
class IntegratorSection:
    dt: Optional[float] = None
    cfl: Optional[float] = 0.25
    t_end: float = 1.0
    fd_order: int = 2
    renormalize_every: int = 1
    rotation_update: str = "multiplicative"


@dataclass
class PhysicsSection:
    I: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    J: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    e: float = 0.0
    chi: list = field(default_factory=lambda: [0.0, 0.0, 1.0])


@dataclass
class InitialSection:
    kind: str = "twist"
    parameters: dict = field(default_factory=dict)
    seed: int = 0


@dataclass
class OutputSection:
    directory: str = "out"
    snapshot_stride: int = 1


@dataclass
class ConvergenceSection:
    n_s: List[int] = field(default_factory=lambda: [32, 64, 128, 256])
    min_order: float = 1.8


@dataclass
class VerifySection:
    points: int = 1000
    tolerance: float = 1e-5


@dataclass
class RunConfig:
    mode: str = "simulate-reduced"
    grid: GridSection = field(default_factory=GridSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    initial: InitialSection = field(default_factory=InitialSection)
    outputs: OutputSection = field(default_factory=OutputSection)
    convergence: ConvergenceSection = field(default_factory=ConvergenceSection)
    verify: VerifySection = field(default_factory=VerifySection)

    def to_dict(self):
        return asdict(self)

    # derived objects
    def build_grid(self):
        try:
            return Grid(self.grid.n_s, self.grid.length)
        except InvalidInput as exc:
            raise ValidationError(f"grid: {exc}") from exc

    def build_params(self):
        p = self.physics
        try:
            return StrandParams(p.I, p.J, p.e, p.chi)
        except InvalidInput as exc:
            raise ValidationError(f"physics: {exc}") from exc

    def build_integrator(self, grid):
        s = self.integrator
        dt = s.dt if s.dt is not None else s.cfl * grid.ds
        cfg = IntegratorConfig(
            dt=float(dt),
            t_end=float(s.t_end),
            fd_order=int(s.fd_order),
            renormalize_every=int(s.renormalize_every),
            rotation_update=s.rotation_update,
        )
        cfg.check(grid)
        stride = self.outputs.snapshot_stride
        if stride < 1 or (cfg.n_steps and cfg.n_steps % stride):
            raise ValidationError(
                f"outputs.snapshot_stride = {stride} must be positive and divide the {cfg.n_steps} time steps"
            )
        return cfg


_SECTIONS = {
    "grid": GridSection,
    "integrator": IntegratorSection,
    "physics": PhysicsSection,
    "initial": InitialSection,
    "outputs": OutputSection,
    "convergence": ConvergenceSection,
    "verify": VerifySection,
}


def _section(cls, name, data):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data):
    """Build a :class:`RunConfig`; structural problems raise :class:`ConfigError`."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"mode"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {name: _section(cls, name, data[name]) for name, cls in _SECTIONS.items() if name in data}
    cfg = RunConfig(mode=data.get("mode", "simulate-reduced"), **kwargs)
    _check_types(cfg)
    return cfg


def _check_types(cfg):
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.initial.kind not in KINDS:
        raise ConfigError(f"initial.kind must be one of {tuple(KINDS)}")
    if not isinstance(cfg.initial.parameters, dict):
        raise ConfigError("initial.parameters must be an object")
    extra = set(cfg.initial.parameters) - set(KINDS[cfg.initial.kind])
    if extra:
        raise ConfigError(f"unknown parameters for {cfg.initial.kind!r}: {sorted(extra)}")
    integers = [
        ("grid.n_s", cfg.grid.n_s),
        ("outputs.snapshot_stride", cfg.outputs.snapshot_stride),
        ("initial.seed", cfg.initial.seed),
        ("verify.points", cfg.verify.points),
        ("integrator.fd_order", cfg.integrator.fd_order),
        ("integrator.renormalize_every", cfg.integrator.renormalize_every),
    ]
    for name, val in integers:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{name} must be an integer")
    if not isinstance(cfg.convergence.n_s, list) or not all(isinstance(v, int) for v in cfg.convergence.n_s):
        raise ConfigError("convergence.n_s must be a list of integers")
    if cfg.integrator.dt is None and cfg.integrator.cfl is None:
        raise ConfigError("integrator needs dt or cfl")
    numbers = [("grid.length", cfg.grid.length), ("integrator.t_end", cfg.integrator.t_end), ("physics.e", cfg.physics.e)]
    numbers += [(f"integrator.{k}", getattr(cfg.integrator, k)) for k in ("dt", "cfl") if getattr(cfg.integrator, k) is not None]
    for name, val in numbers:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{name} must be a number")
    for name in ("I", "J", "chi"):
        try:
            np.asarray(getattr(cfg.physics, name), dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"physics.{name} must be numeric") from exc


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(data)
