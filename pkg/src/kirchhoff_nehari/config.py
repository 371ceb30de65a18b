"""YAML run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .nehari_solver import SolveOptions
from .params import ProblemParams
from .space import Mesh, WeightField

DEFAULT_WEIGHT = {"kind": "bump", "amplitude": 1.0, "center": [0.5, 0.5], "radius": 0.35}
DEFAULT_MESH = {"Lx": 1.0, "Ly": 1.0, "nx": 64, "ny": 64}
DEFAULT_FIBER = {"shape": "sine_bump", "t_min": 1e-3, "t_max": 1e3, "steps": 201}
SECTIONS = {"params", "mesh", "weight", "solver", "fiber", "output", "seed"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: ProblemParams
    mesh: dict = field(default_factory=lambda: dict(DEFAULT_MESH))
    weight: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHT))
    solver: SolveOptions = field(default_factory=SolveOptions)
    fiber: dict = field(default_factory=lambda: dict(DEFAULT_FIBER))
    output: str = "out"
    seed: int = 0

    @classmethod
    def from_mapping(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(data) - SECTIONS
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        if "params" not in data:
            raise ConfigError("missing required section 'params'")
        try:
            params = ProblemParams.from_mapping(data["params"])
            solver = SolveOptions.from_mapping(data.get("solver"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc).strip("'\"")) from None

        mesh = {**DEFAULT_MESH, **(data.get("mesh") or {})}
        if set(mesh) != set(DEFAULT_MESH):
            raise ConfigError(f"mesh block takes only {sorted(DEFAULT_MESH)}")
        fiber = {**DEFAULT_FIBER, **(data.get("fiber") or {})}
        if set(fiber) != set(DEFAULT_FIBER):
            raise ConfigError(f"fiber block takes only {sorted(DEFAULT_FIBER)}")

        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"seed must be an unsigned integer, got {seed!r}")
        solver.seed = seed
        return cls(params=params, mesh=mesh, weight=dict(data.get("weight") or DEFAULT_WEIGHT),
                   solver=solver, fiber=fiber, output=str(data.get("output", "out")), seed=seed)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"YAML parse error: {exc}") from None
        return cls.from_mapping(data)

    def with_seed(self, seed: int) -> "RunConfig":
        self.seed = seed
        self.solver.seed = seed
        return self

    def build_mesh(self) -> Mesh:
        m = self.mesh
        return Mesh(m["Lx"], m["Ly"], m["nx"], m["ny"])

    def build_weight(self, mesh: Mesh) -> WeightField:
        try:
            return WeightField.from_spec(mesh, self.weight)
        except TypeError as exc:
            raise ConfigError(f"bad weight block: {exc}") from None
