"""Experiment configuration: per-family defaults, TOML loading, CLI overrides.

A config file is a flat TOML table whose keys are the fields of
:class:`ExperimentConfig`. Unknown keys are rejected so a typo never
silently falls back to a default.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .operators import OPERATOR_NAMES
from .problems import PROBLEM_NAMES

FAMILIES = ("bench", "scale", "neuro", "ops", "verify")
ALGORITHM_NAMES = ("tensor_rvea", "nsga2", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    seed: int = 0
    reps: int = 5
    gens: int = 200
    pop: int = 105
    #: Lattice density; ``None`` picks about 100 vectors for the objective count.
    lattice_h: int | None = None
    alpha: float = 2.0
    fr: float = 0.1
    operator: str = "ga"
    operators: tuple[str, ...] = OPERATOR_NAMES
    algorithms: tuple[str, ...] = ALGORITHM_NAMES
    problems: tuple[str, ...] = ("dtlz1", "dtlz2", "dtlz3", "dtlz4")
    m: int = 3
    dim: int | None = None
    horizon: int = 100
    #: Lattice density of the IGD reference front (DTLZ); ``None`` uses ``lattice_h``.
    igd_ref_h: int | None = None
    hv_samples: int = 10_000
    budget_s: float | None = None
    archive_cap: int | None = None
    pop_sizes: tuple[int, ...] = tuple(2**k for k in range(5, 13))
    dims: tuple[int, ...] = tuple(2**k for k in range(9, 15))
    scale_dim: int = 100
    scale_pop: int = 100

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        for name in ("reps", "gens", "pop", "m", "horizon", "hv_samples", "scale_dim", "scale_pop"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.pop < 2:
            raise ConfigError("pop must be >= 2")
        for op in (self.operator, *self.operators):
            if op not in OPERATOR_NAMES:
                raise ConfigError(f"unknown operator {op!r}; choose from {', '.join(OPERATOR_NAMES)}")
        for alg in self.algorithms:
            if alg not in ALGORITHM_NAMES:
                raise ConfigError(f"unknown algorithm {alg!r}; choose from {', '.join(ALGORITHM_NAMES)}")
        for prob in self.problems:
            if prob not in PROBLEM_NAMES:
                raise ConfigError(f"unknown problem {prob!r}; choose from {', '.join(PROBLEM_NAMES)}")
            control = prob.startswith("toy")
            if control and self.family in ("bench", "scale") or not control and self.family in ("neuro", "ops"):
                raise ConfigError(f"{self.family} does not run problem {prob!r}")
        if not self.pop_sizes or not self.dims or min(self.pop_sizes) < 2 or min(self.dims) < self.m:
            raise ConfigError("pop_sizes must be >= 2 and dims >= m")

    def lattice_for(self, m: int) -> int:
        if self.lattice_h is not None:
            return self.lattice_h
        return {2: 99, 3: 13}.get(m, 5)

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


FAMILY_DEFAULTS: dict[str, dict] = {
    "bench": {},
    "scale": {"gens": 20, "reps": 1, "problems": ("dtlz1",), "lattice_h": 13},
    "neuro": {"pop": 512, "gens": 50, "problems": ("toy2", "toy3")},
    "ops": {"pop": 512, "gens": 100, "problems": ("toy2", "toy3")},
    "verify": {"reps": 1},
}

_TUPLE_FIELDS = {"operators", "algorithms", "problems", "pop_sizes", "dims"}
_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, value):
    if key in _TUPLE_FIELDS:
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        return tuple(value)
    return value


def build_config(family: str, file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Family defaults, then file values, then CLI overrides (``None`` means unset)."""
    values = dict(FAMILY_DEFAULTS.get(family, {}))
    for source in (file_values or {}, {k: v for k, v in (overrides or {}).items() if v is not None}):
        unknown = set(source) - _FIELDS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if source.get("family", family) != family:
            raise ConfigError(f"config is for family {source['family']!r}, not {family!r}")
        values.update({k: _coerce(k, v) for k, v in source.items() if k != "family"})
    try:
        return ExperimentConfig(family=family, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_file(path: str) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
