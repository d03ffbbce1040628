"""Experiment configuration: flat key = value sections, strict schema.

The format round-trips losslessly through :func:`to_text` /
:func:`from_text`; unknown sections or keys are errors, as are values that
fail validation.  The seed fully determines every randomized
initialization in a run.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

from .errors import ConfigError

PROBLEM_KINDS = ("2d-const", "2d-var", "3d-const", "3d-var", "temkin-poet")
_SCHEMA = {
    "problem": {"kind": str},
    "grid": {
        "interior_count": int,
        "domain_start": float,
        "ecs_start": float,
        "rotation_angle": float,
        "ecs_fraction": float,
    },
    "wavenumber": {"k0_squared": complex, "chi": str, "cp_rank": int},
    "rhs": {"profile": str},
    "solver": {
        "version": int,
        "rank": int,
        "max_iters": int,
        "tol": float,
        "seed": int,
        "init": str,
    },
    "output": {"directory": str, "csv": str},
}
_DEFAULTS = {
    ("wavenumber", "cp_rank"): 0,
    ("solver", "version"): 1,
    ("solver", "init"): "random",
    ("solver", "tol"): 1e-6,
    ("solver", "max_iters"): 10,
    ("solver", "seed"): 0,
    ("output", "directory"): "out",
    ("output", "csv"): "residuals,singular_values",
}
KNOWN_CSVS = ("residuals", "singular_values", "runtime", "cross_section", "error")


@dataclass
class ExperimentConfig:
    kind: str
    interior_count: int
    domain_start: float
    ecs_start: float
    rotation_angle: float
    ecs_fraction: float
    k0_squared: complex
    chi: str
    cp_rank: int
    rhs_profile: str
    version: int
    rank: int
    max_iters: int
    tol: float
    seed: int
    init: str
    directory: str
    csv: tuple

    @property
    def is_2d(self) -> bool:
        return self.kind in ("2d-const", "2d-var", "temkin-poet")

    def replace(self, **updates) -> "ExperimentConfig":
        data = self.__dict__.copy()
        data.update(updates)
        return ExperimentConfig(**data)

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["k0_squared"] = str(self.k0_squared)
        out["csv"] = ",".join(self.csv)
        return out


def _format_value(value) -> str:
    if isinstance(value, complex):
        if value.imag == 0:
            return repr(value.real)
        return repr(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_text(config: ExperimentConfig) -> str:
    """Serialize to the canonical sectioned key = value format."""
    lines = []
    mapping = {
        "problem": {"kind": config.kind},
        "grid": {
            "interior_count": config.interior_count,
            "domain_start": config.domain_start,
            "ecs_start": config.ecs_start,
            "rotation_angle": config.rotation_angle,
            "ecs_fraction": config.ecs_fraction,
        },
        "wavenumber": {
            "k0_squared": config.k0_squared,
            "chi": config.chi,
            "cp_rank": config.cp_rank,
        },
        "rhs": {"profile": config.rhs_profile},
        "solver": {
            "version": config.version,
            "rank": config.rank,
            "max_iters": config.max_iters,
            "tol": config.tol,
            "seed": config.seed,
            "init": config.init,
        },
        "output": {"directory": config.directory, "csv": ",".join(config.csv)},
    }
    for section, entries in mapping.items():
        lines.append(f"[{section}]")
        for key, value in entries.items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def _parse_typed(section: str, key: str, raw: str, typ):
    try:
        if typ is complex:
            return complex(raw.replace(" ", ""))
        if typ is float:
            return float(raw)
        if typ is int:
            return int(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} as {typ.__name__}") from exc


def from_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"parse failure: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            values[(section, key)] = _parse_typed(section, key, raw, _SCHEMA[section][key])
    for dkey, dval in _DEFAULTS.items():
        values.setdefault(dkey, dval)

    required = [
        ("problem", "kind"), ("grid", "interior_count"), ("grid", "domain_start"),
        ("grid", "ecs_start"), ("grid", "rotation_angle"), ("grid", "ecs_fraction"),
        ("wavenumber", "k0_squared"), ("wavenumber", "chi"), ("rhs", "profile"),
        ("solver", "rank"),
    ]
    for section, key in required:
        if (section, key) not in values:
            raise ConfigError(f"{section}.{key}", "missing required key")

    config = ExperimentConfig(
        kind=values[("problem", "kind")],
        interior_count=values[("grid", "interior_count")],
        domain_start=values[("grid", "domain_start")],
        ecs_start=values[("grid", "ecs_start")],
        rotation_angle=values[("grid", "rotation_angle")],
        ecs_fraction=values[("grid", "ecs_fraction")],
        k0_squared=values[("wavenumber", "k0_squared")],
        chi=values[("wavenumber", "chi")],
        cp_rank=values[("wavenumber", "cp_rank")],
        rhs_profile=values[("rhs", "profile")],
        version=values[("solver", "version")],
        rank=values[("solver", "rank")],
        max_iters=values[("solver", "max_iters")],
        tol=values[("solver", "tol")],
        seed=values[("solver", "seed")],
        init=values[("solver", "init")],
        directory=values[("output", "directory")],
        csv=tuple(
            name.strip() for name in values[("output", "csv")].split(",") if name.strip()
        ),
    )
    validate(config)
    return config


def load(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return from_text(handle.read())


def validate(config: ExperimentConfig):
    if config.kind not in PROBLEM_KINDS:
        raise ConfigError("problem.kind", f"must be one of {PROBLEM_KINDS}")
    if config.interior_count < 2:
        raise ConfigError("grid.interior_count", "must be at least 2")
    if not math.isfinite(config.rotation_angle) or not 0 < config.rotation_angle < math.pi / 2:
        raise ConfigError("grid.rotation_angle", "must lie in (0, pi/2)")
    if config.ecs_fraction < 0:
        raise ConfigError("grid.ecs_fraction", "must be nonnegative")
    if config.ecs_start <= config.domain_start:
        raise ConfigError("grid.ecs_start", "must exceed domain_start")
    if config.kind == "temkin-poet" and abs(config.domain_start) > 1e-14:
        raise ConfigError("grid.domain_start", "temkin-poet domains start at 0")
    expected_chi = {
        "2d-const": ("none",),
        "3d-const": ("none",),
        "2d-var": ("gauss-well", "exp-ridge"),
        "3d-var": ("gauss-well",),
        "temkin-poet": ("exp-ridge",),
    }[config.kind]
    if config.chi not in expected_chi:
        raise ConfigError("wavenumber.chi", f"kind {config.kind} expects one of {expected_chi}")
    if config.cp_rank < 0:
        raise ConfigError("wavenumber.cp_rank", "must be nonnegative")
    if config.rhs_profile not in ("gauss", "none"):
        raise ConfigError("rhs.profile", "unknown right-hand side profile")
    if config.version not in (1, 2, 3):
        raise ConfigError("solver.version", "must be 1, 2, or 3")
    if config.rank < 1:
        raise ConfigError("solver.rank", "must be positive")
    if config.max_iters < 1:
        raise ConfigError("solver.max_iters", "must be positive")
    if config.tol < 0:
        raise ConfigError("solver.tol", "must be nonnegative")
    if config.init not in ("random", "rhs"):
        raise ConfigError("solver.init", "must be 'random' or 'rhs'")
    for name in config.csv:
        if name not in KNOWN_CSVS:
            raise ConfigError("output.csv", f"unknown csv {name!r}")
