"""Experiment configuration: YAML loading, validation, canonical hashing.

A config fully determines an experiment (no wall-clock seeding anywhere), so
the sha256 of its canonical JSON form identifies result files for resume and
replay.  Output location and worker count are execution details and stay out
of the hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import yaml

from .families import DEFAULT_DENSITY, DEFAULT_SUPPORT_BUDGET, FAMILY_NAMES

COMMANDS = (
    "verify-wick",
    "verify-merging",
    "bound-sweep",
    "decoupling",
    "khintchine",
    "replay",
)

MAX_GRID_K = 6
MAX_GRID_D = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-10
    sample_norm: float = 1e-8
    dense_cap: int = 4096


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    grid_d: tuple[int, ...] = (1,)
    grid_k: tuple[int, ...] = (1, 2, 3)
    grid_n: tuple[int, ...] = (4, 8, 16, 32)
    grid_p: tuple[float, ...] = (2.0, 4.0, 8.0)
    families: tuple[str, ...] = FAMILY_NAMES
    samples: int = 512
    na: int = 1
    nb: int = 1
    density: float = DEFAULT_DENSITY
    support_budget: int = DEFAULT_SUPPORT_BUDGET
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: str = "results"
    replay_source: Optional[str] = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed is mandatory and must be an integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")
        if self.samples < 2:
            raise ConfigError("samples must be >= 2")
        for d in self.grid_d:
            if not 1 <= d <= MAX_GRID_D:
                raise ConfigError(f"d={d} outside 1..{MAX_GRID_D}")
        for k in self.grid_k:
            if not 1 <= k <= MAX_GRID_K:
                raise ConfigError(f"k={k} outside 1..{MAX_GRID_K}")
            if k + self.na + self.nb > 12:
                raise ConfigError("k + na + nb exceeds the partition cap of 12")
        for n in self.grid_n:
            if n < 2:
                raise ConfigError("N must be >= 2 (the bound uses log N)")
        for p in self.grid_p:
            if p < 1:
                raise ConfigError("moment order p must be >= 1")
        for fam in self.families:
            if fam not in FAMILY_NAMES:
                raise ConfigError(f"unknown family {fam!r}")
        if not (0 < self.density <= 1):
            raise ConfigError("density must lie in (0, 1]")
        if self.support_budget < 1:
            raise ConfigError("support budget must be >= 1")
        if self.command == "replay" and not self.replay_source:
            raise ConfigError("replay requires replay_source (a prior output directory)")


def _hash_payload(config: ExperimentConfig) -> dict:
    # everything that affects numbers; not where they are written
    payload = asdict(config)
    payload.pop("output")
    payload.pop("replay_source")
    return payload


def config_hash(config: ExperimentConfig) -> str:
    text = json.dumps(_hash_payload(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = dict(doc)
    tol = doc.pop("tolerances", {}) or {}
    known = {f for f in ExperimentConfig.__dataclass_fields__ if f != "tolerances"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for grid_key in ("grid_d", "grid_k", "grid_n"):
        if grid_key in doc:
            doc[grid_key] = tuple(int(v) for v in _as_list(doc[grid_key]))
    if "grid_p" in doc:
        doc["grid_p"] = tuple(float(v) for v in _as_list(doc["grid_p"]))
    if "families" in doc:
        doc["families"] = tuple(str(v) for v in _as_list(doc["families"]))
    return ExperimentConfig(tolerances=Tolerances(**tol), **doc)


def _as_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def load_config(path: str, seed_override: Optional[int] = None,
                output_override: Optional[str] = None) -> ExperimentConfig:
    """Read a YAML config file and apply CLI overrides.

    Accepted YAML layout (grid keys may be scalars or lists):

        command: bound-sweep
        seed: 20260825
        grid: {d: 1, k: [1, 2, 3], N: [4, 8, 16, 32], p: [2, 4, 8]}
        families: [dense-gaussian, rank-one]
        samples: 512
        tolerances: {norm: 1.0e-10, sample_norm: 1.0e-8}
        output: results
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    doc = dict(raw)
    grid = doc.pop("grid", None)
    if grid:
        if not isinstance(grid, dict):
            raise ConfigError("grid must be a mapping with keys d, k, N, p")
        aliases = {"d": "grid_d", "k": "grid_k", "n": "grid_n", "p": "grid_p"}
        for key, value in grid.items():
            target = aliases.get(str(key).lower())
            if target is None:
                raise ConfigError(f"unknown grid key {key!r}")
            doc[target] = value
    if seed_override is not None:
        doc["seed"] = seed_override
    if output_override is not None:
        doc["output"] = output_override
    if "seed" not in doc:
        raise ConfigError("seed is mandatory (deterministic runs only)")
    return config_from_dict(doc)
