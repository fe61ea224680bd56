"""Experiment configuration: YAML round-trip, validation and hashing.

A configuration file declares the two potentials by registry name plus
parameters, the integration settings, the eps grid, the initial-law
choice and the statistics settings.  The sha256 of the canonical dump
is embedded in every emitted CSV so artifacts are traceable to their
configuration.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import yaml

from .potentials import PotentialSpec, make_potential

__all__ = ["ConfigError", "PotentialConfig", "SdeSettings",
           "ExperimentConfig", "load_config", "save_config", "config_hash"]


class ConfigError(ValueError):
    """Unparseable or inconsistent experiment configuration."""


@dataclass(frozen=True)
class PotentialConfig:
    kind: str
    params: dict = field(default_factory=dict)

    def build(self) -> PotentialSpec:
        try:
            return make_potential(self.kind, **self.params)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"potential {self.kind!r}: {exc}") from exc


@dataclass(frozen=True)
class SdeSettings:
    eps: float = 1.0
    t_end: float = 1.0
    dt: float = 1e-3
    scheme: str = "euler-maruyama"
    n_paths: int = 10_000
    record_stride: int = 1
    singularity_guard: str = "shrink-step"
    guard_distance: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    phi1: PotentialConfig = field(
        default_factory=lambda: PotentialConfig("quadratic", {"dim": 1}))
    phi2: PotentialConfig = field(
        default_factory=lambda: PotentialConfig("quadratic", {"dim": 1}))
    sde: SdeSettings = field(default_factory=SdeSettings)
    eps_grid: tuple = (0.4, 0.2, 0.1)
    times: tuple = (0.5, 1.0)
    initial: str = "stationary"
    n_permutations: int = 200
    p_threshold: float = 0.01
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps_grid"] = list(self.eps_grid)
        d["times"] = list(self.times)
        return d


def _from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    known = {"phi1", "phi2", "sde", "eps_grid", "times", "initial",
             "n_permutations", "p_threshold", "seed", "workers", "out_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kwargs = {}
    for name in ("phi1", "phi2"):
        if name in data:
            spec = data[name]
            if not isinstance(spec, dict) or "kind" not in spec:
                raise ConfigError(f"{name} must be a mapping with a 'kind'")
            kwargs[name] = PotentialConfig(
                kind=spec["kind"], params=dict(spec.get("params", {})))
    if "sde" in data:
        try:
            kwargs["sde"] = SdeSettings(**data["sde"])
        except TypeError as exc:
            raise ConfigError(f"sde settings: {exc}") from exc
    for name in ("eps_grid", "times"):
        if name in data:
            kwargs[name] = tuple(float(x) for x in data[name])
    for name in ("initial", "n_permutations", "p_threshold", "seed",
                 "workers", "out_dir"):
        if name in data:
            kwargs[name] = data[name]
    cfg = ExperimentConfig(**kwargs)
    # fail early on unresolvable potentials
    cfg.phi1.build()
    cfg.phi2.build()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" \
            if mark else ""
        raise ConfigError(f"cannot parse {path}{where}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return _from_dict(data or {})


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = yaml.safe_dump(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
