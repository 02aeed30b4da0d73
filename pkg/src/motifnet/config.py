"""Experiment configuration: one JSON document with a section per module.

Example::

    {"n": 4,
     "target": {"kind": "FrenchFlag", "lo": 0.5, "hi": 1.5},
     "gd": {"learning_rate": 0.05, "rng_seed": 7},
     "sweep": {"sizes": [4, 8, 12], "trials_per_size": 10}}

Overrides use dotted paths, e.g. ``gd.rng_seed=3`` or ``sweep.sizes=[3,4]``.
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .dynamics import SimConfig
from .experiments import DEFAULT_LAMBDAS, AnalysisConfig, SweepConfig
from .targets import LossConfig, TargetSpec
from .train_evo import EvoConfig
from .train_gd import GdConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AblationConfig:
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    size: int = 7
    trials: int = 30

    def __post_init__(self) -> None:
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 3
    sim: SimConfig = field(default_factory=SimConfig)
    target: TargetSpec = field(default_factory=TargetSpec)
    loss: LossConfig = field(default_factory=LossConfig)
    gd: GdConfig = field(default_factory=GdConfig)
    evo: EvoConfig = field(default_factory=EvoConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    sweep: dict[str, Any] = field(default_factory=dict)
    ablation: AblationConfig = field(default_factory=AblationConfig)

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(sim=self.sim, target=self.target, loss=self.loss, gd=self.gd, evo=self.evo,
                           analysis=self.analysis, **self.sweep)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "n": self.n,
            "sim": asdict(self.sim),
            "target": self.target.to_dict(),
            "loss": asdict(self.loss),
            "gd": asdict(self.gd),
            "evo": asdict(self.evo),
            "analysis": asdict(self.analysis),
            "sweep": dict(self.sweep),
            "ablation": asdict(self.ablation),
        }
        d["sim"]["input_mode"] = self.sim.input_mode.value
        return json.loads(json.dumps(d, default=_enum_value))


_SECTIONS = {
    "sim": SimConfig,
    "target": TargetSpec,
    "loss": LossConfig,
    "gd": GdConfig,
    "evo": EvoConfig,
    "analysis": AnalysisConfig,
    "ablation": AblationConfig,
}
_SWEEP_KEYS = {"sizes", "trials_per_size", "trainer", "base_seed", "regularization"}


def _enum_value(obj):
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not serializable: {obj!r}")


def _build(cls, section: str, data: Any):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section!r} section: {exc}") from exc


def from_dict(data: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"n", "sweep", *_SECTIONS}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    kw: dict[str, Any] = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for name, cls in _SECTIONS.items():
            if name in data:
                kw[name] = _build(cls, name, data[name])
    if "n" in data:
        if not isinstance(data["n"], int) or data["n"] < 2:
            raise ConfigError("n must be an integer >= 2")
        kw["n"] = data["n"]
    sweep = data.get("sweep", {})
    if not isinstance(sweep, dict) or set(sweep) - _SWEEP_KEYS:
        raise ConfigError(f"sweep section accepts only: {', '.join(sorted(_SWEEP_KEYS))}")
    kw["sweep"] = dict(sweep)
    cfg = ExperimentConfig(**kw)
    try:
        cfg.sweep_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'sweep' section: {exc}") from exc
    return cfg


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``a.b.c=value`` assignments; values parse as JSON, falling back to plain strings."""
    data = copy.deepcopy(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r}: {p!r} is not a section")
        node[parts[-1]] = value
    return data


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(apply_overrides(data, overrides or []))


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, gd=replace(cfg.gd, rng_seed=seed), evo=replace(cfg.evo, rng_seed=seed))
