"""Target input-output functions, sampling grids and the training objective."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np


class LengthMismatch(ValueError):
    pass


class TargetKind(str, enum.Enum):
    FRENCH_FLAG = "FrenchFlag"
    SWITCH = "Switch"


@dataclass(frozen=True)
class TargetSpec:
    """French-Flag band ``lo < x < hi`` or Switch step ``x > threshold`` sampled on a uniform grid."""

    kind: TargetKind = TargetKind.FRENCH_FLAG
    lo: float = 0.5
    hi: float = 1.5
    threshold: float = 1.0
    grid_min: float = 0.0
    grid_max: float = 2.0
    grid_points: int = 60

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TargetKind(self.kind))
        if self.grid_points < 8:
            raise ValueError("grid_points must be >= 8")
        if not self.grid_min < self.grid_max:
            raise ValueError("grid_min must be below grid_max")
        if self.kind is TargetKind.FRENCH_FLAG:
            if not (self.grid_min < self.lo < self.hi < self.grid_max):
                raise ValueError("French-Flag band must satisfy grid_min < lo < hi < grid_max")
        elif not (self.grid_min < self.threshold < self.grid_max):
            raise ValueError("Switch threshold must lie strictly inside the grid range")

    @classmethod
    def french_flag(cls, lo: float = 0.5, hi: float = 1.5, **grid) -> "TargetSpec":
        return cls(TargetKind.FRENCH_FLAG, lo=lo, hi=hi, **grid)

    @classmethod
    def switch(cls, threshold: float = 1.0, **grid) -> "TargetSpec":
        return cls(TargetKind.SWITCH, threshold=threshold, **grid)

    @property
    def label(self) -> str:
        if self.kind is TargetKind.FRENCH_FLAG:
            return f"FrenchFlag({self.lo:g},{self.hi:g})"
        return f"Switch({self.threshold:g})"

    def on_region(self, x: np.ndarray) -> np.ndarray:
        """Mask of inputs where the target is 1 (the pass band)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind is TargetKind.FRENCH_FLAG:
            return (x > self.lo) & (x < self.hi)
        return x > self.threshold

    def to_dict(self) -> dict[str, Any]:
        d = {"kind": self.kind.value, "grid_min": self.grid_min, "grid_max": self.grid_max,
             "grid_points": self.grid_points}
        if self.kind is TargetKind.FRENCH_FLAG:
            d.update(lo=self.lo, hi=self.hi)
        else:
            d.update(threshold=self.threshold)
        return d


@dataclass(frozen=True)
class LossConfig:
    l1_lambda: float = 0.0
    success_mse: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 <= self.l1_lambda <= 1.0:
            raise ValueError("l1_lambda must lie in [0, 1]")
        if not 0.0 < self.success_mse < 0.25:
            raise ValueError("success_mse must lie in (0, 0.25)")


def eval_target(spec: TargetSpec, x: float) -> float:
    return 1.0 if bool(spec.on_region(np.float64(x))) else 0.0


def sample_grid(spec: TargetSpec) -> np.ndarray:
    return np.linspace(spec.grid_min, spec.grid_max, spec.grid_points)


def target_values(spec: TargetSpec, grid: np.ndarray | None = None) -> np.ndarray:
    grid = sample_grid(spec) if grid is None else grid
    return spec.on_region(grid).astype(np.float64)


def mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise LengthMismatch(f"lengths differ: {pred.size} vs {target.size}")
    if pred.size == 0:
        raise LengthMismatch("empty vectors")
    return float(np.mean((pred - target) ** 2))


def l1_norm(weights: np.ndarray) -> float:
    return float(np.sum(np.abs(weights)))


def regularized_cost(circuit, pred, target, cfg: LossConfig) -> float:
    err = mse(pred, target)
    if cfg.l1_lambda == 0.0:
        return err
    return err + cfg.l1_lambda * l1_norm(circuit.weights)


def is_success(output_curve, spec: TargetSpec, cfg: LossConfig, valid: bool = True) -> bool:
    out = np.asarray(output_curve, dtype=np.float64)
    if not valid or not np.all(np.isfinite(out)):
        return False
    err = mse(out, target_values(spec))
    return math.isfinite(err) and err <= cfg.success_mse
