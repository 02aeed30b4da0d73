"""Gene-circuit state model and explicit Euler integration to steady state.

A circuit of ``n`` genes evolves as

    dy_i/dt = sigmoid(sum_j W_ij y_j) + I_i - y_i

where node 0 receives the external input ``x`` and node ``n - 1`` is read out
as the circuit's output.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import expit


class NonFiniteState(ArithmeticError):
    """Integration produced a NaN or infinite concentration."""


class InputMode(str, enum.Enum):
    DRIVE_FIRST_NODE = "DriveFirstNode"
    CLAMP_FIRST_NODE = "ClampFirstNode"


@dataclass(frozen=True, eq=False)
class GeneCircuit:
    """Immutable ``n x n`` weight matrix; ``weights[i, j]`` is the effect of gene j on gene i."""

    weights: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError(f"weights must be a non-empty square matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "GeneCircuit":
        return cls(np.zeros((n, n)))

    def with_weights(self, weights: np.ndarray) -> "GeneCircuit":
        return GeneCircuit(weights, self.meta)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GeneCircuit):
            return NotImplemented
        return self.weights.shape == other.weights.shape and bool(
            np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash(self.weights.tobytes())

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "weights": self.weights.tolist(), "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GeneCircuit":
        try:
            n = int(data["n"])
            weights = np.asarray(data["weights"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed circuit record: {exc}") from exc
        if weights.shape != (n, n):
            raise ValueError(f"weights shape {weights.shape} does not match n={n}")
        return cls(weights, data.get("meta") or {})


def save_circuit(circuit: GeneCircuit, path: str | Path) -> None:
    # json emits repr() floats, which round-trip doubles exactly
    Path(path).write_text(json.dumps(circuit.to_dict(), indent=2) + "\n")


def load_circuit(path: str | Path) -> GeneCircuit:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return GeneCircuit.from_dict(data)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.2
    max_steps: int = 250
    convergence_tol: float = 1e-6
    input_mode: InputMode = InputMode.DRIVE_FIRST_NODE
    initial_state: float = 0.0
    # unroll depth when differentiating; matches max_steps so training sees the evaluated horizon
    train_steps: int = 250

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_mode", InputMode(self.input_mode))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be a positive finite number")
        if self.max_steps < 1 or self.train_steps < 1:
            raise ValueError("max_steps and train_steps must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")
        if not math.isfinite(self.initial_state):
            raise ValueError("initial_state must be finite")
        if self.dt * self.max_steps < 10:
            warnings.warn(
                f"dt * max_steps = {self.dt * self.max_steps:g} time units may be too short to settle",
                RuntimeWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (steps + 1, n)
    converged: bool
    steps_taken: int


def sigmoid(u):
    """Logistic function, stable for large ``|u|``. Accepts scalars or arrays."""
    u = np.asarray(u, dtype=np.float64)
    e = np.exp(-np.abs(u))
    out = np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def activation(u: np.ndarray) -> np.ndarray:
    """Vectorized logistic used by every integrator; single patch point for fault injection."""
    return expit(u)


def sigmoid_prime(u):
    s = sigmoid(u)
    return s * (1.0 - s)


def _rhs(weights: np.ndarray, states: np.ndarray, inputs: np.ndarray, mode: InputMode) -> np.ndarray:
    """Right-hand side for a stack of states ``(..., m, n)`` with per-row inputs ``(m,)``."""
    drive = activation(states @ np.swapaxes(weights, -1, -2)) - states
    if mode is InputMode.DRIVE_FIRST_NODE:
        drive[..., 0] += inputs
    return drive


def rhs(circuit: GeneCircuit, state: np.ndarray, input_value: float,
        mode: InputMode = InputMode.DRIVE_FIRST_NODE) -> np.ndarray:
    """dy/dt at ``state``; in clamp mode node 0 carries no input term."""
    state = np.asarray(state, dtype=np.float64)
    return _rhs(circuit.weights, state[None, :], np.array([input_value]), InputMode(mode))[0]


def _step(weights: np.ndarray, states: np.ndarray, inputs: np.ndarray, config: SimConfig) -> np.ndarray:
    new = states + config.dt * _rhs(weights, states, inputs, config.input_mode)
    if config.input_mode is InputMode.CLAMP_FIRST_NODE:
        new[..., 0] = inputs
    return new


def euler_step(circuit: GeneCircuit, state: np.ndarray, input_value: float, config: SimConfig) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (circuit.n,):
        raise ValueError(f"state must have length {circuit.n}")
    with np.errstate(over="ignore", invalid="ignore"):
        new = _step(circuit.weights, state[None, :], np.array([float(input_value)]), config)[0]
    if not np.all(np.isfinite(new)):
        raise NonFiniteState("Euler step produced a non-finite state")
    return new


def initial_states(n: int, inputs: np.ndarray, config: SimConfig) -> np.ndarray:
    y = np.full((len(inputs), n), config.initial_state, dtype=np.float64)
    if config.input_mode is InputMode.CLAMP_FIRST_NODE:
        y[:, 0] = inputs
    return y


def settle(weights: np.ndarray, inputs: np.ndarray, config: SimConfig,
           start: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Integrate every row to steady state independently.

    ``weights`` is ``(n, n)`` or a population stack ``(p, n, n)``; ``inputs`` is ``(m,)``.
    A row stops updating once its per-step change divided by ``dt`` drops below
    ``convergence_tol``; the state returned for it is the one at which that held.
    Returns ``(states, converged, finite, steps)`` with states ``(..., m, n)``.
    """
    weights = np.asarray(weights, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    n = weights.shape[-1]
    lead = weights.shape[:-2]
    if start is None:
        y = np.broadcast_to(initial_states(n, inputs, config), lead + (len(inputs), n)).copy()
    else:
        y = np.broadcast_to(np.asarray(start, dtype=np.float64), lead + (len(inputs), n)).copy()
    row_shape = y.shape[:-1]
    active = np.ones(row_shape, dtype=bool)
    converged = np.zeros(row_shape, dtype=bool)
    finite = np.ones(row_shape, dtype=bool)
    steps = np.zeros(row_shape, dtype=np.int64)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.max_steps):
            new = _step(weights, y, inputs, config)
            change = np.max(np.abs(new - y), axis=-1) / config.dt
            bad = ~np.all(np.isfinite(new), axis=-1) & active
            done = (change < config.convergence_tol) & active & ~bad
            converged |= done
            finite &= ~bad
            active &= ~(done | bad)
            if not active.any():
                break
            y = np.where(active[..., None], new, y)
            steps += active
    return y, converged, finite, steps


def steady_state(circuit: GeneCircuit, input_value: float, config: SimConfig) -> tuple[np.ndarray, bool, int]:
    y, conv, fin, steps = settle(circuit.weights, np.array([float(input_value)]), config)
    if not fin[0]:
        raise NonFiniteState(f"integration diverged at input {input_value!r}")
    return y[0], bool(conv[0]), int(steps[0])


def simulate(circuit: GeneCircuit, input_value: float, config: SimConfig,
             start: np.ndarray | None = None) -> Trajectory:
    """Record every Euler state from ``start`` (default: uniform initial state) until settling."""
    inputs = np.array([float(input_value)])
    y = initial_states(circuit.n, inputs, config)[0] if start is None else np.array(start, dtype=np.float64)
    states = [y.copy()]
    converged = False
    for _ in range(config.max_steps):
        new = euler_step(circuit, y, input_value, config)
        if np.max(np.abs(new - y)) / config.dt < config.convergence_tol:
            converged = True
            break
        y = new
        states.append(y.copy())
    return Trajectory(np.array(states), converged, len(states) - 1)


@dataclass(frozen=True)
class ResponseCurve:
    grid: np.ndarray
    states: np.ndarray  # (len(grid), n)
    converged: np.ndarray
    valid: bool

    @property
    def output(self) -> np.ndarray:
        return self.states[:, -1]


def response_curve(circuit: GeneCircuit, grid, config: SimConfig) -> ResponseCurve:
    """Steady state at every grid input; a single divergent row invalidates the curve."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    y, conv, fin, _ = settle(circuit.weights, grid, config)
    return ResponseCurve(grid, y, conv, bool(fin.all()))
