"""Post-hoc analysis of learned circuits.

Linear stability at the simulated fixed point, weight-sign distributions, per-gene
strength and feedback sums, undirected edge connectivity, and how closely the
unsupervised genes track the target (team learning).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dynamics import GeneCircuit, InputMode, SimConfig, settle, sigmoid_prime, steady_state
from .targets import TargetSpec, sample_grid, target_values


class NoConvergence(ArithmeticError):
    pass


class NotConverged(ArithmeticError):
    """The circuit did not settle at the reference input, so there is no fixed point to linearize."""


@dataclass(frozen=True)
class StabilityReport:
    fixed_point: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray  # complex, sorted by (real desc, imag desc)
    max_real_part: float
    stable: bool
    reference_input: float = math.nan

    def to_dict(self) -> dict[str, Any]:
        return {
            "reference_input": self.reference_input,
            "fixed_point": self.fixed_point.tolist(),
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "max_real_part": self.max_real_part,
            "stable": self.stable,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StabilityReport":
        eig = np.array([complex(re, im) for re, im in d["eigenvalues"]])
        return cls(np.array(d["fixed_point"]), np.array(d["jacobian"]), eig,
                   float(d["max_real_part"]), bool(d["stable"]), float(d.get("reference_input", math.nan)))


def jacobian(circuit: GeneCircuit, state, mode: InputMode = InputMode.DRIVE_FIRST_NODE) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (circuit.n,):
        raise ValueError(f"state must have length {circuit.n}")
    w = circuit.weights
    j = sigmoid_prime(w @ state)[:, None] * w - np.eye(circuit.n)
    if InputMode(mode) is InputMode.CLAMP_FIRST_NODE:
        # the clamped gene is pinned; it only relaxes back to its imposed value
        j[0, :] = 0.0
        j[0, 0] = -1.0
    return j


def eigenvalues(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        vals = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    vals = np.asarray(vals, dtype=np.complex128)
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def stability_at(circuit: GeneCircuit, state, mode: InputMode = InputMode.DRIVE_FIRST_NODE,
                 reference_input: float = math.nan) -> StabilityReport:
    state = np.asarray(state, dtype=np.float64)
    jac = jacobian(circuit, state, mode)
    eig = eigenvalues(jac)
    top = float(eig.real.max())
    return StabilityReport(state.copy(), jac, eig, top, top < 0.0, reference_input)


def stability_report(circuit: GeneCircuit, reference_input: float, sim: SimConfig) -> StabilityReport:
    state, converged, _ = steady_state(circuit, reference_input, sim)
    if not converged:
        raise NotConverged(f"no steady state within {sim.max_steps} steps at input {reference_input:g}")
    return stability_at(circuit, state, sim.input_mode, reference_input)


def perturb_and_return(circuit: GeneCircuit, fixed_point, input_value: float, sim: SimConfig,
                       rng: np.random.Generator, eps: float = 1e-3, tol: float = 1e-4,
                       horizon: float = 400.0) -> bool:
    """Kick the fixed point by uniform noise of size ``eps`` and check the flow returns within ``tol``."""
    fixed_point = np.asarray(fixed_point, dtype=np.float64)
    start = fixed_point + rng.uniform(-eps, eps, size=fixed_point.shape)
    if sim.input_mode is InputMode.CLAMP_FIRST_NODE:
        start[0] = input_value
    long_sim = SimConfig(dt=sim.dt, max_steps=max(sim.max_steps, int(math.ceil(horizon / sim.dt))),
                         convergence_tol=min(sim.convergence_tol, 1e-8), input_mode=sim.input_mode,
                         initial_state=sim.initial_state, train_steps=sim.train_steps)
    y, _, finite, _ = settle(circuit.weights, np.array([float(input_value)]), long_sim, start=start[None, :])
    return bool(finite[0]) and float(np.max(np.abs(y[0] - fixed_point))) < tol


def weight_sign_histogram(circuit: GeneCircuit, bin_width: float = 0.5,
                          half_range: float | None = None) -> dict[str, Any]:
    """Counts of weights in bins of ``bin_width`` centred on multiples of it, symmetric about 0.

    Pass a common ``half_range`` to make histograms of different circuits share bins.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    w = circuit.weights.ravel()
    reach = float(np.abs(w).max()) if half_range is None else float(half_range)
    k = int(math.ceil(reach / bin_width))
    edges = (np.arange(-k, k + 2) - 0.5) * bin_width
    counts, _ = np.histogram(np.clip(w, edges[0], edges[-1]), bins=edges)
    nonzero = w[w != 0]
    return {
        "edges": edges.tolist(),
        "counts": counts.tolist(),
        "negative_fraction": float(np.mean(nonzero < 0)) if nonzero.size else 0.0,
        "mean": float(w.mean()),
    }


def node_strength(circuit: GeneCircuit) -> np.ndarray:
    """Total incoming absolute weight of each gene (row sums of ``|W|``)."""
    return np.abs(circuit.weights).sum(axis=1)


def feedback_sum(circuit: GeneCircuit) -> np.ndarray:
    return circuit.weights.sum(axis=1)


def total_strength(circuit: GeneCircuit) -> float:
    return float(np.abs(circuit.weights).sum())


def signed_strength(circuit: GeneCircuit) -> float:
    return float(circuit.weights.sum())


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on ``range(n)``; edges stored as sorted ``(i, j)`` with ``i < j``."""

    n: int
    edges: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        norm = sorted({(min(a, b), max(a, b)) for a, b in self.edges if a != b})
        for a, b in norm:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a}, {b}) outside node range")
        object.__setattr__(self, "edges", tuple(norm))

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj


def binarize(circuit: GeneCircuit, edge_tau: float = 0.1) -> Graph:
    if edge_tau < 0:
        raise ValueError("edge_tau must be >= 0")
    mag = np.abs(circuit.weights)
    both = np.maximum(mag, mag.T)
    present = both >= edge_tau
    if edge_tau == 0:
        present &= both > 0
    i, j = np.nonzero(np.triu(present, k=1))
    return Graph(circuit.n, tuple(zip(i.tolist(), j.tolist())))


def _max_flow_unit(adj: list[list[int]], s: int, t: int) -> int:
    """Edmonds-Karp on an undirected unit-capacity graph (each edge is two opposite arcs)."""
    n = len(adj)
    cap = [dict.fromkeys(nbrs, 1) for nbrs in adj]
    flow = 0
    while True:
        parent = [-1] * n
        parent[s] = s
        queue = deque([s])
        while queue and parent[t] < 0:
            u = queue.popleft()
            for v, c in cap[u].items():
                if c > 0 and parent[v] < 0:
                    parent[v] = u
                    queue.append(v)
        if parent[t] < 0:
            return flow
        v = t
        while v != s:
            u = parent[v]
            cap[u][v] -= 1
            cap[v][u] += 1
            v = u
        flow += 1


def edge_connectivity(g: Graph) -> int:
    """Minimum number of edges whose removal disconnects ``g``; 0 if already disconnected."""
    if g.n < 2:
        return 0
    adj = g.adjacency()
    best = min(len(a) for a in adj)
    for t in range(1, g.n):
        if best == 0:
            break
        best = min(best, _max_flow_unit(adj, 0, t))
    return best


@dataclass(frozen=True)
class TeamReport:
    per_node: list[dict[str, Any]]
    classification: str
    mean_unsupervised_conformity: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_node": self.per_node,
            "classification": self.classification,
            "mean_unsupervised_conformity": self.mean_unsupervised_conformity,
        }


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0.0 or not math.isfinite(den):
        return 0.0
    return float(np.clip((a @ b) / den, -1.0, 1.0))


def team_metrics(curves, spec: TargetSpec, homogeneous_above: float = 0.3,
                 heterogeneous_below: float = -0.3) -> TeamReport:
    """Per-gene agreement with the target; only the last gene is trained against it.

    ``curves`` is the ``(grid_points, n)`` steady-state response over ``sample_grid(spec)``.
    """
    curves = np.asarray(curves, dtype=np.float64)
    grid = sample_grid(spec)
    if curves.ndim != 2 or curves.shape[0] != grid.size:
        raise ValueError("curves must have one row per grid point")
    target = target_values(spec, grid)
    band = spec.on_region(grid)
    n = curves.shape[1]
    per_node = []
    for i in range(n):
        col = curves[:, i]
        per_node.append({
            "node": i,
            "conformity": _pearson(col, target),
            "passband_amplitude": float(col[band].max()) if band.any() else math.nan,
            "supervised": i == n - 1,
        })
    others = [p["conformity"] for p in per_node if not p["supervised"]]
    mean_c = float(np.mean(others)) if others else 0.0
    if mean_c > homogeneous_above:
        label = "homogeneous"
    elif mean_c < heterogeneous_below:
        label = "heterogeneous"
    else:
        label = "mixed"
    return TeamReport(per_node, label, mean_c)
