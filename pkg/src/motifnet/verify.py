"""Embedded oracle checks run by ``motifnet verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracles
from .analysis import Graph, edge_connectivity, eigenvalues, jacobian
from .dynamics import GeneCircuit, SimConfig, euler_step, rhs, sigmoid, sigmoid_prime, steady_state
from .targets import LossConfig, TargetSpec
from .train_gd import GdConfig, adam_step, loss_and_gradient


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-3) -> float:
    # relative error, turning into an absolute 1e-7 bound (at tolerance 1e-4) for entries below ``floor``
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


def check_sigmoid() -> CheckResult:
    u = np.linspace(-30, 30, 301)
    sym = float(np.max(np.abs(sigmoid(u) + sigmoid(-u) - 1.0)))
    fd = (sigmoid(u + 1e-6) - sigmoid(u - 1e-6)) / 2e-6
    d = float(np.max(np.abs(fd - sigmoid_prime(u))))
    ok = sigmoid(0.0) == 0.5 and sym <= 1e-15 and d < 1e-8 and abs(sigmoid(math.log(9)) - 0.9) < 1e-12
    return CheckResult("sigmoid", ok, f"symmetry {sym:.1e}, derivative {d:.1e}")


def check_euler(rng) -> CheckResult:
    sim = SimConfig()
    worst = 0.0
    for _ in range(10):
        w = rng.normal(0, 2, size=(3, 3))
        y = rng.uniform(-1, 2, size=3)
        x = float(rng.uniform(0, 2))
        ref = oracles.euler_step_reference(w.tolist(), y.tolist(), x, sim.dt)
        worst = max(worst, float(np.max(np.abs(euler_step(GeneCircuit(w), y, x, sim) - ref))))
    return CheckResult("euler_step vs scalar loop", worst < 1e-14, f"max diff {worst:.1e}")


def check_fixed_point() -> CheckResult:
    y, conv, _ = steady_state(GeneCircuit.zeros(4), 0.0, SimConfig())
    eig = eigenvalues(jacobian(GeneCircuit.zeros(4), y))
    err = float(np.max(np.abs(y - 0.5)))
    eig_err = float(np.max(np.abs(eig + 1.0)))
    return CheckResult("W=0 fixed point", conv and err < 1e-6 and eig_err < 1e-12,
                       f"state err {err:.1e}, eigen err {eig_err:.1e}")


def check_gradient(rng, count: int = 20) -> CheckResult:
    sim = SimConfig()
    loss_cfg = LossConfig()
    specs = [TargetSpec.french_flag(), TargetSpec.switch()]
    worst = 0.0
    for k in range(count):
        n = int(rng.integers(2, 6))
        w = rng.normal(0, 1, size=(n, n))
        spec = specs[k % 2]
        _, grad = loss_and_gradient(GeneCircuit(w), spec, sim, loss_cfg)
        fd = oracles.central_difference(lambda v: loss_and_gradient(GeneCircuit(v), spec, sim, loss_cfg)[0], w)
        worst = max(worst, _rel_err(grad, fd))
    return CheckResult("gradient vs finite differences", worst < 1e-4, f"max rel err {worst:.1e}")


def check_jacobian(rng) -> CheckResult:
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(1, 6))
        c = GeneCircuit(rng.normal(0, 1.5, size=(n, n)))
        y = rng.uniform(-0.5, 1.5, size=n)
        fd = oracles.jacobian_fd(lambda s: rhs(c, s, 0.7), y)
        worst = max(worst, float(np.max(np.abs(jacobian(c, y) - fd))))
    return CheckResult("jacobian vs finite differences", worst < 1e-6, f"max diff {worst:.1e}")


def check_eigen(rng, count: int = 50) -> CheckResult:
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(1, 5))
        m = rng.normal(size=(n, n))
        roots = oracles.poly_roots_closed_form(oracles.charpoly(m))
        worst = max(worst, oracles.match_distance(eigenvalues(m), roots))
    return CheckResult("eigenvalues vs characteristic polynomial", worst < 1e-6, f"max diff {worst:.1e}")


def check_connectivity(rng, count: int = 100) -> CheckResult:
    bad = 0
    for _ in range(count):
        n = int(rng.integers(1, 7))
        p = float(rng.uniform(0.2, 0.9))
        edges = tuple((i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p)
        g = Graph(n, edges)
        bad += edge_connectivity(g) != oracles.edge_connectivity_bruteforce(g)
    return CheckResult("edge connectivity vs brute force", bad == 0, f"{bad}/{count} mismatches")


def check_adam() -> CheckResult:
    cfg = GdConfig(learning_rate=0.1)
    w = np.zeros(1)
    m1 = np.zeros(1)
    m2 = np.zeros(1)
    for t in range(1, 101):
        w, m1, m2 = adam_step(w, 2 * (w - 3.0), m1, m2, t, cfg)
    return CheckResult("adam on (w-3)^2", abs(w[0] - 3) < 0.5, f"w={w[0]:.4f}")


def run_checks(seed: int = 20240521) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_sigmoid(),
        check_euler(rng),
        check_fixed_point(),
        check_gradient(rng),
        check_jacobian(rng),
        check_eigen(rng),
        check_connectivity(rng),
        check_adam(),
    ]
