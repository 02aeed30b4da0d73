"""Slow, independent reference computations used to check the fast paths."""

from __future__ import annotations

import cmath
import itertools
import math
from typing import Callable

import numpy as np

from .analysis import Graph


def euler_step_reference(weights, state, input_value: float, dt: float, clamp: bool = False) -> list[float]:
    """One Euler step written as plain scalar loops."""
    n = len(state)
    out = []
    for i in range(n):
        u = 0.0
        for j in range(n):
            u += weights[i][j] * state[j]
        phi = 1.0 / (1.0 + math.exp(-u))
        drive = input_value if (i == 0 and not clamp) else 0.0
        out.append(state[i] + dt * (phi + drive - state[i]))
    if clamp:
        out[0] = input_value
    return out


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def jacobian_fd(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=1)


def charpoly(m) -> list[float]:
    """Monic characteristic polynomial coefficients (highest degree first), Faddeev-LeVerrier."""
    a = np.asarray(m, dtype=np.float64)
    n = a.shape[0]
    coeffs = [1.0]
    mk = np.zeros_like(a)
    c = 1.0
    for k in range(1, n + 1):
        mk = a @ mk + c * np.eye(n)
        c = -float(np.trace(a @ mk)) / k
        coeffs.append(c)
    return coeffs


def _quadratic(b: complex, c: complex) -> list[complex]:
    d = cmath.sqrt(b * b - 4 * c)
    # avoid cancellation
    q = -0.5 * (b + d) if (b.conjugate() * d).real >= 0 else -0.5 * (b - d)
    if q == 0:
        return [0j, 0j]
    return [q, c / q]


def _cbrt(z: complex) -> complex:
    if z == 0:
        return 0j
    r, phi = cmath.polar(z)
    return cmath.rect(r ** (1.0 / 3.0), phi / 3.0)


def _cubic(a: complex, b: complex, c: complex) -> list[complex]:
    p = b - a * a / 3
    q = 2 * a**3 / 27 - a * b / 3 + c
    disc = cmath.sqrt((q / 2) ** 2 + (p / 3) ** 3)
    u = _cbrt(-q / 2 + disc)
    if abs(u) < 1e-300:
        u = _cbrt(-q / 2 - disc)
    v = -p / (3 * u) if abs(u) > 1e-300 else 0j
    w = complex(-0.5, math.sqrt(3) / 2)
    return [u + v - a / 3, w * u + w.conjugate() * v - a / 3, w.conjugate() * u + w * v - a / 3]


def _quartic(a: complex, b: complex, c: complex, d: complex) -> list[complex]:
    p = b - 3 * a * a / 8
    q = c - a * b / 2 + a**3 / 8
    r = d - a * c / 4 + a * a * b / 16 - 3 * a**4 / 256
    shift = -a / 4
    if abs(q) < 1e-14:
        ys = []
        for z in _quadratic(p, r):
            s = cmath.sqrt(z)
            ys += [s, -s]
        return [y + shift for y in ys]
    # resolvent cubic 8m^3 + 8p m^2 + (2p^2 - 8r) m - q^2 = 0
    m = max(_cubic(p, (2 * p * p - 8 * r) / 8, -q * q / 8), key=abs)
    s = cmath.sqrt(2 * m)
    roots = _quadratic(-s, p / 2 + m + s * q / (4 * m)) + _quadratic(s, p / 2 + m - s * q / (4 * m))
    return [y + shift for y in roots]


def _polish(coeffs: list[float], z: complex, iters: int = 4) -> complex:
    for _ in range(iters):
        f = 0j
        df = 0j
        for c in coeffs:
            df = df * z + f
            f = f * z + c
        if df == 0:
            break
        step = f / df
        if not cmath.isfinite(step):
            break
        z -= step
    return z


def poly_roots_closed_form(coeffs: list[float]) -> list[complex]:
    """Roots of a monic polynomial of degree 1 to 4 by explicit formulas plus Newton polishing."""
    deg = len(coeffs) - 1
    c = [complex(v) for v in coeffs[1:]]
    if deg == 1:
        roots = [-c[0]]
    elif deg == 2:
        roots = _quadratic(c[0], c[1])
    elif deg == 3:
        roots = _cubic(*c)
    elif deg == 4:
        roots = _quartic(*c)
    else:
        raise ValueError("closed forms cover degree 1..4 only")
    return [_polish(coeffs, z) for z in roots]


def match_distance(a, b) -> float:
    """Largest pairing error under the best one-to-one matching of two small multisets."""
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        return math.inf
    return min(max(abs(x - y) for x, y in zip(a, perm)) for perm in itertools.permutations(b)) if a else 0.0


def _connected(n: int, edges) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(i) for i in range(n)}) == 1


def edge_connectivity_bruteforce(g: Graph) -> int:
    """Smallest edge subset whose removal disconnects the graph, by exhaustive search."""
    if g.n < 2 or not _connected(g.n, g.edges):
        return 0
    edges = list(g.edges)
    for k in range(1, len(edges) + 1):
        for removed in itertools.combinations(range(len(edges)), k):
            gone = set(removed)
            if not _connected(g.n, [e for i, e in enumerate(edges) if i not in gone]):
                return k
    return len(edges)
