"""File formats: JSONL records, plot-ready CSV tables and DOT circuit graphs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .analysis import feedback_sum, node_strength
from .dynamics import GeneCircuit


def dumps_record(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def fmt(x: Any) -> str:
    """CSV cell: floats with 17 significant digits, locale independent."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def circuit_to_dot(circuit: GeneCircuit, edge_tau: float = 0.1, name: str = "circuit") -> str:
    """Directed graph of a circuit.

    Node width scales with incoming absolute weight; fill colour encodes the sign of the
    feedback sum. Edges ``j -> i`` exist for ``|W_ij| >= edge_tau`` and are drawn as
    arrows for activation and tee-heads for repression.
    """
    strength = node_strength(circuit)
    feedback = feedback_sum(circuit)
    top = float(strength.max()) if strength.size and strength.max() > 0 else 1.0
    lines = [f'digraph "{name}" {{', "  rankdir=LR;", '  node [shape=circle, style=filled, fontname="Helvetica"];']
    for i in range(circuit.n):
        width = 0.4 + 1.2 * float(strength[i]) / top
        if feedback[i] > 0:
            color = "palegreen"
        elif feedback[i] < 0:
            color = "lightblue"
        else:
            color = "lightgray"
        role = " (input)" if i == 0 else " (output)" if i == circuit.n - 1 else ""
        lines.append(
            f'  g{i} [label="g{i}{role}", width={width:.3f}, fillcolor={color}, '
            f'strength="{float(strength[i]):.3f}", feedback="{float(feedback[i]):.3f}"];'
        )
    w = circuit.weights
    for i in range(circuit.n):
        for j in range(circuit.n):
            v = float(w[i, j])
            if abs(v) < edge_tau or v == 0.0:
                continue
            if v > 0:
                style = 'color=darkgreen, arrowhead=normal, sign="activation"'
            else:
                style = 'color=red3, arrowhead=tee, sign="repression"'
            lines.append(f'  g{j} -> g{i} [label="{v:.3f}", {style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def circuit_rows(circuit: GeneCircuit) -> list[list[Any]]:
    return [[i, j, float(circuit.weights[i, j])] for i in range(circuit.n) for j in range(circuit.n)]
