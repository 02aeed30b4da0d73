"""Repeated-trial sweeps: learnability versus circuit size, L1 ablation, weight-sign shift."""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from . import analysis
from .dynamics import GeneCircuit, NonFiniteState, SimConfig, response_curve
from .io import dumps_record
from .targets import LossConfig, TargetSpec, is_success, mse, sample_grid, target_values
from .train_evo import EvoConfig, evolve
from .train_gd import GdConfig, Trainer, TrainResult, prune, train_gd

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(base: int, size: int, trial: int) -> int:
    """Stable 64-bit seed for trial ``trial`` at circuit size ``size``."""
    h = _splitmix64(base & _MASK64)
    h = _splitmix64(h ^ (size & _MASK64))
    return _splitmix64(h ^ (trial & _MASK64))


class Regularization(str, enum.Enum):
    NONE = "None"
    L1 = "L1"
    L1_PRUNED = "L1Pruned"


@dataclass(frozen=True)
class AnalysisConfig:
    reference_input: float = 1.0
    edge_tau: float = 0.1
    prune_tau: float = 0.1
    bin_width: float = 0.5
    # lambda applied when regularization is L1 or L1Pruned
    l1_lambda: float = 2e-2
    # trials with mse <= near_factor * success_mse count as near-successful in the sign study
    near_factor: float = 2.0


@dataclass(frozen=True)
class SweepConfig:
    sizes: tuple[int, ...] = tuple(range(3, 21))
    trials_per_size: int = 100
    trainer: Trainer = Trainer.GRADIENT_DESCENT
    base_seed: int = 0
    regularization: Regularization = Regularization.NONE
    sim: SimConfig = field(default_factory=SimConfig)
    target: TargetSpec = field(default_factory=TargetSpec)
    loss: LossConfig = field(default_factory=LossConfig)
    gd: GdConfig = field(default_factory=GdConfig)
    evo: EvoConfig = field(default_factory=EvoConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "trainer", Trainer(self.trainer))
        object.__setattr__(self, "regularization", Regularization(self.regularization))
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly ascending")
        if self.sizes[0] < 2:
            raise ValueError("sizes must be >= 2")
        if self.trials_per_size < 1:
            raise ValueError("trials_per_size must be >= 1")

    @classmethod
    def desk_scale(cls, **kw) -> "SweepConfig":
        return cls(**{"sizes": (4, 8, 12, 16, 18), "trials_per_size": 30, **kw})

    def effective_loss(self) -> LossConfig:
        if self.regularization is Regularization.NONE:
            return replace(self.loss, l1_lambda=0.0)
        return replace(self.loss, l1_lambda=self.analysis.l1_lambda)


def train_one(size: int, seed: int, cfg: SweepConfig, loss: LossConfig | None = None) -> TrainResult:
    loss = cfg.effective_loss() if loss is None else loss
    if cfg.trainer is Trainer.EVOLUTIONARY:
        return evolve(size, cfg.target, cfg.sim, replace(cfg.evo, rng_seed=seed), loss)
    gd = replace(cfg.gd, rng_seed=seed)
    if cfg.trainer is Trainer.HYBRID_MUTATED_GD and gd.mutation_rate == 0:
        gd = replace(gd, mutation_rate=0.5 / (size * size))
    elif cfg.trainer is Trainer.GRADIENT_DESCENT:
        gd = replace(gd, mutation_rate=0.0)
    return train_gd(size, cfg.target, cfg.sim, gd, loss)


def analyze_circuit(circuit: GeneCircuit, cfg: SweepConfig, seed: int) -> dict[str, Any]:
    """Every post-hoc analysis of one circuit; failures are recorded, never raised."""
    a = cfg.analysis
    rec: dict[str, Any] = {"errors": []}
    rec["histogram"] = analysis.weight_sign_histogram(circuit, a.bin_width)
    rec["node_strength"] = analysis.node_strength(circuit).tolist()
    rec["feedback_sum"] = analysis.feedback_sum(circuit).tolist()
    rec["total_strength"] = analysis.total_strength(circuit)
    rec["signed_strength"] = analysis.signed_strength(circuit)
    rec["edge_connectivity"] = analysis.edge_connectivity(analysis.binarize(circuit, a.edge_tau))
    rec["stability"] = None
    rec["perturb_return"] = None
    try:
        report = analysis.stability_report(circuit, a.reference_input, cfg.sim)
        rec["stability"] = report.to_dict()
        rng = np.random.default_rng(seed ^ 0x5DEECE66D)
        rec["perturb_return"] = analysis.perturb_and_return(
            circuit, report.fixed_point, a.reference_input, cfg.sim, rng)
    except (analysis.NotConverged, analysis.NoConvergence, NonFiniteState) as exc:
        rec["errors"].append(f"stability: {exc}")
    rec["team"] = None
    curve = response_curve(circuit, sample_grid(cfg.target), cfg.sim)
    if curve.valid:
        rec["team"] = analysis.team_metrics(curve.states, cfg.target).to_dict()
    else:
        rec["errors"].append("team: response curve diverged")
    return rec


def run_trial(size: int, trial: int, cfg: SweepConfig, loss: LossConfig | None = None) -> dict[str, Any]:
    """Train and fully analyze one seeded trial. ``wall_ms`` is the only non-deterministic key."""
    seed = trial_seed(cfg.base_seed, size, trial)
    loss = cfg.effective_loss() if loss is None else loss
    rec: dict[str, Any] = {
        "size": size,
        "trial": trial,
        "seed": seed,
        "trainer": cfg.trainer.value,
        "regularization": cfg.regularization.value,
        "l1_lambda": loss.l1_lambda,
        "success_mse": loss.success_mse,
    }
    try:
        result = train_one(size, seed, cfg, loss)
    except (ValueError, ArithmeticError) as exc:
        rec.update(success=False, mse=None, result=None, stability=None, errors=[f"train: {exc}"], wall_ms=0)
        return rec
    circuit = result.circuit
    success, err = result.success, result.final_mse
    if cfg.regularization is Regularization.L1_PRUNED:
        rec["pre_prune"] = {"success": success, "mse": _finite_or_none(err)}
        circuit = prune(circuit, cfg.analysis.prune_tau)
        success, err = _score(circuit, cfg.target, cfg.sim, loss)
        result = replace(result, circuit=circuit, success=success, final_mse=err)
    rec["success"] = success
    rec["mse"] = _finite_or_none(err)
    rec["result"] = result.to_dict(include_timing=False)
    rec["result"]["final_mse"] = _finite_or_none(result.final_mse)
    rec.update(analyze_circuit(circuit, cfg, seed))
    rec["wall_ms"] = result.wall_ms
    return rec


def _finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _score(circuit: GeneCircuit, spec: TargetSpec, sim: SimConfig, loss: LossConfig) -> tuple[bool, float]:
    curve = response_curve(circuit, sample_grid(spec), sim)
    if not curve.valid:
        return False, math.inf
    return is_success(curve.output, spec, loss, True), mse(curve.output, target_values(spec))


def reverify(record: dict[str, Any], cfg: SweepConfig) -> bool:
    """Recompute the success flag from the stored circuit."""
    if record.get("result") is None:
        return False
    circuit = GeneCircuit.from_dict(record["result"]["circuit"])
    loss = replace(cfg.loss, l1_lambda=record.get("l1_lambda", 0.0))
    return _score(circuit, cfg.target, cfg.sim, loss)[0]


# ---------------------------------------------------------------------------
# execution


def _run_task(args):
    size, trial, cfg, loss = args
    return run_trial(size, trial, cfg, loss)


def run_trials(tasks: list[tuple[int, int]], cfg: SweepConfig, workers: int = 1,
               loss: LossConfig | None = None,
               on_record: Callable[[dict[str, Any]], None] | None = None) -> list[dict[str, Any]]:
    """Run ``(size, trial)`` tasks; records are delivered to ``on_record`` in task order."""
    payload = [(s, k, cfg, loss) for s, k in tasks]
    out: list[dict[str, Any] | None] = [None] * len(tasks)
    emitted = 0

    def flush():
        nonlocal emitted
        while emitted < len(out) and out[emitted] is not None:
            if on_record is not None:
                on_record(out[emitted])
            emitted += 1

    if workers <= 1:
        for i, p in enumerate(payload):
            out[i] = _run_task(p)
            flush()
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_task, p): i for i, p in enumerate(payload)}
            for fut in as_completed(futures):
                out[futures[fut]] = fut.result()
                flush()
    return [r for r in out if r is not None]


class RecordWriter:
    """Appends one JSON line per record with a single ``write`` so a kill never leaves half a line."""

    def __init__(self, path: str | Path, timings: str | Path | None = None):
        self.path = Path(path)
        self.timings = Path(timings) if timings else None
        self.path.write_text("")
        if self.timings:
            self.timings.write_text("size,trial,wall_ms\n")

    def __call__(self, record: dict[str, Any]) -> None:
        rec = dict(record)
        wall = rec.pop("wall_ms", 0)
        _append(self.path, (dumps_record(rec) + "\n").encode())
        if self.timings:
            _append(self.timings, f"{rec['size']},{rec['trial']},{wall}\n".encode())


def _append(path: Path, data: bytes) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        view = memoryview(data)
        while view:
            view = view[os.write(fd, view):]
    finally:
        os.close(fd)


# ---------------------------------------------------------------------------
# learnability curve


@dataclass(frozen=True)
class LearnabilityCurve:
    points: list[dict[str, Any]]
    threshold_size: int | None

    def to_dict(self) -> dict[str, Any]:
        return {"points": self.points, "threshold_size": self.threshold_size}

    def ratio(self, size: int) -> float:
        for p in self.points:
            if p["size"] == size:
                return p["ratio"]
        raise KeyError(size)


def curve_from_records(records: Iterable[dict[str, Any]], sizes: Iterable[int]) -> LearnabilityCurve:
    tallies = {s: [0, 0] for s in sizes}
    for r in records:
        t = tallies.setdefault(r["size"], [0, 0])
        t[0] += bool(r["success"])
        t[1] += 1
    points = [{"size": s, "successes": k, "trials": m, "ratio": k / m if m else 0.0}
              for s, (k, m) in sorted(tallies.items()) if m]
    return LearnabilityCurve(points, detect_threshold(points))


def detect_threshold(points: list[dict[str, Any]]) -> int | None:
    """Smallest size whose ratio falls below half the ratio at the smallest size."""
    if not points:
        return None
    base = points[0]["ratio"]
    for p in points[1:]:
        if p["ratio"] < 0.5 * base:
            return p["size"]
    return None


def learnability_sweep(cfg: SweepConfig, workers: int = 1,
                       on_record: Callable[[dict[str, Any]], None] | None = None
                       ) -> tuple[LearnabilityCurve, list[dict[str, Any]]]:
    tasks = [(s, k) for s in cfg.sizes for k in range(cfg.trials_per_size)]
    records = run_trials(tasks, cfg, workers, on_record=on_record)
    return curve_from_records(records, cfg.sizes), records


# ---------------------------------------------------------------------------
# weight-sign shift around the threshold


def sign_shift_study(records: list[dict[str, Any]], sizes: Iterable[int] = (16, 17, 18),
                     bin_width: float = 0.5, near_factor: float = 2.0) -> dict[int, dict[str, Any]]:
    """Pool weight histograms of successful and near-successful trials per size on shared bins."""
    chosen: dict[int, list[np.ndarray]] = {}
    for size in sizes:
        ws = []
        for r in records:
            if r["size"] != size or r.get("result") is None or r.get("mse") is None:
                continue
            if r["success"] or r["mse"] <= near_factor * r["success_mse"]:
                ws.append(np.asarray(r["result"]["circuit"]["weights"], dtype=np.float64))
        chosen[size] = ws
    reach = max((float(np.abs(w).max()) for ws in chosen.values() for w in ws), default=0.0)
    out: dict[int, dict[str, Any]] = {}
    for size, ws in chosen.items():
        if not ws:
            out[size] = {"size": size, "trials": 0, "omitted": True}
            continue
        hists = [analysis.weight_sign_histogram(GeneCircuit(w), bin_width, reach) for w in ws]
        out[size] = {
            "size": size,
            "trials": len(ws),
            "omitted": False,
            "edges": hists[0]["edges"],
            "counts": np.sum([h["counts"] for h in hists], axis=0).tolist(),
            "negative_fraction_mean": float(np.mean([h["negative_fraction"] for h in hists])),
            "mean_weight": float(np.mean([h["mean"] for h in hists])),
        }
    return out


# ---------------------------------------------------------------------------
# L1 ablation

DEFAULT_LAMBDAS = (0.0, 2e-1, 2e-2, 2e-3)


def l1_ablation(cfg: SweepConfig, lambdas: Iterable[float] = DEFAULT_LAMBDAS, size: int = 7,
                trials: int = 30, workers: int = 1
                ) -> tuple[list[dict[str, Any]], dict[float, list[dict[str, Any]]]]:
    """Same seeds at every lambda; returns summary rows and the per-lambda trial records."""
    cfg = replace(cfg, regularization=Regularization.L1, sizes=(size,), trials_per_size=trials)
    rows = []
    per_lambda: dict[float, list[dict[str, Any]]] = {}
    for lam in lambdas:
        loss = replace(cfg.loss, l1_lambda=float(lam))
        recs = run_trials([(size, k) for k in range(trials)], cfg, workers, loss=loss)
        per_lambda[float(lam)] = recs
        ok = [r for r in recs if r.get("result") is not None]
        rows.append({
            "lambda": float(lam),
            "mean_abs_strength": float(np.mean([r["total_strength"] for r in ok])) if ok else math.nan,
            "mean_signed_strength": float(np.mean([r["signed_strength"] for r in ok])) if ok else math.nan,
            "success_ratio": sum(bool(r["success"]) for r in recs) / len(recs),
        })
    return rows, per_lambda


def paired_median_strength(a: list[dict[str, Any]], b: list[dict[str, Any]]) -> tuple[float, float, int]:
    """Median total |W| of two matched runs over trials where both succeeded."""
    pairs = [(x["total_strength"], y["total_strength"]) for x, y in zip(a, b)
             if x["success"] and y["success"] and x["trial"] == y["trial"]]
    if not pairs:
        return math.nan, math.nan, 0
    xs, ys = zip(*pairs)
    return float(np.median(xs)), float(np.median(ys)), len(pairs)


def stability_rows(records: Iterable[dict[str, Any]]) -> list[tuple[int, int, float, float]]:
    rows = []
    for r in records:
        st = r.get("stability")
        if st:
            rows.extend((r["size"], r["trial"], re, im) for re, im in st["eigenvalues"])
    return rows


def median_max_real_by_size(records: Iterable[dict[str, Any]]) -> dict[int, float]:
    by: dict[int, list[float]] = {}
    for r in records:
        if r["success"] and r.get("stability"):
            by.setdefault(r["size"], []).append(r["stability"]["max_real_part"])
    return {s: float(np.median(v)) for s, v in sorted(by.items())}
