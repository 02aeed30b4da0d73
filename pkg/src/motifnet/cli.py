"""Command-line entry point: ``motifnet {train,evolve,sweep,analyze,export,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

from . import analysis, experiments
from .config import ConfigError, ExperimentConfig, load_config, with_seed
from .dynamics import GeneCircuit, load_circuit, response_curve, save_circuit
from .io import circuit_rows, circuit_to_dot, dumps_record, write_csv
from .targets import sample_grid, target_values
from .train_evo import evolve
from .train_gd import TrainResult, train_gd

log = logging.getLogger("motifnet")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OUTPUT = 0, 1, 2, 3


class OutputError(OSError):
    pass


class Output:
    """Writes files under one directory, refusing to clobber existing results without ``force``."""

    def __init__(self, root: str | Path, force: bool = False):
        self.root = Path(root)
        self.force = force
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create output directory {self.root}: {exc}") from exc
        if not os.access(self.root, os.W_OK):
            raise OutputError(f"output directory {self.root} is not writable")

    def claim(self, *names: str) -> list[Path]:
        paths = [self.root / n for n in names]
        clash = [p for p in paths if p.exists()]
        if clash and not self.force:
            raise OutputError(f"refusing to overwrite {', '.join(map(str, clash))} (use --force)")
        return paths

    def path(self, name: str) -> Path:
        return self.claim(name)[0]


def _response_rows(circuit: GeneCircuit, cfg: ExperimentConfig) -> list[list[Any]]:
    grid = sample_grid(cfg.target)
    curve = response_curve(circuit, grid, cfg.sim)
    tgt = target_values(cfg.target, grid)
    return [[x, t, s[-1], *s] for x, t, s in zip(grid, tgt, curve.states)]


def _response_header(n: int) -> list[str]:
    return ["x", "target", "y_out", *[f"y_{i + 1}" for i in range(n)]]


def _write_training(out: Output, result: TrainResult, cfg: ExperimentConfig) -> None:
    circuit_path, result_path, loss_path, resp_path = out.claim(
        "circuit.json", "result.jsonl", "loss.csv", "response.csv")
    save_circuit(result.circuit, circuit_path)
    record = result.to_dict()
    record["config"] = cfg.to_dict()
    result_path.write_text(dumps_record(record) + "\n")
    write_csv(loss_path, ["iteration", "loss"], enumerate(result.loss_history, start=1))
    write_csv(resp_path, _response_header(result.circuit.n), _response_rows(result.circuit, cfg))


def cmd_train(args, cfg: ExperimentConfig) -> int:
    out = Output(args.output_dir, args.force)
    log.info("training n=%d on %s (seed %d)", cfg.n, cfg.target.label, cfg.gd.rng_seed)
    result = train_gd(cfg.n, cfg.target, cfg.sim, cfg.gd, cfg.loss)
    _write_training(out, result, cfg)
    print(f"success={result.success} mse={result.final_mse:.5f} iterations={result.iterations_used}")
    return EXIT_OK


def cmd_evolve(args, cfg: ExperimentConfig) -> int:
    out = Output(args.output_dir, args.force)
    log.info("evolving n=%d on %s (seed %d)", cfg.n, cfg.target.label, cfg.evo.rng_seed)
    result = evolve(cfg.n, cfg.target, cfg.sim, cfg.evo, cfg.loss)
    _write_training(out, result, cfg)
    print(f"success={result.success} mse={result.final_mse:.5f} generations={result.iterations_used}")
    return EXIT_OK


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    out = Output(args.output_dir, args.force)
    sweep = cfg.sweep_config()
    if args.ablation:
        return _ablation(out, cfg, sweep, args.workers)
    records_path, timings_path, curve_path, scatter_path, summary_path = out.claim(
        "records.jsonl", "timings.csv", "learnability.csv", "stability_scatter.csv", "summary.json")
    writer = experiments.RecordWriter(records_path, timings_path)
    curve, records = experiments.learnability_sweep(sweep, args.workers, on_record=writer)
    write_csv(curve_path, ["size", "successes", "trials", "ratio"],
              ([p["size"], p["successes"], p["trials"], p["ratio"]] for p in curve.points))
    write_csv(scatter_path, ["size", "trial", "re", "im"], experiments.stability_rows(records))
    study = experiments.sign_shift_study(records, sweep.sizes, sweep.analysis.bin_width, sweep.analysis.near_factor)
    for size, agg in study.items():
        path = out.path(f"signs_{size}.csv")
        if agg["omitted"]:
            path.write_text("# omitted: no successful or near-successful trials\nlo,hi,count\n")
            continue
        edges = agg["edges"]
        write_csv(path, ["lo", "hi", "count"], zip(edges[:-1], edges[1:], agg["counts"]))
    summary = {
        "curve": curve.to_dict(),
        "median_max_real_part": experiments.median_max_real_by_size(records),
        "sign_shift": [{k: v for k, v in agg.items() if k not in ("edges", "counts")} for agg in study.values()],
        "success_criterion": {"kind": "mse_threshold", "success_mse": sweep.loss.success_mse},
        "config": cfg.to_dict(),
    }
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for p in curve.points:
        print(f"n={p['size']:>3}  {p['successes']:>4}/{p['trials']:<4} ratio={p['ratio']:.3f}")
    print(f"threshold_size={curve.threshold_size}")
    return EXIT_OK


def _ablation(out: Output, cfg: ExperimentConfig, sweep, workers: int) -> int:
    table_path, records_path = out.claim("ablation.csv", "ablation_records.jsonl")
    ab = cfg.ablation
    rows, per_lambda = experiments.l1_ablation(sweep, ab.lambdas, ab.size, ab.trials, workers)
    write_csv(table_path, ["lambda", "mean_abs_strength", "mean_signed_strength", "success_ratio"],
              ([r["lambda"], r["mean_abs_strength"], r["mean_signed_strength"], r["success_ratio"]] for r in rows))
    writer = experiments.RecordWriter(records_path)
    for recs in per_lambda.values():
        for r in recs:
            writer(r)
    for r in rows:
        print(f"lambda={r['lambda']:<8g} |W|={r['mean_abs_strength']:.3f} sumW={r['mean_signed_strength']:.3f} "
              f"success={r['success_ratio']:.3f}")
    return EXIT_OK


def cmd_analyze(args, cfg: ExperimentConfig) -> int:
    circuit = _load_circuit_or_exit(args.circuit)
    out = Output(args.output_dir, args.force)
    report_path, eig_path, team_path, resp_path = out.claim(
        "analysis.json", "eigenvalues.csv", "team.json", "response.csv")
    a = cfg.analysis
    doc: dict[str, Any] = {
        "node_strength": analysis.node_strength(circuit).tolist(),
        "feedback_sum": analysis.feedback_sum(circuit).tolist(),
        "total_strength": analysis.total_strength(circuit),
        "signed_strength": analysis.signed_strength(circuit),
        "edge_connectivity": analysis.edge_connectivity(analysis.binarize(circuit, a.edge_tau)),
        "histogram": analysis.weight_sign_histogram(circuit, a.bin_width),
        "stability": None,
    }
    eig_rows = []
    try:
        rep = analysis.stability_report(circuit, a.reference_input, cfg.sim)
        doc["stability"] = rep.to_dict()
        eig_rows = [[z.real, z.imag] for z in rep.eigenvalues]
    except (analysis.NotConverged, analysis.NoConvergence, ArithmeticError) as exc:
        doc["stability_error"] = str(exc)
    report_path.write_text(json.dumps(doc, indent=2) + "\n")
    write_csv(eig_path, ["re", "im"], eig_rows)
    curve = response_curve(circuit, sample_grid(cfg.target), cfg.sim)
    team = analysis.team_metrics(curve.states, cfg.target) if curve.valid else None
    team_path.write_text(json.dumps(team.to_dict() if team else None, indent=2) + "\n")
    write_csv(resp_path, _response_header(circuit.n), _response_rows(circuit, cfg))
    stable = doc["stability"]["stable"] if doc["stability"] else None
    print(f"stable={stable} edge_connectivity={doc['edge_connectivity']} "
          f"team={team.classification if team else 'n/a'}")
    return EXIT_OK


def cmd_export(args, cfg: ExperimentConfig) -> int:
    circuit = _load_circuit_or_exit(args.circuit)
    out = Output(args.output_dir, args.force)
    stem = Path(args.circuit).stem
    tau = cfg.analysis.edge_tau if args.edge_tau is None else args.edge_tau
    if args.format == "dot":
        out.path(f"{stem}.dot").write_text(circuit_to_dot(circuit, tau, name=stem))
    else:
        write_csv(out.path(f"{stem}_weights.csv"), ["target", "source", "weight"], circuit_rows(circuit))
        write_csv(out.path(f"{stem}_nodes.csv"), ["node", "strength", "feedback"],
                  zip(range(circuit.n), analysis.node_strength(circuit), analysis.feedback_sum(circuit)))
    return EXIT_OK


def cmd_verify(args, cfg: ExperimentConfig) -> int:
    from .verify import run_checks

    results = run_checks()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "ORACLE CHECK FAILURE")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


class _CircuitError(Exception):
    pass


def _load_circuit_or_exit(path: str) -> GeneCircuit:
    try:
        return load_circuit(path)
    except (OSError, ValueError) as exc:
        raise _CircuitError(f"cannot read circuit {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="motifnet", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_output=True):
        sp.add_argument("-c", "--config", help="JSON config file (defaults apply when omitted)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path override, e.g. gd.rng_seed=3 (repeatable)")
        if needs_output:
            sp.add_argument("-o", "--output-dir", required=True)
            sp.add_argument("--force", action="store_true", help="overwrite existing result files")

    for name, helptext in (("train", "Adam gradient descent on one circuit"),
                           ("evolve", "evolutionary search for one circuit")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--seed", type=int, help="shorthand for the trainer's rng_seed")
        sp.add_argument("-n", "--nodes", type=int, help="shorthand for n")

    sp = sub.add_parser("sweep", help="learnability-vs-size sweep or L1 ablation")
    common(sp)
    sp.add_argument("--workers", type=int, default=int(os.environ.get("MOTIFNET_WORKERS", "1")))
    sp.add_argument("--ablation", action="store_true", help="run the L1 ablation instead of the size sweep")

    sp = sub.add_parser("analyze", help="stability, connectivity and team metrics of a stored circuit")
    common(sp)
    sp.add_argument("circuit")

    sp = sub.add_parser("export", help="DOT graph or CSV tables of a stored circuit")
    common(sp)
    sp.add_argument("circuit")
    sp.add_argument("--format", choices=("dot", "csv"), default="dot")
    sp.add_argument("--edge-tau", type=float)

    sp = sub.add_parser("verify", help="run the embedded oracle checks")
    common(sp, needs_output=False)
    return p


COMMANDS = {
    "train": cmd_train,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "export": cmd_export,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.overrides)
        if getattr(args, "nodes", None) is not None:
            overrides.append(f"n={args.nodes}")
        cfg = load_config(args.config, overrides)
        if getattr(args, "seed", None) is not None:
            cfg = with_seed(cfg, args.seed)
        if getattr(args, "workers", 1) < 1:
            raise ConfigError("--workers must be >= 1")
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, _CircuitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
