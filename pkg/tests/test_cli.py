import csv
import json

import numpy as np
import pytest

from motifnet import dynamics
from motifnet.cli import main
from motifnet.dynamics import GeneCircuit, load_circuit, save_circuit
from motifnet.io import circuit_to_dot, read_jsonl

FAST = ["--set", "gd.max_iters=30"]


@pytest.fixture
def circuit_file(tmp_path):
    path = tmp_path / "c.json"
    save_circuit(GeneCircuit(np.array([[0.0, -2.0, 0.05], [1.5, 0.0, 0.0], [0.0, 0.3, 0.0]])), path)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_train_writes_all_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "-o", str(out), "-n", "3", "--seed", "4", *FAST]) == 0
    assert "success=" in capsys.readouterr().out
    c = load_circuit(out / "circuit.json")
    assert c.n == 3 and c.meta["seed"] == 4
    (rec,) = read_jsonl(out / "result.jsonl")
    assert rec["config"]["gd"]["rng_seed"] == 4
    rows = read_csv(out / "response.csv")
    assert rows[0] == ["x", "target", "y_out", "y_1", "y_2", "y_3"]
    assert len(rows) == 61
    assert len(read_csv(out / "loss.csv")) == rec["iterations_used"] + 1


def test_refuses_to_overwrite_without_force(tmp_path):
    out = tmp_path / "run"
    args = ["train", "-o", str(out), "-n", "3", *FAST]
    assert main(args) == 0
    assert main(args) == 3
    assert main([*args, "--force"]) == 0


def test_evolve(tmp_path):
    out = tmp_path / "evo"
    assert main(["evolve", "-o", str(out), "-n", "3", "--set", "evo.max_generations=3"]) == 0
    (rec,) = read_jsonl(out / "result.jsonl")
    assert rec["trainer"] == "Evolutionary"
    losses = [float(r[1]) for r in read_csv(out / "loss.csv")[1:]]
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_config_file_and_errors(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 3, "gd": {"max_iters": 5}}))
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path / "a")]) == 0
    assert main(["train", "-c", str(tmp_path / "missing.json"), "-o", str(tmp_path / "b")]) == 2
    assert "missing.json" in capsys.readouterr().err
    cfg.write_text(json.dumps({"gd": {"max_iters": 0}}))
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path / "c")]) == 2
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path / "d")]) == 2
    cfg.write_text("{not json")
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path / "e")]) == 2


def test_unwritable_output_is_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["train", "-o", str(blocker / "sub"), "-n", "3", *FAST]) == 3


def test_malformed_circuit_is_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 2, "weights": [[1, 2], [3]]}))
    assert main(["analyze", str(bad), "-o", str(tmp_path / "x")]) == 2
    assert main(["export", str(tmp_path / "nope.json"), "-o", str(tmp_path / "y")]) == 2


def test_analyze(tmp_path, circuit_file):
    out = tmp_path / "an"
    assert main(["analyze", str(circuit_file), "-o", str(out)]) == 0
    doc = json.loads((out / "analysis.json").read_text())
    assert doc["node_strength"] == [2.05, 1.5, 0.3]
    assert doc["edge_connectivity"] == 1
    assert len(read_csv(out / "eigenvalues.csv")) == 4
    team = json.loads((out / "team.json").read_text())
    assert sum(p["supervised"] for p in team["per_node"]) == 1


def test_export_dot_and_csv(tmp_path, circuit_file):
    out = tmp_path / "ex"
    assert main(["export", str(circuit_file), "-o", str(out)]) == 0
    dot = (out / "c.dot").read_text()
    assert dot == circuit_to_dot(load_circuit(circuit_file), 0.1, name="c")
    assert "g1 -> g0" in dot and "g2 -> g0" not in dot
    assert dot.count("->") == 3
    assert main(["export", str(circuit_file), "-o", str(out), "--format", "csv"]) == 0
    rows = read_csv(out / "c_weights.csv")
    assert rows[0] == ["target", "source", "weight"] and len(rows) == 10


def test_dot_edge_styles():
    dot = circuit_to_dot(GeneCircuit(np.array([[0.0, 1.0], [-1.0, 0.0]])))
    lines = [ln for ln in dot.splitlines() if "->" in ln]
    act = next(ln for ln in lines if "g1 -> g0" in ln)
    rep = next(ln for ln in lines if "g0 -> g1" in ln)
    assert "arrowhead=normal" in act or "darkgreen" in act
    assert "tee" in rep


def test_sweep_outputs(tmp_path):
    out = tmp_path / "sw"
    args = ["sweep", "-o", str(out), "--set", "sweep.sizes=[3,4]", "--set", "sweep.trials_per_size=2", *FAST]
    assert main(args) == 0
    for name in ("records.jsonl", "timings.csv", "learnability.csv", "stability_scatter.csv",
                 "summary.json", "signs_3.csv", "signs_4.csv"):
        assert (out / name).exists(), name
    recs = read_jsonl(out / "records.jsonl")
    curve = read_csv(out / "learnability.csv")
    assert curve[0] == ["size", "successes", "trials", "ratio"]
    for row in curve[1:]:
        size, k, m = int(row[0]), int(row[1]), int(row[2])
        assert k == sum(r["success"] for r in recs if r["size"] == size) and m == 2


def test_ablation(tmp_path):
    out = tmp_path / "ab"
    args = ["sweep", "--ablation", "-o", str(out), "--set", "ablation.size=3", "--set", "ablation.trials=2",
            "--set", "ablation.lambdas=[0, 0.2]", *FAST]
    assert main(args) == 0
    rows = read_csv(out / "ablation.csv")
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.2]
    assert len(read_jsonl(out / "ablation_records.jsonl")) == 4


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_verify_catches_perturbed_activation(monkeypatch, capsys):
    real = dynamics.activation
    monkeypatch.setattr(dynamics, "activation", lambda u: real(u) + 1e-3)
    assert main(["verify"]) == 1
    assert "FAIL" in capsys.readouterr().out
