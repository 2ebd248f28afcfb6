import json
import subprocess
import sys

import numpy as np
import pytest

from wheelspeed.cli import main
from wheelspeed.config import DEFAULTS, SEED_PATHS, ExperimentConfig
from wheelspeed.errors import ConfigError
from wheelspeed.nn.checkpoint import save_checkpoint
from wheelspeed.nn.model import ModelSpec, init_weights
from wheelspeed.signal import read_frame_csv

SMALL = {
    "sim": {"n_maneuvers": 12},
    "filters": {"pso": {"particles": 6, "iterations": 5}},
    "train": {"GRU": {"hidden_size": 4, "max_epochs": 2, "window": 60, "washout": 10}},
    "hpo": {"max_resource": 3, "min_resource": 1, "num_samples": 2, "hidden_choices": [4], "batch_choices": [16]},
    "eval": {"sweep_sizes": [4, 8], "sweep_repeats": 1, "sweep_epochs": 1},
}


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "small.json"
    cfg.write_text(json.dumps(SMALL))
    assert main(["simulate", "--config", str(cfg), "--out", str(d / "data.csv"), "--duration-min", "2"]) == 0
    return d, cfg


def _body(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


# configuration

def test_defaults_roundtrip():
    cfg = ExperimentConfig({}, env={})
    assert cfg.data == DEFAULTS
    assert cfg.hash == ExperimentConfig({}, env={}).hash
    assert len(cfg.hash) == 16


def test_hash_changes_with_content():
    a = ExperimentConfig({}, env={}).hash
    b = ExperimentConfig({"split": {"seed": 5}}, env={}).hash
    assert a != b


def test_unknown_key_pointer():
    with pytest.raises(ConfigError, match="/train/GRU/hiden_size"):
        ExperimentConfig({"train": {"GRU": {"hiden_size": 3}}}, env={})


@pytest.mark.parametrize("doc", [{"sim": {"seed": "x"}}, {"hpo": {"num_samples": 1.5}}, {"sim": []},
                                 {"split": {"fractions": [0.5, 0.5, 0.5]}}, {"hpo": {"reduction_factor": 1}}])
def test_invalid_config_rejected(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig(doc, env={})


def test_int_accepted_for_float_field():
    cfg = ExperimentConfig({"sim": {"duration_s": 60}}, env={})
    assert cfg.section("sim")["duration_s"] == 60.0


def test_seed_env_override():
    cfg = ExperimentConfig({}, env={"VW_SEED": "17"})
    assert set(cfg.seeds) == set(SEED_PATHS) and set(cfg.seeds.values()) == {17}
    assert cfg.hash != ExperimentConfig({}, env={}).hash
    with pytest.raises(ConfigError):
        ExperimentConfig({}, env={"VW_SEED": "abc"})


def test_header_comments():
    lines = ExperimentConfig({}, env={}).header_comments("evaluate", split="test")
    assert lines[0] == "command=evaluate" and lines[1].startswith("config_hash=") and lines[-1] == "split=test"


# command line

def test_simulate_rows(work):
    d, _ = work
    frame = read_frame_csv(d / "data.csv")
    assert len(frame) == 6000 and len(frame.maneuver_ids) == 12
    head = (d / "data.csv").read_text().splitlines()
    assert head[0] == "# command=simulate" and head[3].startswith("t,omega_RL_SP")


def test_simulate_deterministic(work, tmp_path):
    d, cfg = work
    out = tmp_path / "again.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--duration-min", "2"]) == 0
    assert out.read_bytes() == (d / "data.csv").read_bytes()


def test_unknown_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sim": {"bogus": 1}}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert "/sim/bogus" in capsys.readouterr().err


def test_missing_data_exits_3(tmp_path, work):
    _, cfg = work
    assert main(["train", "--config", str(cfg), "--data", str(tmp_path / "nope.csv"), "--out",
                 str(tmp_path / "m.ckpt")]) == 3


def test_corrupt_checkpoint_exits_3(tmp_path):
    p = tmp_path / "junk.ckpt"
    p.write_bytes(b"not a checkpoint")
    assert main(["flops", "--ckpt", str(p)]) == 3


@pytest.mark.parametrize("variant", ["causal", "acausal"])
def test_tune_filter(work, variant):
    d, cfg = work
    out = d / f"{variant}.json"
    assert main(["tune-filter", "--config", str(cfg), "--data", str(d / "data.csv"), "--variant", variant,
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["label"] == f"LPF_{variant}" and doc["provenance"]["tuned_on"] == "validation"
    assert 1 <= doc["order"] <= 8
    assert ("shift" in doc) == (variant == "acausal")


def test_tune_filter_test_tuning_label(work, tmp_path):
    d, cfg = work
    out = tmp_path / "tt.json"
    assert main(["tune-filter", "--config", str(cfg), "--data", str(d / "data.csv"), "--variant", "acausal",
                 "--allow-test-tuning", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["label"] == "LPF_acausal_testtuned" and doc["provenance"]["tuned_on"] == "test"


def test_hpo_outputs(work):
    d, cfg = work
    out = d / "hpo"
    assert main(["hpo", "--config", str(cfg), "--data", str(d / "data.csv"), "--arch", "GRU", "--out",
                 str(out)]) == 0
    trials = json.loads((out / "trials.json").read_text())["trials"]
    assert len(trials) == 2
    events = [json.loads(ln) for ln in (out / "search_log.ndjson").read_text().splitlines()]
    assert {e["event"] for e in events} == {"rung", "end"}
    assert (out / "best.ckpt").is_file()


def test_train_evaluate_check(work, capsys):
    d, cfg = work
    ckpt = d / "gru.ckpt"
    data = str(d / "data.csv")
    assert main(["train", "--config", str(cfg), "--data", data, "--out", str(ckpt)]) == 0
    args = ["evaluate", "--config", str(cfg), "--data", data, "--models", str(ckpt), "--filters",
            str(d / "causal.json"), str(d / "acausal.json")]
    assert main(args + ["--out", str(d / "res1")]) == 0
    assert main(args + ["--out", str(d / "res2")]) == 0
    for name in ("ranking.csv", "error_distribution.csv"):
        assert (d / "res1" / name).read_bytes() == (d / "res2" / name).read_bytes()
    ts = sorted(p.name for p in (d / "res1").glob("timeseries_*.csv"))
    assert ts and all((d / "res1" / n).read_bytes() == (d / "res2" / n).read_bytes() for n in ts)
    rows = {r.split(",")[0]: r.split(",")[1] for r in _body(d / "res1" / "ranking.csv")[1:]}
    assert rows["LSTM"] == "absent" and rows["GRU"] == "ok"
    capsys.readouterr()
    # a two-epoch, four-unit network cannot beat the tuned filters
    assert main(args + ["--out", str(d / "res3"), "--check"]) == 4
    assert "FAIL" in capsys.readouterr().out


def test_sweep_command(work):
    d, cfg = work
    out = d / "sweep.csv"
    assert main(["sweep", "--config", str(cfg), "--data", str(d / "data.csv"), "--out", str(out)]) == 0
    body = _body(out)
    assert len(body) == 3 and body[0].startswith("hidden_size,")
    flops = [int(r.split(",")[-1]) for r in body[1:]]
    assert flops[0] < flops[1]


def test_flops_h32(tmp_path, capsys):
    spec = ModelSpec("GRU", hidden_size=32)
    p = tmp_path / "h32.ckpt"
    save_checkpoint(p, spec, init_weights(spec))
    assert main(["flops", "--ckpt", str(p)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "7712 FLOPs/step"
    assert out[1].startswith("0.1285% utilization")


def test_console_entry_point(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    r = subprocess.run([sys.executable, "-m", "wheelspeed.cli", "simulate", "--config", str(bad), "--out",
                        str(tmp_path / "x.csv")], capture_output=True, text=True)
    assert r.returncode == 2
