import csv
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wheelspeed.errors import DivergenceError, WheelSpeedError
from wheelspeed.evaluate import (RANKING_HEADER, SWEEP_HEADER, TIMESERIES_HEADER, MethodResult, check_ordering,
                                 check_standstill, compare_all, evaluate_method, hidden_size_sweep, quartiles,
                                 ranking_rows, sweep_summary)
from wheelspeed.nn.train import LARGE_LOSS

SEGS = [("a", 0, 40), ("b", 40, 100), ("c", 100, 160)]


def _ref(seed=0):
    rng = np.random.default_rng(seed)
    v = np.abs(np.cumsum(rng.normal(size=160))) * 0.1 + 1.0
    d = 0.05 * np.sin(np.arange(160) / 10.0)
    return np.column_stack([v + d, v - d])


def test_perfect_prediction_zero():
    ref = _ref()
    r = evaluate_method(ref, ref, SEGS)
    assert r.overall == 0.0 and all(v == 0.0 for v in r.segment_mae.values())


def test_constant_offset():
    ref = _ref()
    assert evaluate_method(ref + 0.1, ref, SEGS).overall == pytest.approx(0.1, abs=1e-12)


def test_single_channel_rule():
    ref = _ref()
    mean = ref.mean(axis=1)
    assert evaluate_method(mean, ref, SEGS).overall == pytest.approx(0.0, abs=1e-15)
    assert evaluate_method(np.column_stack([mean, mean]), ref, SEGS).overall > 0.01
    assert evaluate_method(mean[:, None], ref, SEGS).overall == pytest.approx(0.0, abs=1e-15)


def test_two_channel_is_mean_of_wheel_maes():
    ref = _ref()
    pred = ref + np.array([0.1, -0.3])
    assert evaluate_method(pred, ref, SEGS).overall == pytest.approx(0.2, abs=1e-12)


def test_shape_and_unit_errors():
    ref = _ref()
    with pytest.raises(WheelSpeedError, match="bad-prediction-shape"):
        evaluate_method(np.zeros((160, 3)), ref, SEGS)
    with pytest.raises(WheelSpeedError, match="unit-sanity"):
        evaluate_method(ref * 400, ref, SEGS)


@given(st.floats(-5, 5))
def test_translation_detecting(d):
    ref = _ref(3)
    assert evaluate_method(ref + d, ref, SEGS).overall == pytest.approx(abs(d), abs=1e-9)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=40))
def test_quartiles_match_sort(values):
    q = quartiles(values)
    s = sorted(values)

    def brute(p):
        pos = p * (len(s) - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, len(s) - 1)
        return s[lo] + (s[hi] - s[lo]) * (pos - lo)

    for key, p in (("q0", 0), ("q25", 0.25), ("q50", 0.5), ("q75", 0.75), ("q100", 1.0)):
        assert q[key] == pytest.approx(brute(p), abs=1e-9)
    assert q["q0"] <= q["q25"] <= q["q50"] <= q["q75"] <= q["q100"]


def _predictions(ref):
    mean = ref.mean(axis=1)
    rng = np.random.default_rng(1)
    return {
        "SP": ref + rng.normal(scale=0.1, size=ref.shape),
        "LPF_causal": mean + 0.04,
        "LPF_acausal": mean + rng.normal(scale=0.02, size=mean.shape),
        "GRU": ref + rng.normal(scale=0.005, size=ref.shape),
        "LSTM": None,
    }


def test_compare_all_outputs(tmp_path):
    ref = _ref()
    preds = _predictions(ref)
    t = np.arange(160) / 50.0
    extra = {"v_SP": preds["SP"], "v_EM": ref.mean(axis=1)}
    res = compare_all(ref, SEGS, preds, tmp_path, ["b"], t, extra, ["config_hash=x"])
    assert res["LSTM"].status == "absent"

    def rows(name):
        lines = [ln for ln in (tmp_path / name).read_text().splitlines() if not ln.startswith("#")]
        return list(csv.reader(lines))

    rank = rows("ranking.csv")
    assert rank[0] == RANKING_HEADER
    methods = [r[0] for r in rank[1:]]
    assert methods == ["SP", "LPF_causal", "LPF_acausal", "LSTM", "GRU"]
    lstm = rank[1 + methods.index("LSTM")]
    assert lstm[1] == "absent"
    gru = dict(zip(RANKING_HEADER, rank[1 + methods.index("GRU")]))
    assert float(gru["reduction_vs_SP"]) == pytest.approx(1 - res["GRU"].overall / res["SP"].overall)

    dist = rows("error_distribution.csv")
    assert dist[0] == ["method", "maneuver_id", "mae"] and len(dist) == 1 + 4 * 3

    ts = rows("timeseries_b.csv")
    assert ts[0] == TIMESERIES_HEADER and len(ts) == 61
    assert float(ts[1][0]) == pytest.approx(40 / 50.0)
    assert float(ts[1][-1]) == pytest.approx(ref[40].mean())

    ok, msgs = check_ordering(res)
    assert ok, msgs
    assert (tmp_path / "ranking.csv").read_text().startswith("# config_hash=x\n")


def test_identical_methods_identical_rows():
    ref = _ref()
    p = ref + 0.03
    res = compare_all(ref, SEGS, {"GRU": p, "TCN": p.copy()})
    rows = {r[0]: r[1:] for r in ranking_rows(res)}
    assert rows["GRU"] == rows["TCN"]


def test_ordering_check_fails_on_small_gap():
    def r(m, v):
        return MethodResult(m, overall=v, quartiles={}, standstill=0.0)

    res = {"SP": r("SP", 0.1), "LPF_causal": r("LPF_causal", 0.04), "LPF_acausal": r("LPF_acausal", 0.02),
           "GRU": r("GRU", 0.0195)}
    ok, msgs = check_ordering(res)
    assert not ok and any("FAIL" in m for m in msgs)
    res["GRU"] = r("GRU", 0.01)
    assert check_ordering(res)[0]
    assert not check_ordering({"SP": r("SP", 0.1)})[0]


def test_standstill_metric():
    ref = np.zeros((50, 2))
    ref[25:] = 3.0
    lpf = np.where(np.arange(50) < 25, 0.05, 3.0)
    nn = np.column_stack([np.where(np.arange(50) < 25, 0.004, 3.0)] * 2)
    segs = [("s", 0, 50)]
    res = {"LPF_acausal": evaluate_method(lpf, ref, segs), "GRU": evaluate_method(nn, ref, segs)}
    assert res["GRU"].standstill == pytest.approx(0.004) and res["LPF_acausal"].standstill == pytest.approx(0.05)
    assert check_standstill(res)[0]


def _stub_sweep_trainer(spec, cfg):
    if spec.hidden_size == 48 and cfg.seed % 5 == 1:
        raise DivergenceError("diverged", "stub")
    return SimpleNamespace(best_val_loss=abs(spec.hidden_size - 32) / 100 + (cfg.seed % 7) * 1e-3)


def test_hidden_sweep(tmp_path):
    out = tmp_path / "hidden_sweep.csv"
    rows = hidden_size_sweep(None, None, repeats=3, trainer=_stub_sweep_trainer, out=out)
    assert len(rows) == 7 * 3
    summary = sweep_summary(rows)
    flops = [summary[h][1] for h in sorted(summary)]
    assert all(a < b for a, b in zip(flops, flops[1:]))
    diverged = [r for r in rows if r[4]]
    assert diverged and all(r[3] == LARGE_LOSS for r in diverged)
    best = min(v[0] for v in summary.values())
    assert any(summary[h][0] <= 1.05 * best for h in sorted(summary)[:-1])
    again = hidden_size_sweep(None, None, repeats=3, trainer=_stub_sweep_trainer)
    assert again == rows
    header = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")][0]
    assert header.split(",") == SWEEP_HEADER
