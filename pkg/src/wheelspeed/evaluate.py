"""MAE scoring, ranking/distribution/time-series exports and the hidden-size sweep."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DivergenceError, WheelSpeedError
from .nn.model import ModelSpec, flops_per_step
from .nn.train import LARGE_LOSS, TrainConfig, train

METHODS = ("SP", "LPF_causal", "LPF_acausal", "LPF_acausal_testtuned", "LSTM", "GRU", "TCN")
NN_METHODS = ("LSTM", "GRU", "TCN")
ACAUSAL_METHODS = ("LPF_acausal", "LPF_acausal_testtuned")
MAX_SPEED = 100.0
STANDSTILL_SPEED = 1e-3
ABSENT = "absent"


@dataclass
class MethodResult:
    method: str
    segment_mae: dict = field(default_factory=dict)
    overall: float = math.nan
    quartiles: dict = field(default_factory=dict)
    standstill: float = math.nan
    status: str = "ok"

    @property
    def present(self):
        return self.status != ABSENT


def _as_prediction(prediction, n):
    p = np.asarray(prediction, dtype=float)
    if p.ndim == 2 and p.shape[1] == 1:
        p = p[:, 0]
    if not (p.ndim == 1 or (p.ndim == 2 and p.shape[1] == 2)):
        raise WheelSpeedError("bad-prediction-shape", f"prediction shape {p.shape}")
    if p.shape[0] != n:
        raise WheelSpeedError("length-mismatch", f"{p.shape[0]} predictions vs {n} reference samples")
    return p


def _check_units(*arrays):
    for a in arrays:
        if np.any(np.abs(a) > MAX_SPEED):
            raise WheelSpeedError("unit-sanity", f"speed above {MAX_SPEED} m/s, expected m/s input")


def mae(prediction, reference):
    """Two channels: mean of per-wheel MAEs. One channel: MAE against the wheel mean."""
    if prediction.ndim == 1:
        return float(np.mean(np.abs(prediction - reference.mean(axis=1))))
    return float(np.mean([np.mean(np.abs(prediction[:, j] - reference[:, j])) for j in range(2)]))


def quartiles(values):
    v = np.asarray(values, dtype=float)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"q0": q[0], "q25": q[1], "q50": q[2], "q75": q[3], "q100": q[4], "mean": float(v.mean())}


def standstill_speed(prediction, reference, threshold=STANDSTILL_SPEED):
    """Mean |v_hat| where the reference wheel mean is below ``threshold`` (m/s)."""
    still = np.abs(reference.mean(axis=1)) < threshold
    if not still.any():
        return math.nan
    return float(np.mean(np.abs(prediction[still])))


def evaluate_method(prediction, reference, segments, method="method"):
    """Score a prediction in m/s against the 2-channel reference in m/s."""
    ref = np.asarray(reference, dtype=float)
    if ref.ndim != 2 or ref.shape[1] != 2:
        raise WheelSpeedError("bad-reference-shape", f"reference shape {ref.shape}")
    p = _as_prediction(prediction, ref.shape[0])
    _check_units(p, ref)
    seg = {str(m): mae(p[s:e], ref[s:e]) for m, s, e in segments}
    return MethodResult(method, seg, mae(p, ref), quartiles(list(seg.values())), standstill_speed(p, ref))


def _reduction(value, base):
    if base is None or not base.present or not base.overall > 0:
        return math.nan
    return 1.0 - value / base.overall


def best_nn(results):
    nns = [results[m] for m in NN_METHODS if m in results and results[m].present]
    return min(nns, key=lambda r: r.overall) if nns else None


def best_acausal(results):
    acs = [results[m] for m in ACAUSAL_METHODS if m in results and results[m].present]
    return min(acs, key=lambda r: r.overall) if acs else None


def ranking_rows(results):
    sp, causal, acausal = results.get("SP"), results.get("LPF_causal"), best_acausal(results)
    rows = []
    for m in METHODS:
        if m not in results:
            continue
        r = results[m]
        if not r.present:
            rows.append([m, ABSENT] + [""] * 10)
            continue
        q = r.quartiles
        rows.append([m, r.status, r.overall, q["q0"], q["q25"], q["q50"], q["q75"], q["q100"], q["mean"],
                     r.standstill, _reduction(r.overall, sp), _reduction(r.overall, causal),
                     _reduction(r.overall, acausal)])
    return rows


RANKING_HEADER = ["method", "status", "mae", "q0", "q25", "q50", "q75", "q100", "mean", "standstill_abs_speed",
                  "reduction_vs_SP", "reduction_vs_LPF_causal", "reduction_vs_best_LPF_acausal"]
TIMESERIES_HEADER = ["t", "v_SP", "v_EM", "v_LPF_acausal", "v_GRU", "v_ref"]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def write_csv(path, header, rows, comments=()):
    """Write a CSV with ``# key=value`` header comments; floats use ``repr``."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def check_ordering(results, gap=0.05, min_sp_reduction=0.5):
    """Ordering NN < acausal LPF < causal LPF < SP with relative gaps; ``(ok, messages)``."""
    nn = best_nn(results)
    chain = [("NN", nn), ("LPF_acausal", results.get("LPF_acausal")),
             ("LPF_causal", results.get("LPF_causal")), ("SP", results.get("SP"))]
    missing = [n for n, r in chain if r is None or not r.present]
    if missing:
        return False, [f"missing methods: {', '.join(missing)}"]
    ok, msgs = True, []
    for (na, a), (nb, b) in zip(chain, chain[1:]):
        good = a.overall <= (1.0 - gap) * b.overall
        ok &= good
        msgs.append(f"{na} ({a.overall:.5f}) vs {nb} ({b.overall:.5f}): "
                    f"{100 * (1 - a.overall / b.overall):.1f}% {'ok' if good else 'FAIL'}")
    red = 1.0 - nn.overall / chain[-1][1].overall
    good = red >= min_sp_reduction
    ok &= good
    msgs.append(f"NN reduction vs SP {100 * red:.1f}% {'ok' if good else 'FAIL'}")
    return bool(ok), msgs


def check_standstill(results, nn_limit=0.01, ratio=2.0):
    nn, lpf = best_nn(results), results.get("LPF_acausal")
    if nn is None or lpf is None or not lpf.present or math.isnan(nn.standstill):
        return False, ["standstill data or methods missing"]
    ok = nn.standstill <= nn_limit and lpf.standstill >= ratio * nn.standstill
    return bool(ok), [f"standstill |v| NN {nn.standstill:.5f} m/s, LPF_acausal {lpf.standstill:.5f} m/s "
                      f"{'ok' if ok else 'FAIL'}"]


def compare_all(reference, segments, predictions, out_dir=None, timeseries=(), t=None, extra_series=None,
                comments=()):
    """Score every method and write the result CSVs into ``out_dir``.

    ``predictions`` maps method name to an m/s array (1 or 2 channels), or
    ``None`` for a missing artifact (reported as ``absent``). ``timeseries``
    lists maneuver ids to export; ``extra_series`` supplies ``v_SP`` and
    ``v_EM`` (m/s) for those exports.
    """
    ref = np.asarray(reference, dtype=float)
    results = {}
    for m in METHODS:
        if m not in predictions:
            continue
        if predictions[m] is None:
            results[m] = MethodResult(m, status=ABSENT)
        else:
            results[m] = evaluate_method(predictions[m], ref, segments, m)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "ranking.csv", RANKING_HEADER, ranking_rows(results), comments)
        dist = [[m, seg, v] for m, r in results.items() if r.present for seg, v in r.segment_mae.items()]
        write_csv(out / "error_distribution.csv", ["method", "maneuver_id", "mae"], dist, comments)
        extra = extra_series or {}
        index = {str(m): (s, e) for m, s, e in segments}
        for man in timeseries:
            if man not in index:
                raise WheelSpeedError("unknown-maneuver", man)
            s, e = index[man]
            cols = [np.asarray(t)[s:e] if t is not None else np.arange(e - s) / 50.0]
            for key, src in (("v_SP", extra.get("v_SP")), ("v_EM", extra.get("v_EM")),
                             ("v_LPF_acausal", predictions.get("LPF_acausal")),
                             ("v_GRU", predictions.get("GRU"))):
                cols.append(_channel_mean(src, s, e))
            cols.append(ref[s:e].mean(axis=1))
            write_csv(out / f"timeseries_{man}.csv", TIMESERIES_HEADER, zip(*cols), comments)
    return results


def _channel_mean(src, s, e):
    if src is None:
        return np.full(e - s, np.nan)
    a = np.asarray(src, dtype=float)[s:e]
    return a.mean(axis=1) if a.ndim == 2 else a


SWEEP_SIZES = (16, 32, 48, 64, 96, 128, 160)
SWEEP_HEADER = ["hidden_size", "repeat", "seed", "val_loss", "diverged", "mean_val_loss", "flops_per_step"]


def sweep_seed(base_seed, hidden, repeat):
    return int(base_seed + 1000 * hidden + repeat)


def hidden_size_sweep(train_frame, val_frame, sizes=SWEEP_SIZES, repeats=5, cfg: TrainConfig | None = None,
                      arch="GRU", seed=0, trainer=None, out=None, comments=()):
    """Train ``repeats`` models per hidden size; return rows (and write ``out``).

    ``trainer(spec, cfg)`` may replace the default training call and must
    return an object with ``best_val_loss``.
    """
    cfg = cfg or TrainConfig()
    trainer = trainer or (lambda spec, c: train(spec, c, train_frame, val_frame))
    trials = []
    for h in sizes:
        for r in range(repeats):
            s = sweep_seed(seed, h, r)
            spec = ModelSpec(arch, hidden_size=h, seed=s)
            try:
                loss, diverged = float(trainer(spec, replace(cfg, seed=s)).best_val_loss), False
            except DivergenceError:
                loss, diverged = LARGE_LOSS, True
            trials.append((h, r, s, loss, diverged, flops_per_step(spec)))
    rows = []
    for h in sizes:
        losses = [t[3] for t in trials if t[0] == h and not t[4]]
        mean = float(np.mean(losses)) if losses else LARGE_LOSS
        rows.extend([t[0], t[1], t[2], t[3], int(t[4]), mean, t[5]] for t in trials if t[0] == h)
    if out is not None:
        write_csv(out, SWEEP_HEADER, rows, comments)
    return rows


def sweep_summary(rows):
    """``{hidden: (mean_val_loss, flops)}`` from sweep rows."""
    return {r[0]: (r[5], r[6]) for r in rows}
