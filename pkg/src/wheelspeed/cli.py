"""Command-line driver: ``wheelspeed <command> ...``.

Exit codes: 0 success, 2 config error, 3 data/schema error, 4 acceptance
check failed, 5 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baselines import ACAUSAL, CAUSAL
from .config import ExperimentConfig
from .errors import ConfigError, DivergenceError, SchemaError, WheelSpeedError
from .estimator import VirtualWheelSpeedSensor
from .evaluate import check_ordering, check_standstill, hidden_size_sweep, ranking_rows
from .filters import FilterSpec
from .nn.model import ecu_budget, flops_per_step
from .pipeline import evaluate_frame, generate_dataset, run_hpo, split_dataset, train_model, tune_baselines
from .signal import frame_to_csv, read_frame_csv

EXIT_OK, EXIT_CONFIG, EXIT_SCHEMA, EXIT_CHECK, EXIT_DIVERGED = 0, 2, 3, 4, 5


def _config(args):
    return ExperimentConfig.load(getattr(args, "config", None))


def _load_data(path):
    if not Path(path).is_file():
        raise SchemaError("missing-input", f"data file not found: {path}")
    return read_frame_csv(Path(path))


def _splits(cfg, args):
    frame = _load_data(args.data)
    split, frames = split_dataset(cfg, frame)
    return split, frames


def _provenance(cfg, command, **extra):
    return {"command": command, "config_hash": cfg.hash,
            "seeds": {k.strip("/"): v for k, v in cfg.seeds.items()}, **extra}


def cmd_simulate(args):
    cfg = _config(args)
    duration = args.duration_min * 60.0 if args.duration_min is not None else None
    frame = generate_dataset(cfg, duration)
    frame_to_csv(frame, args.out, cfg.header_comments("simulate"))
    n = len(frame)
    print(f"wrote {args.out}: {n} samples, {n / frame.sample_rate:.1f} s, {len(frame.segments)} maneuvers")
    return EXIT_OK


def cmd_tune_filter(args):
    cfg = _config(args)
    if args.seed is not None:
        cfg.data["filters"]["pso"]["seed"] = args.seed
    _, (_, val, test) = _splits(cfg, args)
    frame, suffix = (test, "_testtuned") if args.allow_test_tuning else (val, "")
    if frame is None:
        raise SchemaError("empty-split", "tuning split has no maneuvers")
    spec = next(iter(tune_baselines(cfg, frame, (args.variant,), suffix).values()))
    doc = json.loads(spec.to_json())
    doc["provenance"] = _provenance(cfg, "tune-filter", tuned_on="test" if args.allow_test_tuning else "validation")
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    shift = "" if spec.shift is None else f" shift={spec.shift}"
    print(f"{spec.label}: order={spec.order} cutoff={spec.cutoff_hz:.4f} Hz{shift} "
          f"{'test' if args.allow_test_tuning else 'validation'} MAE={spec.mae:.6f} m/s")
    return EXIT_OK


def cmd_hpo(args):
    cfg = _config(args)
    hpo = cfg.data["hpo"]
    if args.workers is not None:
        hpo["workers"] = args.workers
    if args.num_samples is not None:
        hpo["num_samples"] = args.num_samples
    if args.max_epochs is not None:
        hpo["max_resource"] = args.max_epochs
    _, (tr, va, _) = _splits(cfg, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    est, best, trials, _ = run_hpo(cfg, args.arch, tr, va, out / "search_log.ndjson", cfg.asha_config())
    doc = {"provenance": _provenance(cfg, "hpo", arch=args.arch.upper()), "best_trial": best.trial_id,
           "trials": [t.as_dict() for t in trials]}
    (out / "trials.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    est.save(out / "best.ckpt", {"provenance": _provenance(cfg, "hpo", trial_id=best.trial_id)})
    print(f"{len(trials)} trials, best #{best.trial_id} {best.config} val_loss={best.best_val_loss:.6g}")
    return EXIT_OK


def cmd_train(args):
    cfg = _config(args)
    arch = args.arch.upper()
    if args.epochs is not None:
        cfg.data["train"][arch]["max_epochs"] = args.epochs
    _, (tr, va, _) = _splits(cfg, args)
    est = train_model(cfg, arch, tr, va)
    est.save(args.out, {"provenance": _provenance(cfg, "train", arch=arch)})
    print(f"{arch} hidden={est.hidden_size}: best val loss {est.best_val_loss_:.6g} at epoch {est.best_epoch_}")
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _config(args)
    _, (_, _, test) = _splits(cfg, args)
    estimators = {}
    for path in args.models:
        est = VirtualWheelSpeedSensor.load(path)
        estimators[est.spec_.arch] = est
    filters = {}
    for path in args.filters:
        spec = FilterSpec.load(path)
        filters[spec.label or f"LPF_{spec.variant}"] = spec
    comments = cfg.header_comments("evaluate")
    results = evaluate_frame(cfg, test, estimators, filters, args.out, comments=comments)
    for row in ranking_rows(results):
        print(f"{row[0]:<24} {row[1]:<7} " + ("" if row[1] == "absent" else f"MAE={row[2]:.6f} m/s"))
    if args.check:
        ok, msgs = check_ordering(results)
        still_ok, still_msgs = check_standstill(results)
        for m in msgs + still_msgs:
            print(m)
        if not ok:
            return EXIT_CHECK
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config(args)
    ev = cfg.section("eval")
    arch = ev["sweep_arch"].upper()
    tcfg = cfg.train_config(arch)
    tcfg.max_epochs = args.epochs if args.epochs is not None else ev["sweep_epochs"]
    _, (tr, va, _) = _splits(cfg, args)
    sizes = args.sizes or ev["sweep_sizes"]
    repeats = args.repeats if args.repeats is not None else ev["sweep_repeats"]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    rows = hidden_size_sweep(tr, va, sizes, repeats, tcfg, arch, ev["sweep_seed"], out=args.out,
                             comments=cfg.header_comments("sweep"))
    for h in sizes:
        r = next(r for r in rows if r[0] == h)
        print(f"hidden {h:>4}: mean val loss {r[5]:.6g}, {r[6]} FLOPs/step")
    return EXIT_OK


def cmd_flops(args):
    if not Path(args.ckpt).is_file():
        raise SchemaError("missing-input", f"checkpoint not found: {args.ckpt}")
    est = VirtualWheelSpeedSensor.load(args.ckpt)
    f = flops_per_step(est.spec_)
    u = ecu_budget(f, args.rate, args.clock, args.flops_per_cycle)
    print(f"{f} FLOPs/step")
    print(f"{100 * u:.4f}% utilization at {args.rate:g} Hz, {args.clock / 1e6:g} MHz, "
          f"{args.flops_per_cycle:g} FLOP/cycle")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="wheelspeed", description="Neural virtual wheel-speed sensor lab")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate the synthetic dataset CSV")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--duration-min", type=float)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("tune-filter", help="PSO-tune a low-pass baseline")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--variant", choices=(CAUSAL, ACAUSAL), required=True)
    s.add_argument("--allow-test-tuning", action="store_true")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_tune_filter)

    s = sub.add_parser("hpo", help="ASHA hyperparameter search")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--arch", type=str.upper, choices=("GRU", "LSTM", "TCN"), required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--num-samples", type=int)
    s.add_argument("--max-epochs", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_hpo)

    s = sub.add_parser("train", help="train one model with the configured hyperparameters")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--arch", type=str.upper, choices=("GRU", "LSTM", "TCN"), default="GRU")
    s.add_argument("--epochs", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score all methods on the test split")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--models", nargs="*", default=[])
    s.add_argument("--filters", nargs="*", default=[])
    s.add_argument("--out", required=True)
    s.add_argument("--check", action="store_true", help="exit 4 unless the method ordering holds")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="hidden-size sweep")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--sizes", type=int, nargs="*")
    s.add_argument("--repeats", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("flops", help="FLOPs per step and ECU utilization of a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--rate", type=float, default=50.0)
    s.add_argument("--clock", type=float, default=300e6)
    s.add_argument("--flops-per-cycle", type=float, default=1.0)
    s.set_defaults(func=cmd_flops)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SchemaError, WheelSpeedError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
