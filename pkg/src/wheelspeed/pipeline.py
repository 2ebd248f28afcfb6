"""End-to-end stages: simulate, split, tune baselines, search/train, evaluate."""

from __future__ import annotations

import numpy as np

from .baselines import ACAUSAL, CAUSAL, filter_runs, motor_equivalent_speed, tune_filter
from .config import ExperimentConfig
from .drivetrain import simulate_suite, standard_scenario_suite
from .estimator import VirtualWheelSpeedSensor
from .evaluate import compare_all
from .hpo import asha_search, frame_trainer
from .nn.train import train
from .sensors import degrade_frame
from .signal import INPUT_CHANNELS, TARGET_CHANNELS, SignalFrame, rot_to_translational, split_by_maneuver, \
    split_frames


def generate_dataset(cfg: ExperimentConfig, duration_s=None) -> SignalFrame:
    """Simulated suite passed through the sensor models (9-column dataset frame)."""
    sim, sens = cfg.section("sim"), cfg.section("sensors")
    params = cfg.drivetrain_params()
    duration = sim["duration_s"] if duration_s is None else duration_s
    scripts = standard_scenario_suite(sim["seed"], duration, sim["n_maneuvers"], params,
                                      sim["asphalt_noise"], sim["gravel_noise"])
    truth = simulate_suite(params, scripts, sim["dt"], sim["seed"])
    return degrade_frame(truth, cfg.encoder("sp"), cfg.encoder("ref"), sens["motor_noise_std"], sens["seed"])


def split_dataset(cfg: ExperimentConfig, frame: SignalFrame):
    sp = cfg.section("split")
    split = split_by_maneuver(frame, sp["fractions"], sp["seed"])
    return split, split_frames(frame, split)


def tune_baselines(cfg: ExperimentConfig, tuning_frame, variants=(CAUSAL, ACAUSAL), label_suffix=""):
    p = cfg.drivetrain_params()
    out = {}
    for v in variants:
        spec = tune_filter(tuning_frame, v, cfg.pso_config(), p.tire_radius, p.gear_ratio)
        spec.label = f"LPF_{v}{label_suffix}"
        out[spec.label] = spec
    return out


def train_model(cfg: ExperimentConfig, arch, train_frame, val_frame, epoch_callback=None):
    spec, tcfg = cfg.model_spec(arch), cfg.train_config(arch)
    result = train(spec, tcfg, train_frame, val_frame, epoch_callback)
    return VirtualWheelSpeedSensor.from_train_result(spec, tcfg, result)


def run_hpo(cfg: ExperimentConfig, arch, train_frame, val_frame, log_path=None, asha=None):
    """ASHA search; returns ``(estimator, best_trial, trials, events)``."""
    asha = asha or cfg.asha_config()
    base = cfg.train_config(arch)
    t = cfg.section("train")[arch.upper()]
    trainer = frame_trainer(arch.upper(), train_frame, val_frame, base, t["tcn_layers"], t["kernel_size"])
    best, trials, events = asha_search(arch.upper(), asha, trainer=trainer, log_path=log_path)
    res = best.result
    est = VirtualWheelSpeedSensor.from_train_result(res.spec, res.train_config, res)
    return est, best, trials, events


def to_mps(cfg: ExperimentConfig, omega, gear_ratio=1.0):
    return rot_to_translational(omega, cfg.drivetrain_params().tire_radius, gear_ratio)


def method_predictions(cfg: ExperimentConfig, frame: SignalFrame, estimators=None, filters=None):
    """m/s predictions on ``frame`` for SP, every filter spec and every estimator."""
    p = cfg.drivetrain_params()
    preds = {"SP": to_mps(cfg, frame.stack(("omega_RL_SP", "omega_RR_SP")))}
    motor = motor_equivalent_speed(frame, p.tire_radius, p.gear_ratio)
    for label, spec in (filters or {}).items():
        preds[label] = filter_runs(motor, frame.segments, spec)
    X = frame.stack(INPUT_CHANNELS)
    groups = frame.groups()
    for name, est in (estimators or {}).items():
        preds[name] = to_mps(cfg, est.predict(X, groups))
    return preds


def evaluate_frame(cfg: ExperimentConfig, frame: SignalFrame, estimators=None, filters=None, out_dir=None,
                   timeseries=None, comments=()):
    """Score all methods on ``frame``; ``estimators`` map method names (GRU, ...) to fitted models."""
    p = cfg.drivetrain_params()
    preds = method_predictions(cfg, frame, estimators, filters)
    for m in ("LPF_causal", "LPF_acausal", "GRU", "LSTM", "TCN"):
        preds.setdefault(m, None)
    ref = to_mps(cfg, frame.stack(TARGET_CHANNELS))
    if timeseries is None:
        timeseries = cfg.section("eval")["timeseries"] or frame.maneuver_ids
    extra = {"v_SP": preds["SP"], "v_EM": motor_equivalent_speed(frame, p.tire_radius, p.gear_ratio)}
    return compare_all(ref, frame.segments, preds, out_dir, timeseries, frame.time, extra, comments)
