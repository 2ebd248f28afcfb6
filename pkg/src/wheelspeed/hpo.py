"""Asynchronous successive halving over hidden size, learning rate and batch size."""

from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DivergenceError, WheelSpeedError
from .nn.model import ModelSpec
from .nn.train import LARGE_LOSS, TrainConfig, train

RUNNING, STOPPED, COMPLETED = "running", "stopped", "completed"


@dataclass
class AshaConfig:
    max_resource: int = 300
    reduction_factor: int = 3
    min_resource: int = 3
    num_samples: int = 100
    seed: int = 0
    workers: int = 1
    hidden_choices: tuple = (16, 32, 48, 64, 96, 128, 160)
    lr_range: tuple = (1e-4, 1e-2)
    batch_choices: tuple = (16, 32, 64, 128)

    def __post_init__(self):
        self.hidden_choices = tuple(int(h) for h in self.hidden_choices)
        self.batch_choices = tuple(int(b) for b in self.batch_choices)
        self.lr_range = tuple(float(v) for v in self.lr_range)
        if self.reduction_factor < 2:
            raise WheelSpeedError("invalid-asha-config", "reduction_factor must be >= 2")
        if self.min_resource < 1 or self.min_resource > self.max_resource:
            raise WheelSpeedError("invalid-asha-config", "need 1 <= min_resource <= max_resource")
        if self.num_samples < 1 or self.workers < 1:
            raise WheelSpeedError("invalid-asha-config", "num_samples and workers must be >= 1")
        if not self.hidden_choices or not self.batch_choices:
            raise WheelSpeedError("invalid-asha-config", "empty choice set")
        if not 0 < self.lr_range[0] <= self.lr_range[1]:
            raise WheelSpeedError("invalid-asha-config", "lr_range must be positive and ordered")

    @property
    def rungs(self):
        """Rung epochs ``min_resource * eta**k`` strictly below ``max_resource``."""
        out, r = [], self.min_resource
        while r < self.max_resource:
            out.append(r)
            r *= self.reduction_factor
        return out

    def to_dict(self):
        d = asdict(self)
        for k in ("hidden_choices", "lr_range", "batch_choices"):
            d[k] = list(d[k])
        return d


@dataclass
class TrialRecord:
    trial_id: int
    config: dict
    rung_losses: dict = field(default_factory=dict)
    status: str = RUNNING
    epochs: int = 0
    best_val_loss: float = math.inf
    test_mae: float | None = None
    error: str | None = None
    result: object = field(default=None, repr=False, compare=False)

    def as_dict(self):
        return {
            "trial_id": self.trial_id,
            "config": self.config,
            "rung_losses": {str(k): v for k, v in sorted(self.rung_losses.items())},
            "status": self.status,
            "epochs": self.epochs,
            "best_val_loss": self.best_val_loss,
            "test_mae": self.test_mae,
            "error": self.error,
        }


def sample_configs(cfg: AshaConfig):
    """Seeded draws: hidden and batch uniform over their sets, lr log-uniform."""
    rng = np.random.default_rng(cfg.seed)
    lo, hi = np.log(cfg.lr_range[0]), np.log(cfg.lr_range[1])
    out = []
    for i in range(cfg.num_samples):
        out.append({
            "hidden_size": int(rng.choice(cfg.hidden_choices)),
            "lr_max": float(np.exp(rng.uniform(lo, hi))),
            "batch_size": int(rng.choice(cfg.batch_choices)),
            "seed": int(rng.integers(0, 2**31 - 1)),
        })
    return out


class _Coordinator:
    """Owns rung results and makes promotion decisions under a lock."""

    def __init__(self, cfg: AshaConfig, log_file=None):
        self.cfg = cfg
        self.rungs = set(cfg.rungs)
        self.recorded = {r: [] for r in cfg.rungs}
        self.events = []
        self.lock = threading.Lock()
        self.log_file = log_file

    def report(self, trial: TrialRecord, epoch, loss):
        """Record ``loss`` at a rung epoch; return whether the trial continues."""
        if epoch not in self.rungs:
            return True
        with self.lock:
            snapshot = self.recorded[epoch] + [loss]
            cutoff = float(np.quantile(snapshot, 1.0 / self.cfg.reduction_factor))
            promoted = bool(loss <= cutoff)
            self.recorded[epoch].append(loss)
            trial.rung_losses[epoch] = loss
            event = {"event": "rung", "trial_id": trial.trial_id, "rung": epoch, "loss": loss,
                     "snapshot": snapshot, "cutoff": cutoff, "promoted": promoted}
            self._log(event)
        return promoted

    def finish(self, trial: TrialRecord):
        with self.lock:
            self._log({"event": "end", "trial_id": trial.trial_id, "status": trial.status,
                       "epochs": trial.epochs, "best_val_loss": trial.best_val_loss})

    def _log(self, event):
        self.events.append(event)
        if self.log_file is not None:
            self.log_file.write(json.dumps(event) + "\n")
            self.log_file.flush()


def replay_promotions(events, reduction_factor):
    """Re-check every logged promotion against its decision-time snapshot."""
    for ev in events:
        if ev.get("event") != "rung":
            continue
        cutoff = float(np.quantile(ev["snapshot"], 1.0 / reduction_factor))
        if ev["promoted"] != (ev["loss"] <= cutoff):
            return False
    return True


def frame_trainer(arch, train_frame, val_frame, base: TrainConfig | None = None, tcn_layers=5, kernel_size=3):
    """Trainer running the real training loop on a pair of frames.

    The returned callable ``(config, max_epochs, callback)`` yields a
    :class:`~wheelspeed.nn.train.TrainResult`.
    """
    base = base or TrainConfig()

    def run(config, max_epochs, callback):
        spec = ModelSpec(arch, hidden_size=config["hidden_size"], tcn_layers=tcn_layers,
                         kernel_size=kernel_size, seed=config["seed"])
        tcfg = replace(base, lr_max=config["lr_max"], batch_size=config["batch_size"],
                       max_epochs=max_epochs, seed=config["seed"])
        result = train(spec, tcfg, train_frame, val_frame, callback)
        result.spec, result.train_config = spec, tcfg
        return result

    return run


def asha_search(arch, cfg: AshaConfig, splits=None, trainer=None, base_train=None, log_path=None):
    """Run the search and return ``(best_trial, trials, events)``.

    Either ``splits`` (an object with ``train``/``validation`` frames, or a
    pair) or a custom ``trainer(config, max_epochs, callback)`` must be
    given. A trainer returns an object with ``best_val_loss`` and
    ``history`` (one entry per epoch run). The loss reported at a rung is the
    best validation loss seen up to that epoch, matching the weights a
    trial would keep. Promotion at a rung compares against every loss
    recorded there so far, without waiting for other trials.
    """
    if trainer is None:
        if splits is None:
            raise WheelSpeedError("missing-splits", "asha_search needs splits or a trainer")
        tr, va = (splits.train, splits.validation) if hasattr(splits, "train") else splits[:2]
        trainer = frame_trainer(arch, tr, va, base_train)
    configs = sample_configs(cfg)
    trials = [TrialRecord(i, c) for i, c in enumerate(configs)]
    log_file = open(log_path, "w") if log_path is not None else None
    coord = _Coordinator(cfg, log_file)

    def run_trial(trial):
        best = [math.inf]

        def callback(epoch, val_loss):
            best[0] = min(best[0], val_loss)
            trial.epochs = epoch
            return coord.report(trial, epoch, best[0])

        try:
            res = trainer(trial.config, cfg.max_resource, callback)
        except DivergenceError as exc:
            trial.status, trial.best_val_loss, trial.error = STOPPED, LARGE_LOSS, str(exc)
            # a crash before the next rung still counts against that rung
            pending = [r for r in cfg.rungs if r > trial.epochs]
            if pending:
                coord.report(trial, pending[0], LARGE_LOSS)
        else:
            trial.epochs = len(res.history)
            trial.best_val_loss = float(res.best_val_loss)
            if trial.epochs >= cfg.max_resource:
                trial.status, trial.result = COMPLETED, res
            else:
                trial.status = STOPPED
        coord.finish(trial)

    try:
        if cfg.workers == 1:
            for t in trials:
                run_trial(t)
        else:
            with ThreadPoolExecutor(cfg.workers) as pool:
                list(pool.map(run_trial, trials))
    finally:
        if log_file is not None:
            log_file.close()

    done = [t for t in trials if t.status == COMPLETED and t.best_val_loss < LARGE_LOSS]
    if not done:
        raise WheelSpeedError("all-trials-failed", f"{len(trials)} trials, none completed")
    best = min(done, key=lambda t: (t.best_val_loss, t.trial_id))
    for t in trials:
        if t is not best:
            t.result = None
    return best, trials, coord.events


def total_epochs(trials):
    return sum(t.epochs for t in trials)
