"""Windowed mini-batch training with RAdam and cosine annealing."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DivergenceError, WheelSpeedError
from ..preprocessing import ZScoreScaler
from ..signal import INPUT_CHANNELS, TARGET_CHANNELS, SignalFrame
from ..validation import check_groups
from .model import ModelSpec, WeightSet, _arch_module, backward, init_weights
from .optim import RAdam, cosine_lr

#: Loss recorded for a diverged run.
LARGE_LOSS = 1e12


@dataclass
class TrainConfig:
    window: int = 200
    washout: int = 50
    batch_size: int = 32
    lr_max: float = 3e-3
    lr_min: float = 1e-5
    max_epochs: int = 300
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.0
    clip_norm: float | None = 5.0
    overlap: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if not 0 <= self.washout < self.window:
            raise WheelSpeedError("invalid-train-config", "need 0 <= washout < window")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise WheelSpeedError("invalid-train-config", "max_epochs and batch_size must be >= 1")
        if not 0 <= self.overlap < 1:
            raise WheelSpeedError("invalid-train-config", "overlap must be in [0, 1)")

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class TrainResult:
    weights: WeightSet
    history: list = field(default_factory=list)
    x_scaler: ZScoreScaler | None = None
    y_scaler: ZScoreScaler | None = None
    best_val_loss: float = np.inf
    best_epoch: int = 0
    stopped_early: bool = False

    def __iter__(self):
        # unpacks as (best_weights, history)
        return iter((self.weights, self.history))

    @property
    def epochs_run(self):
        return len(self.history)


def make_windows(runs, window, overlap=0.5):
    """Start indices of full windows inside each run; windows never span runs."""
    stride = max(1, int(round(window * (1.0 - overlap))))
    starts = []
    for _, s, e in runs:
        if e - s < window:
            raise WheelSpeedError("window-exceeds-maneuver", f"maneuver of {e - s} samples < window {window}")
        starts.extend(range(s, e - window + 1, stride))
    return np.asarray(starts, dtype=np.int64)


def pad_runs(X, runs):
    """Stack variable-length runs into ``(R, T_max, F)`` plus a validity mask."""
    t_max = max(e - s for _, s, e in runs)
    out = np.zeros((len(runs), t_max, X.shape[1]))
    mask = np.zeros((len(runs), t_max))
    for i, (_, s, e) in enumerate(runs):
        out[i, :e - s] = X[s:e]
        mask[i, :e - s] = 1.0
    return out, mask


def predict_runs(spec, weights, X, runs, batch=16):
    """Causal prediction over whole runs, each starting from zero state."""
    mod = _arch_module(spec)
    out = np.empty((X.shape[0], spec.output_size))
    order = sorted(range(len(runs)), key=lambda i: runs[i][2] - runs[i][1])
    for k in range(0, len(order), batch):
        chunk = [runs[i] for i in order[k:k + batch]]
        xb, _ = pad_runs(X, chunk)
        yb, _ = mod.forward(spec, weights, xb)
        for i, (_, s, e) in enumerate(chunk):
            out[s:e] = yb[i, :e - s]
    return out


def run_loss(spec, weights, X, Y, runs, washout):
    """MSE over whole runs, skipping the first ``washout`` samples of each."""
    pred = predict_runs(spec, weights, X, runs)
    mask = np.zeros(X.shape[0], dtype=bool)
    for _, s, e in runs:
        mask[s + washout:e] = True
    return float(np.mean((pred[mask] - Y[mask]) ** 2))


def _frame_arrays(frame: SignalFrame):
    return frame.stack(INPUT_CHANNELS), frame.stack(TARGET_CHANNELS), list(frame.segments)


def train(spec: ModelSpec, cfg: TrainConfig, train_frame, val_frame, epoch_callback=None):
    """Train on frames holding the five input and two target channels."""
    Xt, Yt, rt = _frame_arrays(train_frame)
    Xv, Yv, rv = _frame_arrays(val_frame) if val_frame is not None else (None, None, None)
    return train_arrays(spec, cfg, Xt, Yt, rt, Xv, Yv, rv, epoch_callback)


def train_arrays(spec, cfg, X, Y, runs, X_val=None, Y_val=None, val_runs=None, epoch_callback=None):
    """Core loop on raw (un-normalized) arrays.

    ``runs`` / ``val_runs`` are ``(id, start, end)`` maneuver ranges or
    per-sample group labels. Normalization statistics come from ``X``/``Y``
    only. ``epoch_callback(epoch, val_loss)`` returning ``False`` stops
    training after that epoch. The returned weights are those with the lowest
    validation loss (training loss when no validation data is given).
    """
    if not isinstance(runs, list):
        runs = check_groups(runs, X.shape[0])
    x_scaler = ZScoreScaler().fit(X)
    y_scaler = ZScoreScaler().fit(Y)
    Xn, Yn = x_scaler.transform(X), y_scaler.transform(Y)
    has_val = X_val is not None
    if has_val:
        if not isinstance(val_runs, list):
            val_runs = check_groups(val_runs, X_val.shape[0])
        Xvn, Yvn = x_scaler.transform(X_val), y_scaler.transform(Y_val)

    starts = make_windows(runs, cfg.window, cfg.overlap)
    n_batches = int(np.ceil(len(starts) / cfg.batch_size))
    total_steps = cfg.max_epochs * n_batches
    offsets = np.arange(cfg.window)

    weights = init_weights(spec)
    opt = RAdam(weights.vector, cfg.betas, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(weights.copy(), [], x_scaler, y_scaler)
    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(len(starts))
        epoch_loss = 0.0
        for k in range(n_batches):
            idx = starts[perm[k * cfg.batch_size:(k + 1) * cfg.batch_size]][:, None] + offsets
            loss, grad = backward(spec, weights, Xn[idx], Yn[idx], cfg.washout)
            if not np.isfinite(loss):
                raise DivergenceError("diverged", f"epoch {epoch}", index=epoch)
            if cfg.clip_norm is not None:
                norm = float(np.sqrt(grad @ grad))
                if norm > cfg.clip_norm:
                    grad = grad * (cfg.clip_norm / norm)
            opt.step(grad, cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min))
            step += 1
            epoch_loss += loss * idx.shape[0]
        train_loss = epoch_loss / len(starts)
        val_loss = run_loss(spec, weights, Xvn, Yvn, val_runs, cfg.washout) if has_val else train_loss
        if not np.isfinite(val_loss):
            raise DivergenceError("diverged", f"epoch {epoch}", index=epoch)
        result.history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            result.weights = weights.copy()
        if epoch_callback is not None and epoch_callback(epoch, val_loss) is False:
            result.stopped_early = epoch < cfg.max_epochs
            break
    return result
