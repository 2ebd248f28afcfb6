"""Scikit-learn style estimator wrapping the sequence models."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import WheelSpeedError
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.model import ModelSpec, flops_per_step
from .nn.train import TrainConfig, predict_runs, train_arrays
from .validation import check_features, check_groups


class VirtualWheelSpeedSensor(RegressorMixin, BaseEstimator):
    """Fuses SP wheel speeds, motor speed and torques into two wheel-speed estimates.

    ``X`` is ``(n_samples, 5)`` in the order ``omega_RL_SP, omega_RR_SP,
    omega_EM_SP, M_drive, M_brake``; ``y`` is ``(n_samples, 2)`` reference
    wheel speeds. ``groups`` labels the maneuver of each sample: training
    windows never cross maneuvers and prediction restarts the model state at
    each maneuver. Normalization statistics are fitted on the training data
    only.

    Parameters
    ----------
    arch : {"GRU", "LSTM", "TCN"}
    hidden_size : int
        Recurrent units, or TCN channels.
    tcn_layers, kernel_size : int
        TCN depth (dilation ``2**n`` at layer ``n``) and kernel width.
    window, washout : int
        Training window length and the leading samples excluded from the loss.
    max_epochs, batch_size, lr_max, lr_min, weight_decay, clip_norm
        Optimisation settings (RAdam with cosine annealing).
    random_state : int
        Seeds weight initialisation and window shuffling.
    """

    def __init__(self, arch="GRU", hidden_size=32, tcn_layers=5, kernel_size=3, window=200, washout=50,
                 max_epochs=300, batch_size=32, lr_max=3e-3, lr_min=1e-5, weight_decay=0.0, clip_norm=5.0,
                 random_state=0):
        self.arch = arch
        self.hidden_size = hidden_size
        self.tcn_layers = tcn_layers
        self.kernel_size = kernel_size
        self.window = window
        self.washout = washout
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.lr_max = lr_max
        self.lr_min = lr_min
        self.weight_decay = weight_decay
        self.clip_norm = clip_norm
        self.random_state = random_state

    def _spec(self, n_in, n_out):
        return ModelSpec(self.arch, n_in, n_out, self.hidden_size, self.tcn_layers, self.kernel_size,
                         self.random_state)

    def _train_config(self):
        return TrainConfig(window=self.window, washout=self.washout, batch_size=self.batch_size,
                           lr_max=self.lr_max, lr_min=self.lr_min, max_epochs=self.max_epochs,
                           weight_decay=self.weight_decay, clip_norm=self.clip_norm, seed=self.random_state)

    def fit(self, X, y, groups=None, eval_set=None, epoch_callback=None):
        """Train; ``eval_set=(X_val, y_val, groups_val)`` selects the best epoch."""
        X = check_features(X)
        y = check_features(y)
        if y.shape[0] != X.shape[0]:
            raise WheelSpeedError("target-length-mismatch", f"{X.shape[0]} samples vs {y.shape[0]} targets")
        runs = check_groups(groups, X.shape[0])
        val = (None, None, None)
        if eval_set is not None:
            Xv, yv = check_features(eval_set[0], X.shape[1]), check_features(eval_set[1], y.shape[1])
            gv = eval_set[2] if len(eval_set) > 2 else None
            val = (Xv, yv, check_groups(gv, Xv.shape[0]))
        self.spec_ = self._spec(X.shape[1], y.shape[1])
        result = train_arrays(self.spec_, self._train_config(), X, y, runs, *val, epoch_callback=epoch_callback)
        self._set_fitted(result.weights, result.x_scaler, result.y_scaler)
        self.history_ = result.history
        self.best_val_loss_ = result.best_val_loss
        self.best_epoch_ = result.best_epoch
        return self

    def _set_fitted(self, weights, x_scaler, y_scaler):
        self.weights_ = weights
        self.x_scaler_ = x_scaler
        self.y_scaler_ = y_scaler
        self.n_features_in_ = self.spec_.input_size

    def predict(self, X, groups=None):
        check_is_fitted(self, "weights_")
        X = check_features(X, self.spec_.input_size)
        runs = check_groups(groups, X.shape[0])
        pred = predict_runs(self.spec_, self.weights_, self.x_scaler_.transform(X), runs)
        return self.y_scaler_.inverse_transform(pred)

    @property
    def flops_per_step_(self):
        check_is_fitted(self, "weights_")
        return flops_per_step(self.spec_)

    def save(self, path, extra=None):
        check_is_fitted(self, "weights_")
        info = {"estimator_params": self.get_params()}
        info.update(extra or {})
        save_checkpoint(path, self.spec_, self.weights_, self.x_scaler_, self.y_scaler_, info)

    @classmethod
    def load(cls, path):
        spec, weights, xs, ys, extra = load_checkpoint(path)
        params = dict(extra.get("estimator_params", {}))
        params.update(arch=spec.arch, hidden_size=spec.hidden_size, tcn_layers=spec.tcn_layers,
                      kernel_size=spec.kernel_size, random_state=spec.seed)
        est = cls(**params)
        est.spec_ = spec
        est._set_fitted(weights, xs, ys)
        est.checkpoint_extra_ = extra
        return est

    @classmethod
    def from_train_result(cls, spec: ModelSpec, cfg: TrainConfig, result):
        est = cls(spec.arch, spec.hidden_size, spec.tcn_layers, spec.kernel_size, cfg.window, cfg.washout,
                  cfg.max_epochs, cfg.batch_size, cfg.lr_max, cfg.lr_min, cfg.weight_decay, cfg.clip_norm,
                  spec.seed)
        est.spec_ = spec
        est._set_fitted(result.weights, result.x_scaler, result.y_scaler)
        est.history_ = result.history
        est.best_val_loss_ = result.best_val_loss
        est.best_epoch_ = result.best_epoch
        return est

