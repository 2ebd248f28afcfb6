"""Low-pass filter baselines on the motor-speed signal, tuned by particle swarm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import WheelSpeedError
from .filters import MAX_ORDER, MAX_SHIFT, FilterSpec, butterworth_design, filter_causal, filter_zero_phase
from .pso import INTEGER, Dim, SearchSpace, pso_minimize
from .signal import SignalFrame, rot_to_translational
from .validation import check_features, check_groups

CAUSAL, ACAUSAL = "causal", "acausal"


@dataclass
class PSOConfig:
    particles: int = 30
    iterations: int = 100
    seed: int = 0
    workers: int = 1
    order_range: tuple = (1, MAX_ORDER)
    cutoff_range: tuple = (0.5, 24.0)
    shift_range: tuple = (-MAX_SHIFT, MAX_SHIFT)


def filter_runs(signal, runs, spec: FilterSpec):
    """Apply ``spec`` independently within each maneuver run."""
    b, a = spec.coefficients()
    out = np.empty_like(signal, dtype=float)
    for _, s, e in runs:
        seg = signal[s:e]
        if spec.shift is None:
            out[s:e] = filter_causal(seg, b, a)
        else:
            out[s:e] = filter_zero_phase(seg, b, a, spec.shift)
    return out


def _search_space(variant, cfg: PSOConfig, sample_rate):
    hi_cut = min(cfg.cutoff_range[1], 0.49 * sample_rate)
    dims = [Dim("order", cfg.order_range[0], cfg.order_range[1], INTEGER),
            Dim("cutoff_hz", cfg.cutoff_range[0], hi_cut)]
    if variant == ACAUSAL:
        dims.append(Dim("shift", cfg.shift_range[0], cfg.shift_range[1], INTEGER))
    return SearchSpace(dims)


def tune_filter_arrays(motor_wheel_speed, reference, runs, variant, cfg: PSOConfig, sample_rate=50.0):
    """PSO over (order, cutoff[, shift]) minimising MAE versus ``reference``.

    ``motor_wheel_speed`` and ``reference`` are single-channel, same units.
    """
    if variant not in (CAUSAL, ACAUSAL):
        raise WheelSpeedError("invalid-variant", variant)
    x = np.asarray(motor_wheel_speed, dtype=float)
    ref = np.asarray(reference, dtype=float)
    space = _search_space(variant, cfg, sample_rate)

    def to_spec(p):
        shift = int(p[2]) if variant == ACAUSAL else None
        return FilterSpec(int(p[0]), float(p[1]), shift, sample_rate)

    def objective(p):
        try:
            y = filter_runs(x, runs, to_spec(p))
        except WheelSpeedError:
            return np.inf
        return float(np.mean(np.abs(y - ref)))

    res = pso_minimize(objective, space, cfg.particles, cfg.iterations, cfg.seed, cfg.workers)
    spec = to_spec(res.best_point)
    spec.mae = res.best_cost
    return spec, res


def motor_equivalent_speed(frame: SignalFrame, tire_radius, gear_ratio):
    """Motor speed expressed as tire-road speed, m/s."""
    return rot_to_translational(frame["omega_EM_SP"], tire_radius, gear_ratio)


def reference_mean_speed(frame: SignalFrame, tire_radius):
    ref = 0.5 * (frame["omega_RL_ref"] + frame["omega_RR_ref"])
    return rot_to_translational(ref, tire_radius)


def tune_filter(objective_frame: SignalFrame, variant=CAUSAL, optimizer_cfg: PSOConfig | None = None,
                tire_radius=0.35, gear_ratio=10.0):
    """Tune a Butterworth low-pass on the motor speed against the reference-wheel mean.

    Returns the :class:`FilterSpec`; its ``mae`` field holds the achieved
    objective in m/s.
    """
    cfg = optimizer_cfg or PSOConfig()
    x = motor_equivalent_speed(objective_frame, tire_radius, gear_ratio)
    ref = reference_mean_speed(objective_frame, tire_radius)
    spec, _ = tune_filter_arrays(x, ref, objective_frame.segments, variant, cfg, objective_frame.sample_rate)
    return spec


class LowPassBaseline(RegressorMixin, BaseEstimator):
    """Butterworth low-pass of the motor speed as a single-output speed estimate.

    ``X`` columns follow the network input order; only ``motor_column`` is
    used. ``fit`` tunes order, cutoff (and shift for ``variant="acausal"``)
    with PSO so the filtered, gear-ratio-scaled motor speed matches the mean
    of the two ``y`` columns. Predictions are in the units of ``y``.

    ``groups`` marks maneuvers; filtering restarts in each one.
    """

    def __init__(self, variant=CAUSAL, gear_ratio=10.0, sample_rate=50.0, motor_column=2,
                 particles=30, iterations=100, random_state=0, workers=1):
        self.variant = variant
        self.gear_ratio = gear_ratio
        self.sample_rate = sample_rate
        self.motor_column = motor_column
        self.particles = particles
        self.iterations = iterations
        self.random_state = random_state
        self.workers = workers

    def _signal(self, X):
        X = check_features(X)
        return X[:, self.motor_column] / self.gear_ratio

    def fit(self, X, y, groups=None):
        x = self._signal(X)
        y = check_features(y)
        if y.shape[0] != x.shape[0]:
            raise WheelSpeedError("target-length-mismatch")
        ref = y.mean(axis=1)
        runs = check_groups(groups, x.shape[0])
        cfg = PSOConfig(self.particles, self.iterations, self.random_state, self.workers)
        self.filter_spec_, self.search_ = tune_filter_arrays(x, ref, runs, self.variant, cfg, self.sample_rate)
        self.n_features_in_ = X.shape[1] if hasattr(X, "shape") else np.asarray(X).shape[1]
        return self

    def predict(self, X, groups=None):
        check_is_fitted(self)
        x = self._signal(X)
        return filter_runs(x, check_groups(groups, x.shape[0]), self.filter_spec_)

    def score(self, X, y, groups=None):
        """Negative MAE against the mean of the ``y`` columns."""
        y = check_features(y)
        return -float(np.mean(np.abs(self.predict(X, groups) - y.mean(axis=1))))

    @classmethod
    def from_spec(cls, spec: FilterSpec, gear_ratio=10.0, motor_column=2):
        est = cls(spec.variant, gear_ratio, spec.sample_rate, motor_column)
        est.filter_spec_ = spec
        est.n_features_in_ = None
        return est


def design_check(spec: FilterSpec):
    """Poles of the designed filter, for stability assertions."""
    _, a = butterworth_design(spec.order, spec.cutoff_hz, spec.sample_rate)
    return np.roots(a)
