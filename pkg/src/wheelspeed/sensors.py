"""Sensor models turning simulated truth into production-grade measurements."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import WheelSpeedError
from .signal import CSV_COLUMNS, SignalFrame

FREQUENCY_COUNT = "frequency_count"
PERIOD_MEASURE = "period_measure"

#: Truth channels that :func:`degrade_frame` consumes.
TRUTH_CHANNELS = ("omega_RL", "omega_RR", "omega_EM", "M_drive", "M_brake")


@dataclass
class EncoderConfig:
    """Incremental wheel encoder.

    ``frequency_count`` counts ticks in a trailing ``window`` (seconds);
    ``period_measure`` inverts the spacing of the last two ticks. Either mode
    reads 0 once no tick has arrived for ``min_speed_timeout`` seconds.
    ``quantize_output`` optionally rounds readings to a fixed rad/s step.
    """

    ticks_per_rev: int = 43
    mode: str = FREQUENCY_COUNT
    window: float = 0.1
    min_speed_timeout: float = 0.5
    quantize_output: float | None = None

    def __post_init__(self):
        if int(self.ticks_per_rev) != self.ticks_per_rev or self.ticks_per_rev < 1:
            raise WheelSpeedError("invalid-encoder", f"ticks_per_rev={self.ticks_per_rev}")
        self.ticks_per_rev = int(self.ticks_per_rev)
        if self.mode not in (FREQUENCY_COUNT, PERIOD_MEASURE):
            raise WheelSpeedError("invalid-encoder", f"mode={self.mode!r}")
        if not self.window > 0 or not self.min_speed_timeout > 0:
            raise WheelSpeedError("invalid-encoder", "window and min_speed_timeout must be > 0")
        if self.quantize_output is not None and not self.quantize_output > 0:
            raise WheelSpeedError("invalid-encoder", "quantize_output must be > 0 or None")

    @property
    def tick_angle(self):
        return 2.0 * math.pi / self.ticks_per_rev

    @property
    def speed_step(self):
        """Reading resolution in frequency-count mode, rad/s."""
        return self.tick_angle / self.window

    def displacement_per_tick(self, radius):
        return self.tick_angle * radius

    def to_dict(self):
        return asdict(self)


SP_ENCODER = EncoderConfig(ticks_per_rev=43, mode=FREQUENCY_COUNT, window=0.1, min_speed_timeout=0.5)
REF_ENCODER = EncoderConfig(ticks_per_rev=4096, mode=PERIOD_MEASURE, window=0.1, min_speed_timeout=0.5)


class _AngleTrack:
    """Wheel angle with speed linearly interpolated between samples.

    Within sample interval ``j`` (from ``t_j`` to ``t_{j+1}``) the angle is
    ``theta_j + w_j tau + q_j tau^2`` with ``q_j = (w_{j+1} - w_j) / (2 dt)``;
    the angle is non-decreasing because speeds are non-negative.
    """

    def __init__(self, speed, dt, phase):
        self.w = speed
        self.dt = dt
        self.q = np.append(np.diff(speed), 0.0) / (2.0 * dt)
        inc = 0.5 * (speed[:-1] + speed[1:]) * dt
        self.theta = phase + np.concatenate([[0.0], np.cumsum(inc)])
        self.phase = phase

    def at(self, times):
        """Angle at arbitrary times (held at the initial phase before ``t = 0``)."""
        times = np.asarray(times, dtype=float)
        n = self.theta.size
        j = np.clip(np.floor(times / self.dt).astype(np.int64), 0, n - 1)
        tau = np.clip(times - j * self.dt, 0.0, None)
        out = self.theta[j] + self.w[j] * tau + self.q[j] * tau**2
        out = np.where(times < 0, self.phase, out)
        return np.where(j == n - 1, self.theta[-1], out)

    def crossing(self, levels):
        """Earliest time each angle level is reached (``-inf`` if at/before start)."""
        levels = np.asarray(levels, dtype=float)
        j = np.searchsorted(self.theta, levels, side="left")
        out = np.full(levels.shape, -np.inf)
        ok = j > 0
        jj = j[ok] - 1
        c = levels[ok] - self.theta[jj]
        w0, q = self.w[jj], self.q[jj]
        disc = np.sqrt(np.maximum(w0 * w0 + 4.0 * q * c, 0.0))
        denom = w0 + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(denom > 0, 2.0 * c / denom, 0.0)
        out[ok] = jj * self.dt + np.clip(tau, 0.0, self.dt)
        return out


def encode_wheel_speed(true_speed, cfg: EncoderConfig, radius=None, seed=0, sample_rate=50.0):
    """Encoder reading for each sample of ``true_speed`` (rad/s).

    Ticks fall where the reconstructed wheel angle crosses multiples of the
    tick angle, offset by a seeded initial phase. A reading at sample ``k``
    only sees ticks up to ``t_k``. Direction is not sensed (the magnitude is
    integrated). ``radius`` is accepted for symmetry with the other sensor
    models and is not needed for a rad/s reading.
    """
    w = np.abs(np.asarray(true_speed, dtype=float))
    n = w.size
    if n == 0:
        return w.copy()
    dt = 1.0 / sample_rate
    delta = cfg.tick_angle
    phase = np.random.default_rng(seed).uniform(0.0, delta)
    track = _AngleTrack(w, dt, phase)
    t_read = np.arange(n) * dt
    ticks_now = np.floor(track.theta / delta)

    # tick index 0 lies below the initial phase, i.e. before the start
    last_tick = track.crossing(ticks_now * delta)
    last_tick[ticks_now < 1] = -np.inf

    if cfg.mode == FREQUENCY_COUNT:
        counts = ticks_now - np.floor(track.at(t_read - cfg.window) / delta)
        reading = counts * cfg.speed_step
    else:
        prev_tick = track.crossing((ticks_now - 1) * delta)
        prev_tick[ticks_now < 2] = -np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            spacing = last_tick - prev_tick
            reading = np.where(np.isfinite(spacing) & (spacing > 0), delta / spacing, 0.0)
    stale = (t_read - last_tick) > cfg.min_speed_timeout
    reading = np.where(stale, 0.0, reading)
    if cfg.quantize_output is not None:
        reading = np.round(reading / cfg.quantize_output) * cfg.quantize_output
    return reading


def sense_motor_speed(true_motor_speed, noise_std=0.0, seed=0):
    """High-resolution motor speed: truth plus seeded white Gaussian noise."""
    x = np.asarray(true_motor_speed, dtype=float)
    if noise_std < 0:
        raise WheelSpeedError("invalid-noise", f"noise_std={noise_std}")
    if noise_std == 0:
        return x.copy()
    return x + np.random.default_rng(seed).normal(0.0, noise_std, size=x.shape)


def degrade_frame(truth: SignalFrame, sp_cfg: EncoderConfig = SP_ENCODER, ref_cfg: EncoderConfig = REF_ENCODER,
                  motor_noise=0.05, seed=0) -> SignalFrame:
    """Build the 9-column dataset frame from simulated truth.

    Each maneuver is encoded independently (encoders restart per maneuver)
    with seeds spawned from ``seed`` by maneuver position and channel.
    """
    for name in TRUTH_CHANNELS:
        if name not in truth.channels:
            raise WheelSpeedError(f"missing-channel:{name}")
    n = len(truth)
    out = {c: np.empty(n) for c in CSV_COLUMNS[1:-1]}
    root = np.random.SeedSequence(seed)
    for seg_seq, (_, s, e) in zip(root.spawn(len(truth.segments)), truth.segments):
        seeds = [int(x.generate_state(1)[0]) for x in seg_seq.spawn(5)]
        sl = slice(s, e)
        for j, wheel in enumerate(("RL", "RR")):
            true_w = truth[f"omega_{wheel}"][sl]
            out[f"omega_{wheel}_SP"][sl] = encode_wheel_speed(true_w, sp_cfg, seed=seeds[j],
                                                              sample_rate=truth.sample_rate)
            out[f"omega_{wheel}_ref"][sl] = encode_wheel_speed(true_w, ref_cfg, seed=seeds[2 + j],
                                                               sample_rate=truth.sample_rate)
        out["omega_EM_SP"][sl] = sense_motor_speed(truth["omega_EM"][sl], motor_noise, seed=seeds[4])
    out["M_drive"][:] = truth["M_drive"]
    out["M_brake"][:] = truth["M_brake"]
    return SignalFrame(truth.sample_rate, out, list(truth.segments), truth.t0)
