"""Butterworth low-pass design and causal / zero-phase application."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .drivetrain import njit
from .errors import WheelSpeedError

MAX_ORDER = 8
MAX_SHIFT = 10


@dataclass
class FilterSpec:
    order: int
    cutoff_hz: float
    shift: int | None = None
    sample_rate: float = 50.0
    mae: float | None = None
    label: str | None = None

    def __post_init__(self):
        self.order = int(self.order)
        if self.shift is not None:
            self.shift = int(self.shift)
            if abs(self.shift) > MAX_SHIFT:
                raise WheelSpeedError("invalid-shift", f"shift={self.shift} outside [-{MAX_SHIFT}, {MAX_SHIFT}]")

    @property
    def variant(self):
        return "causal" if self.shift is None else "acausal"

    def coefficients(self):
        return butterworth_design(self.order, self.cutoff_hz, self.sample_rate)

    def apply(self, signal):
        b, a = self.coefficients()
        if self.shift is None:
            return filter_causal(signal, b, a)
        return filter_zero_phase(signal, b, a, self.shift)

    def to_json(self):
        d = {"order": self.order, "cutoff_hz": float(self.cutoff_hz)}
        if self.shift is not None:
            d["shift"] = self.shift
        d["sample_rate"] = float(self.sample_rate)
        if self.mae is not None:
            d["mae"] = float(self.mae)
        if self.label is not None:
            d["label"] = self.label
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path):
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(d["order"], d["cutoff_hz"], d.get("shift"), d.get("sample_rate", 50.0),
                   d.get("mae"), d.get("label"))


def butterworth_design(order, cutoff, sample_rate):
    """Digital low-pass Butterworth coefficients ``(b, a)`` with ``a[0] == 1``.

    Analog prototype poles ``s_k = w_a exp(j pi (2k + n - 1) / (2n))`` with
    pre-warped ``w_a = 2 fs tan(pi fc / fs)``, mapped by the bilinear
    transform; all zeros land at ``z = -1``. ``b`` is scaled for unit DC gain.
    """
    if int(order) != order or not 1 <= order <= MAX_ORDER:
        raise WheelSpeedError("unsupported-order", f"order={order}")
    order = int(order)
    if not (sample_rate > 0):
        raise WheelSpeedError("invalid-rate", f"sample_rate={sample_rate}")
    if not (cutoff > 0):
        raise WheelSpeedError("invalid-cutoff", f"cutoff={cutoff}")
    if cutoff >= sample_rate / 2:
        raise WheelSpeedError("cutoff-above-nyquist", f"cutoff={cutoff} Hz, nyquist={sample_rate / 2} Hz")
    fs2 = 2.0 * sample_rate
    wa = fs2 * math.tan(math.pi * cutoff / sample_rate)
    k = np.arange(1, order + 1)
    s_poles = wa * np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    z_poles = (fs2 + s_poles) / (fs2 - s_poles)
    a = np.real(np.poly(z_poles))
    b = np.real(np.poly(-np.ones(order)))
    b *= a.sum() / b.sum()
    return b, a


def frequency_response(b, a, freq, sample_rate):
    """Complex ``H(e^{jw})`` at ``freq`` Hz."""
    z = np.exp(-1j * 2 * np.pi * np.asarray(freq, dtype=float) / sample_rate)
    zb = np.vander(np.atleast_1d(z), len(b), increasing=True)
    za = np.vander(np.atleast_1d(z), len(a), increasing=True)
    return (zb @ b) / (za @ a)


def poles(a):
    return np.roots(a)


@njit(cache=True)
def _df2t(x, b, a, z):
    n = b.shape[0]
    y = np.empty_like(x)
    for i in range(x.shape[0]):
        xi = x[i]
        yi = b[0] * xi + (z[0] if n > 1 else 0.0)
        for j in range(n - 2):
            z[j] = z[j + 1] + b[j + 1] * xi - a[j + 1] * yi
        if n > 1:
            z[n - 2] = b[n - 1] * xi - a[n - 1] * yi
        y[i] = yi
    return y


def filter_causal(signal, b, a, zi=None):
    """Direct-form II transposed IIR filter, zero initial state by default."""
    x = np.ascontiguousarray(signal, dtype=float)
    b = np.asarray(b, dtype=float) / a[0]
    a = np.asarray(a, dtype=float) / a[0]
    n = max(len(a), len(b))
    b = np.pad(b, (0, n - len(b)))
    a = np.pad(a, (0, n - len(a)))
    z = np.zeros(max(n - 1, 1)) if zi is None else np.array(zi, dtype=float).reshape(-1)
    if z.size == 0:
        z = np.zeros(1)
    return _df2t(x, b, a, z)


def _steady_state(b, a):
    """Initial DF-II-T state for a unit step already at steady state."""
    n = max(len(a), len(b))
    b = np.pad(np.asarray(b, float) / a[0], (0, n - len(b)))
    a = np.pad(np.asarray(a, float) / a[0], (0, n - len(a)))
    m = n - 1
    if m == 0:
        return np.zeros(0)
    # z_i = sum_{k>i} (b_k - a_k), y = 1 at steady state (unit DC gain)
    return np.array([np.sum(b[i + 1:] - a[i + 1:]) for i in range(m)])


def filter_zero_phase(signal, b, a, shift=0):
    """Forward-backward filtering with odd reflection padding, then an integer shift.

    Positive ``shift`` advances the output (sample ``t`` takes the value at
    ``t + shift``); edges are held at the nearest available sample.
    """
    x = np.asarray(signal, dtype=float)
    pad = 3 * max(len(a), len(b))
    if x.size <= pad:
        raise WheelSpeedError("signal-too-short", f"{x.size} samples, need more than {pad}")
    if abs(shift) > MAX_SHIFT:
        raise WheelSpeedError("invalid-shift", f"shift={shift}")
    head = 2 * x[0] - x[pad:0:-1]
    tail = 2 * x[-1] - x[-2:-pad - 2:-1]
    ext = np.concatenate([head, x, tail])
    zi = _steady_state(b, a)
    y = filter_causal(ext, b, a, zi * ext[0])
    y = y[::-1]
    y = filter_causal(y, b, a, zi * y[0])[::-1]
    y = y[pad:pad + x.size]
    if shift:
        idx = np.clip(np.arange(x.size) + int(shift), 0, x.size - 1)
        y = y[idx]
    return y
