import json
import math

import numpy as np
import pytest
import scipy.signal as ss
from hypothesis import given, settings
from hypothesis import strategies as st

from wheelspeed.baselines import ACAUSAL, CAUSAL, LowPassBaseline, PSOConfig, design_check, tune_filter
from wheelspeed.errors import WheelSpeedError
from wheelspeed.filters import (FilterSpec, butterworth_design, filter_causal, filter_zero_phase,
                                frequency_response)
from wheelspeed.signal import INPUT_CHANNELS, TARGET_CHANNELS, SignalFrame

FS = 50.0
CUTOFFS = (1.0, 5.0, 10.0, 20.0)


def test_first_order_closed_form():
    fc = 3.0
    b, a = butterworth_design(1, fc, FS)
    k = math.tan(math.pi * fc / FS)
    np.testing.assert_allclose(b, [k / (k + 1), k / (k + 1)], rtol=1e-13)
    np.testing.assert_allclose(a, [1.0, (k - 1) / (k + 1)], rtol=1e-13)


@pytest.mark.parametrize("order", range(1, 9))
@pytest.mark.parametrize("fc", CUTOFFS)
def test_magnitude_at_cutoff_and_stability(order, fc):
    b, a = butterworth_design(order, fc, FS)
    assert abs(abs(frequency_response(b, a, fc, FS)) - 1 / math.sqrt(2)) < 1e-6
    assert b.sum() / a.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(np.roots(a))) < 1.0


@pytest.mark.parametrize("order", [1, 3, 6, 8])
def test_matches_reference_implementation(order):
    b, a = butterworth_design(order, 4.0, FS)
    b_ref, a_ref = ss.butter(order, 4.0, fs=FS)
    np.testing.assert_allclose(b, b_ref, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(a, a_ref, rtol=1e-9, atol=1e-12)
    x = np.random.default_rng(order).normal(size=400)
    np.testing.assert_allclose(filter_causal(x, b, a), ss.lfilter(b, a, x), atol=1e-10)
    np.testing.assert_allclose(filter_zero_phase(x, b, a), ss.filtfilt(b, a, x), atol=1e-10)


def test_design_errors():
    with pytest.raises(WheelSpeedError, match="unsupported-order"):
        butterworth_design(0, 1.0, FS)
    with pytest.raises(WheelSpeedError, match="unsupported-order"):
        butterworth_design(9, 1.0, FS)
    with pytest.raises(WheelSpeedError, match="cutoff-above-nyquist"):
        butterworth_design(2, 25.0, FS)


def test_causal_basics():
    b, a = butterworth_design(1, 5.0, FS)
    imp = filter_causal(np.r_[1.0, np.zeros(20)], b, a)
    np.testing.assert_allclose(imp[2:] / imp[1:-1], -a[1], rtol=1e-12)
    assert np.all(filter_causal(np.zeros(30), b, a) == 0.0)
    step = filter_causal(np.ones(200), b, a)
    assert np.all(np.diff(step) >= 0) and step[-1] == pytest.approx(1.0, abs=1e-9)
    dc = filter_causal(np.full(500, 3.0), *butterworth_design(4, 2.0, FS))
    assert dc[-1] == pytest.approx(3.0, rel=1e-9)


def test_zero_phase_sine_no_lag():
    b, a = butterworth_design(4, 5.0, FS)
    t = np.arange(2000) / FS
    x = np.sin(2 * np.pi * 1.0 * t)
    y = filter_zero_phase(x, b, a)
    mid = slice(200, -200)
    # phase via projection onto sin/cos
    s, c = np.sin(2 * np.pi * t[mid]), np.cos(2 * np.pi * t[mid])
    phase = math.atan2(np.dot(y[mid], c), np.dot(y[mid], s))
    assert abs(phase) < 0.01


@settings(max_examples=25)
@given(st.floats(-50, 50), st.integers(-10, 10), st.integers(1, 8), st.sampled_from(CUTOFFS))
def test_zero_phase_constant_any_shift(c, shift, order, fc):
    b, a = butterworth_design(order, fc, FS)
    np.testing.assert_allclose(filter_zero_phase(np.full(120, c), b, a, shift), c, atol=1e-9 * (1 + abs(c)))


def test_shift_advances():
    b, a = butterworth_design(2, 3.0, FS)
    x = np.linspace(0, 10, 300)
    y0, y3 = filter_zero_phase(x, b, a, 0), filter_zero_phase(x, b, a, 3)
    np.testing.assert_allclose(y3[20:-20], y0[23:-17], atol=1e-12)
    assert y3[-1] == y0[-1]


def test_zero_phase_too_short():
    b, a = butterworth_design(3, 3.0, FS)
    with pytest.raises(WheelSpeedError, match="signal-too-short"):
        filter_zero_phase(np.ones(12), b, a)


def _lag(x, y, max_lag=80):
    """Lag (samples) maximizing the correlation of ``y`` against ``x``; positive means ``y`` trails."""
    n = len(x)
    core = slice(max_lag, n - max_lag)
    lags = np.arange(-max_lag, max_lag + 1)
    c = [np.dot(x[core], y[max_lag + k:n - max_lag + k]) for k in lags]
    return int(lags[int(np.argmax(c))])


@pytest.mark.parametrize("order", [1, 2, 4, 8])
@pytest.mark.parametrize("fc", [1.0, 5.0, 10.0])
def test_group_delay_on_band_limited_noise(order, fc):
    rng = np.random.default_rng(order)
    noise = filter_zero_phase(rng.normal(size=6000), *butterworth_design(4, 8.0, FS))
    b, a = butterworth_design(order, fc, FS)
    assert _lag(noise, filter_zero_phase(noise, b, a)) == 0
    assert _lag(noise, filter_causal(noise, b, a)) >= 0


def test_filter_spec_json(tmp_path):
    causal = FilterSpec(3, 4.0)
    assert "shift" not in json.loads(causal.to_json()) and causal.variant == CAUSAL
    spec = FilterSpec(2, 1.5, -4, mae=0.01, label="LPF_acausal")
    spec.save(tmp_path / "f.json")
    back = FilterSpec.load(tmp_path / "f.json")
    assert (back.order, back.cutoff_hz, back.shift, back.mae, back.label) == (2, 1.5, -4, 0.01, "LPF_acausal")
    assert np.all(np.abs(design_check(spec)) < 1)


def _frame_from_motor(motor_speed_wheel, ref, gear=10.0):
    n = ref.shape[0]
    ch = {c: np.zeros(n) for c in INPUT_CHANNELS + TARGET_CHANNELS}
    ch["omega_EM_SP"] = motor_speed_wheel * gear / 0.35
    ch["omega_RL_ref"] = ref / 0.35
    ch["omega_RR_ref"] = ref / 0.35
    return SignalFrame(FS, ch, [("a", 0, n // 2), ("b", n // 2, n)])


def test_tuner_perfect_signal_acausal():
    t = np.arange(2000) / FS
    # odd reflection continues a ramp exactly, so only filter distortion remains
    v = 5.0 + 0.05 * t
    spec = tune_filter(_frame_from_motor(v, v), ACAUSAL, PSOConfig())
    assert spec.mae < 1e-9
    assert -10 <= spec.shift <= 10


def test_tuner_deterministic_and_ordering(small_dataset):
    _, data = small_dataset
    cfg = PSOConfig(particles=10, iterations=15, seed=3)
    c1, c2 = tune_filter(data, CAUSAL, cfg), tune_filter(data, CAUSAL, cfg)
    assert (c1.order, c1.cutoff_hz, c1.mae) == (c2.order, c2.cutoff_hz, c2.mae)
    assert c1.shift is None
    ac = tune_filter(data, ACAUSAL, cfg)
    assert ac.mae < c1.mae
    assert 1 <= ac.order <= 8 and 0.5 <= ac.cutoff_hz <= 24.0 and -10 <= ac.shift <= 10


def test_lowpass_estimator(small_dataset):
    _, data = small_dataset
    X, y, g = data.stack(INPUT_CHANNELS), data.stack(TARGET_CHANNELS), data.groups()
    est = LowPassBaseline("acausal", particles=8, iterations=10)
    assert est.get_params()["variant"] == "acausal"
    est.fit(X, y, g)
    pred = est.predict(X, g)
    assert pred.shape == (len(data),)
    assert -est.score(X, y / 10.0 * 10.0, g) == pytest.approx(np.mean(np.abs(pred - y.mean(1))))
    assert est.filter_spec_.mae == pytest.approx(np.mean(np.abs(pred - y.mean(1))), rel=1e-12)
