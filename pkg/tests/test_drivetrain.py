import dataclasses

import numpy as np
import pytest

from wheelspeed.drivetrain import (MANEUVER_TYPES, DrivetrainParams, ManeuverScript, integrate_states,
                                   mechanical_energy, simulate, standard_scenario_suite)
from wheelspeed.errors import DivergenceError, WheelSpeedError

P = DrivetrainParams()


def test_torsional_frequency_observable_at_50hz():
    assert 5.0 <= P.torsional_frequency <= 15.0


def test_params_validated():
    with pytest.raises(WheelSpeedError, match="invalid-params"):
        DrivetrainParams(k_s=0.0)
    with pytest.raises(WheelSpeedError, match="invalid-params"):
        DrivetrainParams(backlash_half=-0.1)


def test_script_validated():
    with pytest.raises(WheelSpeedError, match="invalid-script"):
        ManeuverScript("x", 1.0, brake_torque_profile=[(0.0, -1.0)])
    with pytest.raises(WheelSpeedError, match="invalid-script"):
        ManeuverScript("x", 1.0, drive_torque_profile=[(0.5, 1.0), (0.2, 1.0)])
    s = ManeuverScript("x", 2.0, [(0.0, 1.0), (2.0, 3.0)], impulse_events=[(1.0, 5.0)])
    assert ManeuverScript.from_dict(s.to_dict()).to_dict() == s.to_dict()


def test_zero_inputs_stay_at_rest():
    f = simulate(P, ManeuverScript("rest", 3.0))
    assert len(f) == 150 and f.sample_rate == 50.0
    for c in ("omega_EM", "omega_RL", "omega_RR", "v"):
        assert np.all(f[c] == 0.0)


def test_invalid_dt():
    with pytest.raises(WheelSpeedError, match="invalid-dt"):
        simulate(P, ManeuverScript("x", 1.0), dt=0.0)


def test_divergence_reports_step():
    stiff = dataclasses.replace(P, k_s=1e9)
    with pytest.raises(DivergenceError, match="unstable-integration") as info:
        simulate(stiff, ManeuverScript("x", 2.0, [(0.0, 100.0)]), dt=0.02)
    assert info.value.index is not None


def test_steady_state_twist_matches_force_balance():
    p = dataclasses.replace(P, backlash_half=0.0, c_s=2000.0, roll_resist=0.0, drag_coeff=0.0)
    drive = 50.0
    f = simulate(p, ManeuverScript("const", 10.0, [(0.0, drive)]))
    i = p.gear_ratio
    # common acceleration a: J_m i a = T - T_s / i and J_ax a = T_s
    ts = i * drive * p.axle_inertia / (p.axle_inertia + p.J_m * i**2)
    assert f["twist"][-1] == pytest.approx(ts / p.k_s, rel=1e-3)
    w = f["v"][-1] / p.tire_radius
    assert f["omega_EM"][-1] / i == pytest.approx(w, rel=1e-3)


def _divergence(params, torque=80.0):
    script = ManeuverScript("step", 4.0, [(0.0, 0.0), (1.0, 0.0), (1.001, torque)])
    f = simulate(params, script)
    return np.max(np.abs(f["omega_EM"] / params.gear_ratio - f["v"] / params.tire_radius))


def test_backlash_increases_transient_excursion():
    assert _divergence(dataclasses.replace(P, backlash_half=0.02)) > _divergence(
        dataclasses.replace(P, backlash_half=0.0))


def test_divergence_monotone_in_stiffness():
    d = [_divergence(dataclasses.replace(P, backlash_half=0.0, c_s=50.0, k_s=k)) for k in (2e3, 8e3, 3.2e4)]
    assert d[0] > d[1] > d[2]


def test_energy_conserved_without_losses():
    p = dataclasses.replace(P, c_s=0.0, roll_resist=0.0, drag_coeff=0.0)
    # shaft pre-twisted beyond the backlash gap, vehicle rolling
    x0 = [0.08 * p.gear_ratio, 100.0, 0.0, 10.0]
    states = integrate_states(p, x0, 10_000)
    e = mechanical_energy(p, states)
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-3


def test_brake_never_reverses_vehicle():
    f = simulate(P, ManeuverScript("brake", 6.0, brake_torque_profile=[(0.0, 1500.0)]), initial_speed=5.0)
    assert np.all(f["v"] >= 0.0)
    assert f["v"][0] > 4.9 and f["v"][-1] == 0.0


def test_yaw_splits_left_right():
    f = simulate(P, ManeuverScript("turn", 3.0, yaw_rate_profile=[(0.0, 0.2)]), initial_speed=5.0)
    np.testing.assert_allclose(f["omega_RR"] - f["omega_RL"], 0.2 * P.track_width / P.tire_radius)


def test_suite_contents():
    scripts = standard_scenario_suite(seed=0)
    assert len(scripts) >= 12
    assert sum(s.duration for s in scripts) == pytest.approx(3600.0)
    kinds = {s.name.split("_", 1)[1] for s in scripts}
    assert kinds == set(MANEUVER_TYPES)
    assert any(np.any(np.asarray(s.yaw_rate_profile)[:, 1] != 0) for s in scripts if s.yaw_rate_profile)
    gravel = [s for s in scripts if "gravel" in s.name]
    assert all(g.surface_noise_std > max(s.surface_noise_std for s in scripts if s not in gravel) for g in gravel)
    assert any(s.impulse_events for s in scripts)


def test_suite_deterministic():
    a = standard_scenario_suite(seed=4, total_duration=240.0)
    b = standard_scenario_suite(seed=4, total_duration=240.0)
    assert [s.to_dict() for s in a] == [s.to_dict() for s in b]


def test_suite_frames(small_dataset):
    truth, _ = small_dataset
    assert len(truth) == 180 * 50
    corner = truth.segment(next(m for m in truth.maneuver_ids if "cornering" in m))
    assert np.max(np.abs(corner["omega_RL"] - corner["omega_RR"])) > 0.1
    crawl = truth.segment(next(m for m in truth.maneuver_ids if "crawl" in m))
    assert np.max(crawl["v"]) < 0.8333
    assert np.max(crawl["v"]) > 0.1
