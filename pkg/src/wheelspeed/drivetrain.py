"""Two-inertia EV drivetrain with shaft compliance and gear backlash.

State (wheel-side coordinates for the shaft):

* motor angle/speed ``theta_m, omega_m`` (motor shaft, rad and rad/s)
* mean driven-wheel angle/speed ``theta_w, omega_w``
* shaft twist ``phi = theta_m / i - theta_w``

Shaft torque is a dead-zone spring-damper::

    T_s = 0                                   if |phi| <= alpha
    T_s = k_s (phi - alpha sign(phi)) + c_s dphi  otherwise

The motor sees ``T_s / i``; the axle (two wheels plus the vehicle mass
reflected through the tire radius) sees ``T_s`` minus friction brake, rolling
resistance and aerodynamic drag. Tires do not slip, so ``v = r omega_w``;
left/right wheel speeds follow from the yaw rate.

RK4 step bound: the torsional mode has ``omega_n = sqrt(k_s / J_red)`` with
``J_red`` the reduced inertia of ``J_m i^2`` against the axle inertia; RK4 is
stable for ``omega_n dt < 2.8``. The defaults give ``omega_n ~ 40 rad/s``
(6.4 Hz), so ``dt = 1 ms`` sits two orders of magnitude inside the bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DivergenceError, WheelSpeedError
from .signal import SignalFrame, zoh_resample

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


OUTPUT_RATE = 50.0
#: Sampling period used to hold the surface disturbance constant.
_NOISE_HOLD = 0.01


@dataclass
class DrivetrainParams:
    """Physical parameters. ``J_w`` is the rotating inertia of one wheel; the
    vehicle mass is reflected onto the axle in addition to it."""

    J_m: float = 0.05
    J_w: float = 1.2
    k_s: float = 8000.0
    c_s: float = 15.0
    backlash_half: float = 0.02
    gear_ratio: float = 10.0
    tire_radius: float = 0.35
    vehicle_mass: float = 2000.0
    track_width: float = 1.6
    roll_resist: float = 200.0
    drag_coeff: float = 0.35

    def __post_init__(self):
        for name in ("J_m", "J_w", "k_s", "gear_ratio", "tire_radius", "vehicle_mass", "track_width"):
            if not getattr(self, name) > 0:
                raise WheelSpeedError("invalid-params", f"{name} must be > 0")
        for name in ("backlash_half", "c_s", "roll_resist", "drag_coeff"):
            if not getattr(self, name) >= 0:
                raise WheelSpeedError("invalid-params", f"{name} must be >= 0")

    @property
    def axle_inertia(self):
        """Inertia seen by the shaft on the wheel side, kg m^2."""
        return 2.0 * self.J_w + self.vehicle_mass * self.tire_radius**2

    @property
    def torsional_frequency(self):
        """Undamped torsional natural frequency in Hz (backlash closed)."""
        jm = self.J_m * self.gear_ratio**2
        jr = jm * self.axle_inertia / (jm + self.axle_inertia)
        return math.sqrt(self.k_s / jr) / (2 * math.pi)

    def to_dict(self):
        return asdict(self)


@dataclass
class DrivetrainState:
    theta_m: float = 0.0
    omega_m: float = 0.0
    theta_w: float = 0.0
    omega_w: float = 0.0
    v: float = 0.0
    twist: float = 0.0

    @classmethod
    def from_row(cls, params: DrivetrainParams, row):
        th_m, om_m, th_w, om_w = (float(x) for x in row)
        return cls(th_m, om_m, th_w, om_w, params.tire_radius * om_w, th_m / params.gear_ratio - th_w)


def _knots(knots, name):
    arr = np.asarray(knots if len(knots) else [(0.0, 0.0)], dtype=float).reshape(-1, 2)
    if np.any(np.diff(arr[:, 0]) < 0):
        raise WheelSpeedError("invalid-script", f"{name} knot times must be non-decreasing")
    return arr


@dataclass
class ManeuverScript:
    """Open-loop inputs for one maneuver.

    Profiles are piecewise-linear ``(t, value)`` knots held constant outside
    their range. ``drive_torque_profile`` is motor-shaft torque in N m,
    ``brake_torque_profile`` the total friction brake torque on the driven
    axle, ``surface_noise_std`` the std of a road-load torque disturbance at
    the axle, ``impulse_events`` angular impulses ``(t, N m s)`` on the axle.
    """

    name: str
    duration: float
    drive_torque_profile: list = field(default_factory=list)
    brake_torque_profile: list = field(default_factory=list)
    yaw_rate_profile: list = field(default_factory=list)
    surface_noise_std: float = 0.0
    impulse_events: list = field(default_factory=list)

    def __post_init__(self):
        if not self.duration > 0:
            raise WheelSpeedError("invalid-script", f"{self.name}: duration must be > 0")
        for attr in ("drive_torque_profile", "brake_torque_profile", "yaw_rate_profile"):
            k = _knots(getattr(self, attr), attr)
            if len(getattr(self, attr)) and (k[0, 0] < 0 or k[-1, 0] > self.duration + 1e-9):
                raise WheelSpeedError("invalid-script", f"{self.name}: {attr} knots outside [0, duration]")
        if np.any(_knots(self.brake_torque_profile, "brake")[:, 1] < 0):
            raise WheelSpeedError("invalid-script", f"{self.name}: brake torque must be >= 0")
        if self.surface_noise_std < 0:
            raise WheelSpeedError("invalid-script", f"{self.name}: surface_noise_std must be >= 0")

    def sample(self, attr, t):
        k = _knots(getattr(self, attr), attr)
        return np.interp(t, k[:, 0], k[:, 1])

    def to_dict(self):
        d = asdict(self)
        for key in ("drive_torque_profile", "brake_torque_profile", "yaw_rate_profile", "impulse_events"):
            d[key] = [[float(a), float(b)] for a, b in d[key]]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@njit(cache=True)
def _shaft_torque(phi, dphi, k_s, c_s, alpha):
    if phi > alpha:
        return k_s * (phi - alpha) + c_s * dphi
    if phi < -alpha:
        return k_s * (phi + alpha) + c_s * dphi
    return 0.0


@njit(cache=True)
def _deriv(th_m, om_m, th_w, om_w, drive, brake, dist, p):
    J_m, J_ax, k_s, c_s, alpha, gr, r, roll, drag = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]
    phi = th_m / gr - th_w
    dphi = om_m / gr - om_w
    ts = _shaft_torque(phi, dphi, k_s, c_s, alpha)
    acc_m = (drive - ts / gr) / J_m
    v = r * om_w
    active = ts + dist - r * drag * v * abs(v)
    friction = brake + r * roll
    if om_w > 0.0:
        acc_w = (active - friction) / J_ax
    elif om_w < 0.0:
        acc_w = (active + friction) / J_ax
    elif abs(active) <= friction:
        acc_w = 0.0
    elif active > 0.0:
        acc_w = (active - friction) / J_ax
    else:
        acc_w = (active + friction) / J_ax
    return om_m, acc_m, om_w, acc_w


@njit(cache=True)
def _integrate(x0, drive, brake, dist, impulse, p, dt):
    n = drive.shape[0]
    out = np.empty((n, 4))
    th_m, om_m, th_w, om_w = x0[0], x0[1], x0[2], x0[3]
    J_ax = p[1]
    for k in range(n):
        out[k, 0] = th_m
        out[k, 1] = om_m
        out[k, 2] = th_w
        out[k, 3] = om_w
        d, b, w = drive[k], brake[k], dist[k]
        a1, b1, c1, e1 = _deriv(th_m, om_m, th_w, om_w, d, b, w, p)
        h = 0.5 * dt
        a2, b2, c2, e2 = _deriv(th_m + h * a1, om_m + h * b1, th_w + h * c1, om_w + h * e1, d, b, w, p)
        a3, b3, c3, e3 = _deriv(th_m + h * a2, om_m + h * b2, th_w + h * c2, om_w + h * e2, d, b, w, p)
        a4, b4, c4, e4 = _deriv(th_m + dt * a3, om_m + dt * b3, th_w + dt * c3, om_w + dt * e3, d, b, w, p)
        th_m += dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        om_m += dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        th_w += dt / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)
        om_new = om_w + dt / 6.0 * (e1 + 2 * e2 + 2 * e3 + e4)
        # friction cannot push the axle through standstill
        if om_w * om_new < 0.0 or (om_w == 0.0 and e1 == 0.0):
            om_new = 0.0
        om_w = om_new + impulse[k] / J_ax
        if om_w * om_new < 0.0:
            om_w = 0.0
        if not (math.isfinite(om_m) and math.isfinite(om_w) and abs(om_m) < 1e6):
            out[k, 0] = np.nan
            return out, k
    return out, -1


def simulate(params: DrivetrainParams, script: ManeuverScript, dt=0.001, seed=0,
             output_rate=OUTPUT_RATE, initial_speed=0.0) -> SignalFrame:
    """Integrate one maneuver with fixed-step RK4 and return 50 Hz truth channels.

    Channels: ``omega_EM`` (motor), ``omega_RL`` / ``omega_RR`` (true wheel
    speeds), ``M_drive``, ``M_brake``, ``v`` (vehicle speed) and ``twist``.
    ``initial_speed`` is the starting vehicle speed in m/s, with the
    drivetrain unloaded.
    """
    if not (0 < dt <= 0.02):
        raise WheelSpeedError("invalid-dt", f"dt={dt} outside (0, 0.02]")
    n = int(round(script.duration / dt))
    t = np.arange(n) * dt
    drive = script.sample("drive_torque_profile", t)
    brake = script.sample("brake_torque_profile", t)
    yaw = script.sample("yaw_rate_profile", t)

    rng = np.random.default_rng(seed)
    if script.surface_noise_std > 0:
        hold = max(1, int(round(_NOISE_HOLD / dt)))
        raw = rng.standard_normal(n // hold + 1) * script.surface_noise_std
        dist = np.repeat(raw, hold)[:n]
    else:
        dist = np.zeros(n)
    impulse = np.zeros(n)
    for te, mag in script.impulse_events:
        k = min(n - 1, max(0, int(te / dt)))
        impulse[k] += mag

    p = np.array([params.J_m, params.axle_inertia, params.k_s, params.c_s, params.backlash_half,
                  params.gear_ratio, params.tire_radius, params.roll_resist, params.drag_coeff])
    om_w0 = initial_speed / params.tire_radius
    x0 = np.array([0.0, om_w0 * params.gear_ratio, 0.0, om_w0])
    states, bad = _integrate(x0, drive, brake, dist, impulse, p, float(dt))
    if bad >= 0:
        raise DivergenceError("unstable-integration", f"{script.name} at step {bad}", index=int(bad))

    om_w = states[:, 3]
    v = params.tire_radius * om_w
    half = 0.5 * yaw * params.track_width
    fine = SignalFrame(
        1.0 / dt,
        {
            "omega_EM": states[:, 1],
            "omega_RL": (v - half) / params.tire_radius,
            "omega_RR": (v + half) / params.tire_radius,
            "M_drive": drive,
            "M_brake": brake,
            "v": v,
            "twist": states[:, 0] / params.gear_ratio - states[:, 2],
        },
        [(script.name, 0, n)],
    )
    return zoh_resample(fine, output_rate)


def mechanical_energy(params: DrivetrainParams, states):
    """Kinetic plus shaft potential energy for ``(n, 4)`` state rows."""
    states = np.asarray(states)
    phi = states[:, 0] / params.gear_ratio - states[:, 2]
    gap = np.maximum(np.abs(phi) - params.backlash_half, 0.0)
    return (0.5 * params.J_m * states[:, 1] ** 2 + 0.5 * params.axle_inertia * states[:, 3] ** 2
            + 0.5 * params.k_s * gap**2)


def integrate_states(params: DrivetrainParams, x0, n_steps, dt=0.001):
    """Free response (no inputs) from state ``x0``; used by the energy check."""
    p = np.array([params.J_m, params.axle_inertia, params.k_s, params.c_s, params.backlash_half,
                  params.gear_ratio, params.tire_radius, params.roll_resist, params.drag_coeff])
    z = np.zeros(n_steps)
    states, bad = _integrate(np.asarray(x0, dtype=float), z, z, z, z, p, float(dt))
    if bad >= 0:
        raise DivergenceError("unstable-integration", f"step {bad}", index=int(bad))
    return states


# ---------------------------------------------------------------------------
# scenario suite


class _ScriptBuilder:
    """Appends open-loop phases and tracks a rigid-body speed estimate so
    phases can be sized (time to reach a speed, time to stop)."""

    def __init__(self, params: DrivetrainParams, rng, duration):
        self.p = params
        self.rng = rng
        self.duration = duration
        self.t = 0.0
        self.v = 0.0
        self.drive = [(0.0, 0.0)]
        self.brake = [(0.0, 600.0)]
        self.yaw = [(0.0, 0.0)]
        self.impulses = []

    @property
    def full(self):
        return self.t >= self.duration

    def _level(self, knots):
        return knots[-1][1]

    def _accel(self, drive, brake):
        p = self.p
        m_eff = p.axle_inertia / p.tire_radius**2 + p.J_m * (p.gear_ratio / p.tire_radius) ** 2
        force = drive * p.gear_ratio / p.tire_radius - p.drag_coeff * self.v**2
        resist = brake / p.tire_radius + p.roll_resist
        if self.v > 0 or force > resist:
            return (force - resist) / m_eff
        return 0.0

    def _advance(self, t_end, h=0.02):
        d = np.asarray(self.drive)
        b = np.asarray(self.brake)
        t = self.t
        while t < t_end - 1e-12:
            step = min(h, t_end - t)
            a = self._accel(np.interp(t, d[:, 0], d[:, 1]), np.interp(t, b[:, 0], b[:, 1]))
            self.v = max(0.0, self.v + a * step)
            t += step
        self.t = t_end

    def segment(self, dur, drive=None, brake=None, yaw=None, ramp=0.3):
        """Ramp the given channels to new levels over ``ramp`` s, then hold until ``dur``."""
        t0, t1 = self.t, self.t + max(dur, ramp)
        for knots, level in ((self.drive, drive), (self.brake, brake), (self.yaw, yaw)):
            cur = self._level(knots)
            if level is None:
                level = cur
            knots.append((t0, cur))
            knots.append((t0 + ramp, level))
            knots.append((t1, level))
        self._advance(t1)

    def cruise_torque(self, v):
        p = self.p
        return p.tire_radius * (p.roll_resist + p.drag_coeff * v**2) / p.gear_ratio

    def accelerate_to(self, v_target, torque, ramp=0.3, limit=30.0):
        """Hold ``torque`` with brakes released until the planner reaches ``v_target``."""
        self.segment(ramp, drive=torque, brake=0.0, ramp=ramp)
        t_stop = self.t + limit
        while self.v < v_target and self.t < t_stop and not self.full:
            self.segment(0.1, ramp=0.0)

    def stop(self, brake_torque, ramp=0.3, hold=2.0, hold_brake=600.0):
        """Release drive, brake to standstill, keep a holding brake for ``hold`` s."""
        self.segment(ramp, drive=0.0, brake=brake_torque, ramp=ramp)
        guard = self.t + 60.0
        while self.v > 0 and self.t < guard:
            self.segment(0.1, ramp=0.0)
        self.segment(0.5, ramp=0.0)
        self.segment(hold, brake=hold_brake, yaw=0.0, ramp=0.2)

    def impulse(self, mag):
        self.impulses.append((self.t, float(mag)))

    def build(self, name, noise):
        dur = self.duration

        def clip(knots):
            k = np.asarray(knots)
            keep = [(float(a), float(b)) for a, b in k if a < dur]
            keep.append((dur, float(np.interp(dur, k[:, 0], k[:, 1]))))
            return keep

        return ManeuverScript(name, dur, clip(self.drive), clip(self.brake), clip(self.yaw),
                              float(noise), [(t, m) for t, m in self.impulses if t < dur])


def _tipin(b, torque, rng):
    b.segment(rng.uniform(2.0, 4.0), drive=0.0, brake=600.0)
    b.segment(0.3, brake=0.0, ramp=0.3)
    b.segment(rng.uniform(2.0, 5.0), drive=torque, ramp=rng.uniform(0.15, 0.5))
    b.segment(rng.uniform(1.0, 3.0), drive=0.0, ramp=rng.uniform(0.15, 0.4))
    b.stop(rng.uniform(1200.0, 2500.0), hold=rng.uniform(1.5, 3.0))


def _tip_in_out(b, rng):
    b.segment(2.0, drive=0.0, brake=600.0)
    b.accelerate_to(rng.uniform(3.0, 6.0), 60.0)
    for _ in range(rng.integers(4, 9)):
        b.segment(rng.uniform(0.8, 2.0), drive=rng.uniform(40.0, 90.0), ramp=rng.uniform(0.1, 0.25))
        b.segment(rng.uniform(0.8, 2.0), drive=-rng.uniform(10.0, 30.0), ramp=rng.uniform(0.1, 0.25))
    b.stop(rng.uniform(1500.0, 2500.0))


def _emergency(b, v_target, rng):
    b.segment(2.0, drive=0.0, brake=600.0)
    b.accelerate_to(v_target, rng.uniform(100.0, 140.0))
    b.segment(rng.uniform(1.0, 3.0), drive=b.cruise_torque(b.v), ramp=0.4)
    b.stop(rng.uniform(5000.0, 6500.0), ramp=0.12, hold=rng.uniform(2.0, 3.0))


def _curb(b, rng):
    b.segment(2.0, drive=0.0, brake=600.0)
    b.segment(0.3, brake=0.0)
    b.accelerate_to(rng.uniform(0.8, 1.5), 25.0)
    b.segment(rng.uniform(1.0, 2.0), drive=b.cruise_torque(b.v) + 8.0)
    b.impulse(-rng.uniform(60.0, 200.0))
    b.segment(0.4, drive=rng.uniform(40.0, 70.0), ramp=0.2)
    b.segment(rng.uniform(1.0, 2.0), drive=b.cruise_torque(b.v), ramp=0.3)
    b.impulse(-rng.uniform(40.0, 120.0))
    b.segment(rng.uniform(1.0, 2.0))
    b.stop(rng.uniform(800.0, 1500.0))


def _corner(b, rng):
    b.segment(2.0, drive=0.0, brake=600.0)
    v = rng.uniform(3.0, 6.0)
    b.accelerate_to(v, rng.uniform(50.0, 90.0))
    yaw = rng.choice([-1.0, 1.0]) * rng.uniform(0.15, 0.4) * min(1.0, v / 4.0)
    b.segment(rng.uniform(6.0, 12.0), drive=b.cruise_torque(b.v), yaw=yaw, ramp=1.0)
    b.segment(rng.uniform(2.0, 4.0), drive=b.cruise_torque(b.v) + rng.uniform(-5.0, 15.0), ramp=0.5)
    b.segment(1.0, yaw=0.0, ramp=1.0)
    b.stop(rng.uniform(1200.0, 2500.0))


def _crawl(b, rng):
    # creep torque winds the drivetrain up against the held brake before release
    b.segment(rng.uniform(1.5, 3.0), drive=0.0, brake=900.0)
    b.segment(rng.uniform(0.8, 1.5), drive=rng.uniform(8.0, 15.0), ramp=0.3)
    b.segment(0.3, brake=0.0, ramp=0.3)
    b.accelerate_to(rng.uniform(0.3, 0.6), b._level(b.drive), ramp=0.0, limit=15.0)
    b.segment(rng.uniform(1.0, 3.0), drive=b.cruise_torque(b.v), ramp=0.4)
    b.stop(rng.uniform(400.0, 900.0), hold=rng.uniform(1.5, 3.0), hold_brake=900.0)


MANEUVER_TYPES = (
    "tipin_low", "tipin_mid", "tipin_high", "tip_in_out", "ebrake_slow", "ebrake_mid", "ebrake_fast",
    "curb_impact", "cornering", "gravel", "crawl",
)


def _fill(kind, b, rng):
    if kind.startswith("tipin") or kind == "gravel":
        torque = {"tipin_low": (20.0, 40.0), "tipin_mid": (50.0, 80.0),
                  "tipin_high": (90.0, 140.0), "gravel": (30.0, 90.0)}[kind]
        _tipin(b, rng.uniform(*torque), rng)
    elif kind == "tip_in_out":
        _tip_in_out(b, rng)
    elif kind.startswith("ebrake"):
        _emergency(b, {"ebrake_slow": 3.0, "ebrake_mid": 6.0, "ebrake_fast": 10.0}[kind] * rng.uniform(0.9, 1.1), rng)
    elif kind == "curb_impact":
        _curb(b, rng)
    elif kind == "cornering":
        _corner(b, rng)
    else:
        _crawl(b, rng)


def standard_scenario_suite(seed=0, total_duration=3600.0, n_maneuvers=None, params=None,
                            asphalt_noise=5.0, gravel_noise=80.0):
    """Maneuver scripts cycling through :data:`MANEUVER_TYPES`.

    The total duration is split evenly over ``n_maneuvers`` scripts (default:
    one per ~120 s, at least 12). Each script repeats its maneuver cycle,
    every cycle starting and ending at standstill, until its duration is
    filled.
    """
    params = params or DrivetrainParams()
    if n_maneuvers is None:
        n_maneuvers = max(12, int(round(total_duration / 120.0)))
    dur = total_duration / n_maneuvers
    scripts = []
    for k, ss in enumerate(np.random.SeedSequence(seed).spawn(n_maneuvers)):
        rng = np.random.default_rng(ss)
        kind = MANEUVER_TYPES[k % len(MANEUVER_TYPES)]
        b = _ScriptBuilder(params, rng, dur)
        while not b.full:
            _fill(kind, b, rng)
        noise = gravel_noise if kind == "gravel" else asphalt_noise
        scripts.append(b.build(f"{k:02d}_{kind}", noise))
    return scripts


def simulate_suite(params: DrivetrainParams, scripts, dt=0.001, seed=0):
    """Simulate every script and concatenate into one truth frame."""
    from .signal import concat_frames

    seeds = np.random.SeedSequence(seed).spawn(len(scripts))
    return concat_frames(simulate(params, s, dt, int(q.generate_state(1)[0])) for s, q in zip(scripts, seeds))
