"""Ground-truth trajectory generation and synthetic IMU synthesis.

The trajectory is a sequence of phases (static hold, speed ramp, cruise,
turn), each with closed-form speed, heading-rate and pitch profiles that are
C^1 across phase boundaries (quintic smoothstep ramps). Heading and wheel
spin angle integrate in closed form; positions are integrated per sample
interval with 5-point Gauss-Legendre quadrature, so the truth is consistent
with the emitted rates to machine precision. Phase durations are quantized to
the sample interval, which makes every lap sample-identical and loop closure
exact by symmetry.

IMU synthesis evaluates exact rigid-body kinematics at each mounting: the
body IMU is fixed in the vehicle frame; a wheel IMU spins about the axle with
the rolling angle of its wheel (differential-drive wheel speeds), optionally
offset from the wheel center. Sensor errors follow the filter's model:
turn-on constant plus first-order Gauss-Markov bias, Gauss-Markov scale
factor, and white noise scaled by the square root of the sample rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .core import (
    GRAVITY,
    ROLE_BODY,
    ROLE_LEFT_WHEEL,
    ROLE_RIGHT_WHEEL,
    ImuStream,
    MountingGeometry,
    SensorErrorModel,
)
from .geom import euler_to_dcm

__all__ = [
    "TrajectorySpec",
    "VehicleTruth",
    "ImuErrorTruth",
    "generate_trajectory",
    "synthesize_imu",
    "synthesize_all",
    "default_geometries",
    "HUB_TO_VEHICLE",
]

# Wheel-IMU hub frame (spin angle zero): x along the axle toward the
# vehicle's right, z down; identical for both wheels. Forward rolling then
# spins the frame at -v/r about its own x-axis.
HUB_TO_VEHICLE = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class TrajectorySpec:
    """Parameters of the synthetic ground-truth path.

    ``shape`` is one of ``rectangular_loop``, ``oval``, ``waypoints``.
    ``total_length`` is the cruise distance over all laps (the static hold and
    speed ramps at the ends are extra). ``slope_profile`` gives one grade
    (rise over run) per straight of a loop shape; grades must cancel over a
    lap. ``aspect`` is the long-to-short side ratio of the rectangular loop.
    """

    shape: str = "rectangular_loop"
    total_length: float = 1227.0
    speed: float = 1.4
    laps: int = 5
    corner_radius: float = 2.0
    aspect: float = 2.0
    initial_heading: float = 0.0
    static_duration: float = 5.0
    accel_duration: float = 2.0
    turn_ramp_frac: float = 0.3
    turn_direction: float = -1.0  # -1 left-hand laps, +1 right-hand
    max_lateral_accel: float = 5.0
    slope_profile: Optional[tuple] = None
    waypoints: Optional[tuple] = None

    def __post_init__(self):
        if self.shape not in ("rectangular_loop", "oval", "waypoints"):
            raise ValueError(f"unknown trajectory shape {self.shape!r}")
        for name in ("total_length", "speed", "corner_radius", "aspect"):
            if not getattr(self, name) > 0:
                raise ValueError(f"TrajectorySpec.{name} must be positive")
        if self.laps < 1:
            raise ValueError("laps must be >= 1")
        if not 0.05 <= self.turn_ramp_frac <= 0.8:
            raise ValueError("turn_ramp_frac must be in [0.05, 0.8]")


@dataclass
class VehicleTruth:
    """Sampled ground truth of the vehicle frame origin (rear axle midpoint).

    ``euler`` is (roll, pitch, yaw) of the vehicle; roll is always zero (no
    banking). The derivative arrays make exact IMU synthesis possible.
    """

    t: np.ndarray
    pos: np.ndarray  # (n, 3) in the global truth frame (NED axes)
    euler: np.ndarray  # (n, 3)
    speed: np.ndarray
    yaw_rate: np.ndarray
    arc: np.ndarray  # cumulative path length, closed form
    speed_dot: np.ndarray
    yaw_acc: np.ndarray
    pitch_rate: np.ndarray
    pitch_acc: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def yaw(self) -> np.ndarray:
        return self.euler[:, 2]

    @property
    def pitch(self) -> np.ndarray:
        return self.euler[:, 1]


# --- smoothstep helpers (quintic: C^2 at both ends) ------------------------


def _s5(u):
    return ((6.0 * u - 15.0) * u + 10.0) * u**3


def _s5d(u):
    return ((30.0 * u - 60.0) * u + 30.0) * u**2


def _s5dd(u):
    return ((120.0 * u - 180.0) * u + 60.0) * u


def _s5int(u):
    # integral of _s5 from 0 to u; equals 0.5 at u = 1
    return ((u - 3.0) * u + 2.5) * u**4


@dataclass
class _Phase:
    """One closed-form trajectory segment.

    Speed ramps from v0 to v1 over the whole phase (constant if equal); the
    heading changes by dpsi via a plateau yaw rate with smoothstep ramps of
    length t_ramp at each end; pitch ramps from theta0 to theta1.
    """

    duration: float
    v0: float
    v1: float
    dpsi: float = 0.0
    t_ramp: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0

    # filled by the builder
    psi_start: float = 0.0
    arc_start: float = 0.0

    @property
    def omega(self) -> float:
        if self.dpsi == 0.0:
            return 0.0
        return self.dpsi / (self.duration - self.t_ramp)

    def speed(self, tau):
        if self.v1 == self.v0:
            return np.full_like(tau, self.v0)
        return self.v0 + (self.v1 - self.v0) * _s5(tau / self.duration)

    def speed_dot(self, tau):
        if self.v1 == self.v0:
            return np.zeros_like(tau)
        return (self.v1 - self.v0) * _s5d(tau / self.duration) / self.duration

    def arc(self, tau):
        if self.v1 == self.v0:
            return self.v0 * tau
        u = tau / self.duration
        return self.v0 * tau + (self.v1 - self.v0) * self.duration * _s5int(u)

    def _yaw_shape(self, tau):
        """Plateau window w(tau) in [0, 1] and its first two derivatives."""
        w = np.ones_like(tau)
        wd = np.zeros_like(tau)
        wdd = np.zeros_like(tau)
        tr = self.t_ramp
        if tr > 0.0:
            up = tau < tr
            u = tau[up] / tr
            w[up] = _s5(u)
            wd[up] = _s5d(u) / tr
            wdd[up] = _s5dd(u) / tr**2
            down = tau > self.duration - tr
            u = (self.duration - tau[down]) / tr
            w[down] = _s5(u)
            wd[down] = -_s5d(u) / tr
            wdd[down] = _s5dd(u) / tr**2
        return w, wd, wdd

    def yaw_rate(self, tau):
        if self.dpsi == 0.0:
            return np.zeros_like(tau)
        w, _, _ = self._yaw_shape(tau)
        return self.omega * w

    def yaw_acc(self, tau):
        if self.dpsi == 0.0:
            return np.zeros_like(tau)
        _, wd, _ = self._yaw_shape(tau)
        return self.omega * wd

    def yaw(self, tau):
        if self.dpsi == 0.0:
            return np.full_like(tau, self.psi_start)
        tr = self.t_ramp
        out = np.empty_like(tau)
        if tr > 0.0:
            up = tau < tr
            mid = (tau >= tr) & (tau <= self.duration - tr)
            down = tau > self.duration - tr
            out[up] = tr * _s5int(tau[up] / tr)
            out[mid] = 0.5 * tr + (tau[mid] - tr)
            out[down] = (self.duration - tr) - tr * _s5int(
                (self.duration - tau[down]) / tr
            )
        else:
            out = tau.copy()
        return self.psi_start + self.omega * out

    def pitch(self, tau):
        if self.theta1 == self.theta0:
            return np.full_like(tau, self.theta0)
        return self.theta0 + (self.theta1 - self.theta0) * _s5(tau / self.duration)

    def pitch_rate(self, tau):
        if self.theta1 == self.theta0:
            return np.zeros_like(tau)
        return (self.theta1 - self.theta0) * _s5d(tau / self.duration) / self.duration

    def pitch_acc(self, tau):
        if self.theta1 == self.theta0:
            return np.zeros_like(tau)
        return (self.theta1 - self.theta0) * _s5dd(tau / self.duration) / self.duration**2


def _quantize(t: float, dt: float, minimum: int = 1) -> float:
    return max(int(round(t / dt)), minimum) * dt


def _build_loop_phases(spec: TrajectorySpec, dt: float, corners: int) -> list[_Phase]:
    """Phases for the closed-loop shapes (4 corners: rectangle, 2: stadium)."""
    v = spec.speed
    turn = spec.turn_direction * (2.0 * np.pi / corners)

    # corner duration matches the nominal arc length; the yaw-rate plateau is
    # raised slightly so the ramped profile still turns the full angle
    t_corner = _quantize(abs(turn) * spec.corner_radius / v, dt, 2)
    t_ramp = _quantize(spec.turn_ramp_frac * t_corner, dt)
    if t_corner - t_ramp <= 0:
        t_ramp = t_corner - dt
    omega = abs(turn) / (t_corner - t_ramp)
    if omega * v > spec.max_lateral_accel:
        raise ValueError(
            f"corner_radius {spec.corner_radius} m too small for speed {v} m/s: "
            f"lateral acceleration {omega * v:.2f} exceeds {spec.max_lateral_accel} m/s^2"
        )

    t_accel = _quantize(spec.accel_duration, dt, 2) if spec.accel_duration > 0 else 0.0
    if t_accel % (2 * dt) > 1e-12:  # need an even number of samples (half-distance)
        t_accel += dt

    # the stop ramp past the loop-closure point consumes part of the budget
    lap_length = (spec.total_length - v * t_accel / 2.0) / spec.laps
    straight_total = lap_length - corners * v * t_corner
    if straight_total <= 0:
        raise ValueError("total_length too short for the requested corners")
    if corners == 4:
        long_len = straight_total * spec.aspect / (2.0 * (spec.aspect + 1.0))
        short_len = straight_total / (2.0 * (spec.aspect + 1.0))
        lengths = [long_len, short_len, long_len, short_len]
    else:
        lengths = [straight_total / 2.0, straight_total / 2.0]
    t_straight = [_quantize(length / v, dt, 2) for length in lengths]
    # opposite straights share a duration so the lap closes exactly
    if corners == 4:
        t_straight[2] = t_straight[0]
        t_straight[3] = t_straight[1]
    else:
        t_straight[1] = t_straight[0]

    grades = list(spec.slope_profile) if spec.slope_profile else [0.0] * corners
    if len(grades) != corners:
        raise ValueError(f"slope_profile must have {corners} entries for this shape")
    pitches = [np.arctan(g) for g in grades]  # NED pitch: positive nose-up
    # corners stay flat and opposite straights have equal durations, so climb
    # cancels exactly when opposite grades are opposite; the first straight
    # must be flat (speed ramps live there)
    if pitches[0] != 0.0:
        raise ValueError("slope_profile: the first straight must be flat")
    for i in range(corners // 2):
        if abs(pitches[i] + pitches[i + corners // 2]) > 1e-12:
            raise ValueError(
                "slope_profile: opposite straights must carry opposite grades "
                "so each lap closes in height"
            )

    if v * t_accel / 2.0 >= v * t_straight[0]:
        raise ValueError("accel_duration too long for the first straight")
    if spec.static_duration > 0 and t_accel == 0.0:
        raise ValueError("a static hold requires a nonzero accel_duration")

    def corner() -> _Phase:
        return _Phase(t_corner, v, v, dpsi=turn, t_ramp=t_ramp)

    def straight(i: int) -> list[_Phase]:
        duration = t_straight[i]
        if pitches[i] == 0.0:
            return [_Phase(duration, v, v)]
        t_pr = min(_quantize(1.5, dt), _quantize(duration / 4.0, dt))
        return [
            _Phase(t_pr, v, v, theta0=0.0, theta1=pitches[i]),
            _Phase(duration - 2.0 * t_pr, v, v, theta0=pitches[i], theta1=pitches[i]),
            _Phase(t_pr, v, v, theta0=pitches[i], theta1=0.0),
        ]

    phases: list[_Phase] = []
    if spec.static_duration > 0:
        phases.append(_Phase(_quantize(spec.static_duration, dt), 0.0, 0.0))
    for lap in range(spec.laps):
        for i in range(corners):
            if lap == 0 and i == 0 and t_accel > 0.0:
                # first straight: speed ramp plus cruise covering its length
                phases.append(_Phase(t_accel, 0.0, v))
                phases.append(_Phase(t_straight[0] - t_accel / 2.0, v, v))
            else:
                phases.extend(straight(i))
            phases.append(corner())
    if t_accel > 0.0:
        # stop past the loop-closure point, overshooting by half the ramp
        phases.append(_Phase(t_accel, v, 0.0))
        if spec.static_duration > 0:
            phases.append(_Phase(_quantize(spec.static_duration, dt), 0.0, 0.0))
    return phases


def _build_waypoint_phases(spec: TrajectorySpec, dt: float) -> list[_Phase]:
    if spec.waypoints is None or len(spec.waypoints) < 2:
        raise ValueError("waypoints shape needs at least two waypoints")
    pts = np.asarray(spec.waypoints, dtype=float)
    legs = np.diff(pts, axis=0)
    lengths = np.hypot(legs[:, 0], legs[:, 1])
    if np.any(lengths <= 0):
        raise ValueError("duplicate consecutive waypoints")
    headings = np.arctan2(legs[:, 1], legs[:, 0])
    v = spec.speed

    phases: list[_Phase] = []
    if spec.static_duration > 0:
        phases.append(_Phase(_quantize(spec.static_duration, dt), 0.0, 0.0))
    t_accel = 0.0
    if spec.accel_duration > 0:
        t_accel = _quantize(spec.accel_duration, dt, 2)
        if t_accel % (2 * dt) > 1e-12:
            t_accel += dt
        phases.append(_Phase(t_accel, 0.0, v))
    for i, length in enumerate(lengths):
        cut = v * t_accel / 2.0 if i == 0 else 0.0
        duration = _quantize((length - cut) / v, dt, 1)
        phases.append(_Phase(duration, v, v))
        if i < len(lengths) - 1:
            turn = float(np.arctan2(
                np.sin(headings[i + 1] - headings[i]),
                np.cos(headings[i + 1] - headings[i]),
            ))
            if abs(turn) > 1e-12:
                t_corner = _quantize(abs(turn) * spec.corner_radius / v, dt, 2)
                t_ramp = _quantize(spec.turn_ramp_frac * t_corner, dt)
                if t_corner - t_ramp <= 0:
                    t_ramp = t_corner - dt
                if abs(turn) / (t_corner - t_ramp) * v > spec.max_lateral_accel:
                    raise ValueError("corner_radius too small for speed continuity")
                phases.append(_Phase(t_corner, v, v, dpsi=turn, t_ramp=t_ramp))
    return phases


_GL_NODES = np.array(
    [-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640]
)
_GL_WEIGHTS = np.array(
    [0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891]
)


def generate_trajectory(spec: TrajectorySpec, dt: float) -> VehicleTruth:
    """Sample the closed-form trajectory at interval ``dt``.

    The returned truth covers ``[0, T]`` inclusive; all phase boundaries fall
    on sample instants. Positions are exact (Gauss-Legendre per interval) and
    cumulative arc length is closed form.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if spec.shape == "rectangular_loop":
        phases = _build_loop_phases(spec, dt, 4)
    elif spec.shape == "oval":
        phases = _build_loop_phases(spec, dt, 2)
    else:
        phases = _build_waypoint_phases(spec, dt)

    psi = spec.initial_heading
    arc = 0.0
    for ph in phases:
        ph.psi_start = psi
        ph.arc_start = arc
        psi += ph.dpsi
        arc += ph.arc(np.array([ph.duration]))[0]

    counts = [int(round(ph.duration / dt)) for ph in phases]
    n = sum(counts) + 1
    t = np.arange(n) * dt
    cols = {
        name: np.empty(n)
        for name in (
            "speed",
            "speed_dot",
            "yaw",
            "yaw_rate",
            "yaw_acc",
            "pitch",
            "pitch_rate",
            "pitch_acc",
            "arc",
        )
    }
    pos_inc = np.zeros((n, 3))

    k = 0
    for ph, cnt in zip(phases, counts):
        tau = np.arange(cnt) * dt
        sl = slice(k, k + cnt)
        cols["speed"][sl] = ph.speed(tau)
        cols["speed_dot"][sl] = ph.speed_dot(tau)
        cols["yaw"][sl] = ph.yaw(tau)
        cols["yaw_rate"][sl] = ph.yaw_rate(tau)
        cols["yaw_acc"][sl] = ph.yaw_acc(tau)
        cols["pitch"][sl] = ph.pitch(tau)
        cols["pitch_rate"][sl] = ph.pitch_rate(tau)
        cols["pitch_acc"][sl] = ph.pitch_acc(tau)
        cols["arc"][sl] = ph.arc_start + ph.arc(tau)

        # exact interval displacement via 5-point Gauss-Legendre
        nodes = tau[:, None] + (0.5 + 0.5 * _GL_NODES[None, :]) * dt  # (cnt, 5)
        vq = ph.speed(nodes)
        psq = ph.yaw(nodes)
        thq = ph.pitch(nodes)
        ct = np.cos(thq)
        dirs = np.stack((ct * np.cos(psq), ct * np.sin(psq), -np.sin(thq)), axis=-1)
        pos_inc[k + 1 : k + cnt + 1] += np.einsum(
            "kq,kqi->ki", vq * _GL_WEIGHTS[None, :] * (0.5 * dt), dirs
        )
        k += cnt

    # final endpoint values (tau = duration of the last phase)
    last = phases[-1]
    tau_end = np.array([last.duration])
    cols["speed"][-1] = last.speed(tau_end)[0]
    cols["speed_dot"][-1] = last.speed_dot(tau_end)[0]
    cols["yaw"][-1] = last.yaw(tau_end)[0]
    cols["yaw_rate"][-1] = last.yaw_rate(tau_end)[0]
    cols["yaw_acc"][-1] = last.yaw_acc(tau_end)[0]
    cols["pitch"][-1] = last.pitch(tau_end)[0]
    cols["pitch_rate"][-1] = last.pitch_rate(tau_end)[0]
    cols["pitch_acc"][-1] = last.pitch_acc(tau_end)[0]
    cols["arc"][-1] = last.arc_start + last.arc(tau_end)[0]

    pos = np.cumsum(pos_inc, axis=0)
    euler = np.stack((np.zeros(n), cols["pitch"], cols["yaw"]), axis=1)
    return VehicleTruth(
        t=t,
        pos=pos,
        euler=euler,
        speed=cols["speed"],
        yaw_rate=cols["yaw_rate"],
        arc=cols["arc"],
        speed_dot=cols["speed_dot"],
        yaw_acc=cols["yaw_acc"],
        pitch_rate=cols["pitch_rate"],
        pitch_acc=cols["pitch_acc"],
    )


# --- IMU synthesis ----------------------------------------------------------


@dataclass(frozen=True)
class ImuErrorTruth:
    """Realized sensor errors of one synthetic stream (for oracle tests)."""

    gyro_bias: np.ndarray  # (n, 3) total bias incl. turn-on constant
    accel_bias: np.ndarray
    gyro_sf: np.ndarray
    accel_sf: np.ndarray


@njit(cache=True)
def _gm_series(out, decay, drive, normals):
    """First-order Gauss-Markov recursion seeded from stationarity."""
    n = out.shape[0]
    out[0] = normals[0] * drive / np.sqrt(1.0 - decay * decay)
    for k in range(1, n):
        out[k] = decay * out[k - 1] + drive * normals[k]


def _gm(rng, n, sigma, tau, dt):
    decay = np.exp(-dt / tau)
    drive = sigma * np.sqrt(1.0 - decay**2)
    out = np.empty((n, 3))
    normals = rng.standard_normal((n, 3))
    for a in range(3):
        _gm_series(out[:, a], decay, drive, np.ascontiguousarray(normals[:, a]))
    return out


def _vehicle_rates(truth: VehicleTruth):
    """Vehicle angular velocity and acceleration in v-frame axes (roll = 0)."""
    th = truth.pitch
    st, ct = np.sin(th), np.cos(th)
    psid, thd = truth.yaw_rate, truth.pitch_rate
    psidd, thdd = truth.yaw_acc, truth.pitch_acc
    w = np.stack((-psid * st, thd, psid * ct), axis=1)
    wd = np.stack(
        (-psidd * st - psid * thd * ct, thdd, psidd * ct - psid * thd * st), axis=1
    )
    return w, wd


def _origin_acceleration(truth: VehicleTruth):
    th, ps = truth.pitch, truth.yaw
    st, ct = np.sin(th), np.cos(th)
    sp, cp = np.sin(ps), np.cos(ps)
    v, vd = truth.speed, truth.speed_dot
    psid, thd = truth.yaw_rate, truth.pitch_rate
    dirs = np.stack((ct * cp, ct * sp, -st), axis=1)
    ddirs_dpsi = np.stack((-ct * sp, ct * cp, np.zeros_like(st)), axis=1)
    ddirs_dth = np.stack((-st * cp, -st * sp, -ct), axis=1)
    return vd[:, None] * dirs + v[:, None] * (
        psid[:, None] * ddirs_dpsi + thd[:, None] * ddirs_dth
    )


def _vehicle_dcms(truth: VehicleTruth):
    th, ps = truth.pitch, truth.yaw
    st, ct = np.sin(th), np.cos(th)
    sp, cp = np.sin(ps), np.cos(ps)
    n = len(truth)
    r = np.empty((n, 3, 3))
    # Rz(yaw) @ Ry(pitch), roll = 0
    r[:, 0, 0] = cp * ct
    r[:, 0, 1] = -sp
    r[:, 0, 2] = cp * st
    r[:, 1, 0] = sp * ct
    r[:, 1, 1] = cp
    r[:, 1, 2] = sp * st
    r[:, 2, 0] = -st
    r[:, 2, 1] = 0.0
    r[:, 2, 2] = ct
    return r


def _point_acceleration(truth, w_v, wd_v, r_v, a_origin, rot_v):
    """Acceleration of a point fixed at r_v in the vehicle frame."""
    term = np.cross(wd_v, r_v[None, :]) + np.cross(w_v, np.cross(w_v, r_v[None, :]))
    return a_origin + np.einsum("nij,nj->ni", rot_v, term)


def wheel_center_forward_speed(truth: VehicleTruth, pos_v: np.ndarray) -> np.ndarray:
    """Longitudinal v-frame speed of a wheel center at lateral offset pos_v[1]."""
    return truth.speed - truth.yaw_rate * np.cos(truth.pitch) * pos_v[1]


def synthesize_imu(
    truth: VehicleTruth,
    geom: MountingGeometry,
    err: Optional[SensorErrorModel],
    seed: Optional[int] = None,
    *,
    gravity: float = GRAVITY,
    initial_spin: float = 0.0,
    constant_gyro_bias: Optional[np.ndarray] = None,
    constant_accel_bias: Optional[np.ndarray] = None,
    return_errors: bool = False,
):
    """Synthesize one IMU stream from vehicle truth.

    With ``err=None`` or ``seed=None`` the stream is error-free (the optional
    deterministic constant biases are still applied). Raises if the spin rate
    a wheel IMU must measure exceeds the configured gyro range.
    """
    n = len(truth)
    dt = truth.dt
    g_n = np.array([0.0, 0.0, gravity])
    rot_v = _vehicle_dcms(truth)
    w_v, wd_v = _vehicle_rates(truth)
    a_origin = _origin_acceleration(truth)

    if geom.role == ROLE_BODY:
        c_bv = geom.imu_to_vehicle.matrix
        gyro = w_v @ c_bv  # == C_bv^T w_v row-wise
        a_imu = _point_acceleration(truth, w_v, wd_v, geom.pos_v, a_origin, rot_v)
        c_bn = np.einsum("nij,jk->nik", rot_v, c_bv)
        accel = np.einsum("nji,nj->ni", c_bn, a_imu - g_n[None, :])
    else:
        # wheel spin: alpha_dot = -v_wheel / r with the x-axis along +y_v
        v_wheel = truth.speed - truth.yaw_rate * np.cos(truth.pitch) * geom.pos_v[1]
        spin_rate = -v_wheel / geom.wheel_radius
        # closed-form spin angle: arc length and heading integrate exactly
        # (yaw rate is nonzero only on flat segments, so cos(pitch) = 1 there)
        psi_change = truth.yaw - truth.yaw[0]
        alpha = initial_spin - (truth.arc - geom.pos_v[1] * psi_change) / geom.wheel_radius
        spin_acc = -(truth.speed_dot - truth.yaw_acc * np.cos(truth.pitch) * geom.pos_v[1]
                     + truth.yaw_rate * truth.pitch_rate * np.sin(truth.pitch) * geom.pos_v[1]
                     ) / geom.wheel_radius

        ca, sa = np.cos(alpha), np.sin(alpha)
        rx = np.zeros((n, 3, 3))
        rx[:, 0, 0] = 1.0
        rx[:, 1, 1] = ca
        rx[:, 1, 2] = -sa
        rx[:, 2, 1] = sa
        rx[:, 2, 2] = ca
        c_bv = np.einsum("ij,njk->nik", HUB_TO_VEHICLE, rx)
        c_bn = np.einsum("nij,njk->nik", rot_v, c_bv)

        x_hub = HUB_TO_VEHICLE[:, 0]
        w_total_v = w_v + spin_rate[:, None] * x_hub[None, :]
        gyro = np.einsum("nji,nj->ni", c_bv, w_total_v)

        a_center = _point_acceleration(truth, w_v, wd_v, geom.pos_v, a_origin, rot_v)
        a_imu = a_center
        if np.any(geom.lever_wheel != 0.0):
            wd_total_v = (
                wd_v
                + spin_acc[:, None] * x_hub[None, :]
                + np.cross(w_v, spin_rate[:, None] * x_hub[None, :])
            )
            w_n = np.einsum("nij,nj->ni", rot_v, w_total_v)
            wd_n = np.einsum("nij,nj->ni", rot_v, wd_total_v)
            arm = np.einsum("nij,j->ni", c_bn, geom.lever_wheel)
            a_imu = a_center - (np.cross(wd_n, arm) + np.cross(w_n, np.cross(w_n, arm)))
        accel = np.einsum("nji,nj->ni", c_bn, a_imu - g_n[None, :])

    if err is not None and np.max(np.abs(gyro)) > err.gyro_range:
        raise ValueError(
            f"required angular rate {np.max(np.abs(gyro)):.1f} rad/s exceeds the "
            f"gyro range {err.gyro_range:.1f} rad/s of {geom.imu_id}"
        )

    bg = np.zeros((n, 3))
    ba = np.zeros((n, 3))
    sg = np.zeros((n, 3))
    sa_ = np.zeros((n, 3))
    if err is not None and seed is not None:
        idx = {ROLE_LEFT_WHEEL: 0, ROLE_RIGHT_WHEEL: 1, ROLE_BODY: 2}[geom.role]
        rng = np.random.default_rng([int(seed), idx])
        rate = 1.0 / dt
        bg = rng.standard_normal(3)[None, :] * err.gyro_bias_std + _gm(
            rng, n, err.gyro_bias_std, err.tau_bg, dt
        )
        ba = rng.standard_normal(3)[None, :] * err.accel_bias_std + _gm(
            rng, n, err.accel_bias_std, err.tau_ba, dt
        )
        sg = _gm(rng, n, err.gyro_sf_std, err.tau_sg, dt)
        sa_ = _gm(rng, n, err.accel_sf_std, err.tau_sa, dt)
        gyro = gyro * (1.0 + sg) + bg + rng.standard_normal((n, 3)) * (err.arw * np.sqrt(rate))
        accel = accel * (1.0 + sa_) + ba + rng.standard_normal((n, 3)) * (err.vrw * np.sqrt(rate))
    if constant_gyro_bias is not None:
        cb = np.asarray(constant_gyro_bias, float)
        gyro = gyro + cb[None, :]
        bg = bg + cb[None, :]
    if constant_accel_bias is not None:
        cb = np.asarray(constant_accel_bias, float)
        accel = accel + cb[None, :]
        ba = ba + cb[None, :]

    stream = ImuStream(t=truth.t.copy(), gyro=gyro, accel=accel)
    if return_errors:
        return stream, ImuErrorTruth(gyro_bias=bg, accel_bias=ba, gyro_sf=sg, accel_sf=sa_)
    return stream


def synthesize_all(
    truth: VehicleTruth,
    geoms: dict,
    errs: dict,
    seed: Optional[int],
    **kw,
) -> dict:
    """Per-IMU streams on the shared time base with independent noise draws.

    ``geoms``/``errs`` map imu_id to geometry and error model (an ``errs``
    value of None yields an error-free stream). Noise is drawn from a seed
    split per IMU role, so synthesis order does not matter.
    """
    return {
        imu_id: synthesize_imu(truth, geoms[imu_id], errs.get(imu_id), seed, **kw)
        for imu_id in geoms
    }


def default_geometries(
    track_width: float = 0.4,
    wheel_radius: float = 0.2,
    body_pos_v: tuple = (0.2, 0.0, -0.3),
    roles: tuple = (ROLE_LEFT_WHEEL, ROLE_RIGHT_WHEEL, ROLE_BODY),
) -> dict:
    """Mounting geometry of the reference robot (both wheel IMUs at their
    wheel centers, x-axes along the axle toward the vehicle's right)."""
    from .geom import Rotation

    geoms = {}
    if ROLE_LEFT_WHEEL in roles:
        geoms["left_wheel"] = MountingGeometry(
            imu_id="left_wheel",
            role=ROLE_LEFT_WHEEL,
            pos_v=np.array([0.0, -track_width / 2.0, 0.0]),
            wheel_radius=wheel_radius,
        )
    if ROLE_RIGHT_WHEEL in roles:
        geoms["right_wheel"] = MountingGeometry(
            imu_id="right_wheel",
            role=ROLE_RIGHT_WHEEL,
            pos_v=np.array([0.0, track_width / 2.0, 0.0]),
            wheel_radius=wheel_radius,
        )
    if ROLE_BODY in roles:
        geoms["body"] = MountingGeometry(
            imu_id="body",
            role=ROLE_BODY,
            pos_v=np.asarray(body_pos_v, dtype=float),
            imu_to_vehicle=Rotation.identity(),
        )
    return geoms
