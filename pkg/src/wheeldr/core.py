"""Domain data model shared by the simulator, filters, and evaluation.

Units are strict SI internally (m, s, rad); degrees and deg/h appear only at
I/O boundaries. All value types are immutable or treated as such; streams are
never mutated after loading.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .geom import Rotation

__all__ = [
    "GRAVITY",
    "STATE_DIM",
    "IDX_POS",
    "IDX_VEL",
    "IDX_ATT",
    "IDX_BG",
    "IDX_BA",
    "IDX_SG",
    "IDX_SA",
    "ROLE_LEFT_WHEEL",
    "ROLE_RIGHT_WHEEL",
    "ROLE_BODY",
    "TOPOLOGIES",
    "ImuSample",
    "ImuStream",
    "NavState",
    "SensorErrorModel",
    "MountingGeometry",
    "FusionConfig",
    "dph_to_rps",
    "dpsh_to_rpss",
    "mpsph_to_si",
    "static_coarse_align",
]

GRAVITY = 9.80665

# Error-state ordering. This is the single source of truth: every design
# matrix and transition-matrix block indexes against these offsets.
#   [ dr(3) | dv(3) | phi(3) | bg(3) | ba(3) | sg(3) | sa(3) ]
STATE_DIM = 21
IDX_POS = 0
IDX_VEL = 3
IDX_ATT = 6
IDX_BG = 9
IDX_BA = 12
IDX_SG = 15
IDX_SA = 18

ROLE_LEFT_WHEEL = "left_wheel"
ROLE_RIGHT_WHEEL = "right_wheel"
ROLE_BODY = "body"
WHEEL_ROLES = (ROLE_LEFT_WHEEL, ROLE_RIGHT_WHEEL)

TOPOLOGIES = {
    "single_wheel": (ROLE_LEFT_WHEEL,),
    "dual_wheel": (ROLE_LEFT_WHEEL, ROLE_RIGHT_WHEEL),
    "body_wheel": (ROLE_LEFT_WHEEL, ROLE_BODY),
    "triple": (ROLE_LEFT_WHEEL, ROLE_RIGHT_WHEEL, ROLE_BODY),
}


def dph_to_rps(x: float) -> float:
    """deg/h to rad/s."""
    return x * np.pi / 180.0 / 3600.0


def dpsh_to_rpss(x: float) -> float:
    """deg/sqrt(h) to rad/sqrt(s)."""
    return x * np.pi / 180.0 / 60.0


def mpsph_to_si(x: float) -> float:
    """m/s/sqrt(h) to m/s^1.5."""
    return x / 60.0


class ImuSample(NamedTuple):
    """One timestamped tri-axial measurement: angular rate + specific force."""

    t: float
    gyro: np.ndarray  # rad/s
    accel: np.ndarray  # m/s^2


@dataclass(frozen=True)
class ImuStream:
    """A whole IMU record as columnar arrays (t strictly increasing)."""

    t: np.ndarray  # (n,) s
    gyro: np.ndarray  # (n, 3) rad/s
    accel: np.ndarray  # (n, 3) m/s^2

    def __post_init__(self):
        if len(self.t) != len(self.gyro) or len(self.t) != len(self.accel):
            raise ValueError("stream arrays must have equal length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not (np.all(np.isfinite(self.gyro)) and np.all(np.isfinite(self.accel))):
            raise ValueError("stream contains non-finite samples")

    def __len__(self) -> int:
        return len(self.t)

    def sample(self, k: int) -> ImuSample:
        return ImuSample(float(self.t[k]), self.gyro[k], self.accel[k])

    @property
    def rate(self) -> float:
        return 1.0 / float(np.median(np.diff(self.t)))


@dataclass(frozen=True)
class NavState:
    """Full navigation state of one IMU: position in its world frame,
    velocity along navigation-frame axes, attitude C_b_n."""

    t: float
    pos: np.ndarray
    vel: np.ndarray
    att: Rotation

    def __post_init__(self):
        for name in ("pos", "vel"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"NavState.{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class SensorErrorModel:
    """Stochastic error model of one IMU (first-order Gauss-Markov biases and
    scale factors plus white noise).

    ``gyro_bias_std``/``accel_bias_std`` are both the turn-on bias draw and
    the Gauss-Markov steady-state sigma. Correlation times default to 3600 s;
    they are declared assumptions, not measured values.
    """

    gyro_bias_std: float = dph_to_rps(200.0)  # rad/s
    arw: float = dpsh_to_rpss(0.24)  # rad/sqrt(s)
    accel_bias_std: float = 0.01  # m/s^2
    vrw: float = mpsph_to_si(3.0)  # m/s^1.5
    gyro_sf_std: float = 0.03
    accel_sf_std: float = 0.03
    tau_bg: float = 3600.0
    tau_ba: float = 3600.0
    tau_sg: float = 3600.0
    tau_sa: float = 3600.0
    gyro_range: float = 2000.0 * np.pi / 180.0  # rad/s

    def __post_init__(self):
        for name in (
            "gyro_bias_std",
            "arw",
            "accel_bias_std",
            "vrw",
            "gyro_sf_std",
            "accel_sf_std",
            "tau_bg",
            "tau_ba",
            "tau_sg",
            "tau_sa",
            "gyro_range",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"SensorErrorModel.{name} must be positive")


@dataclass(frozen=True)
class MountingGeometry:
    """Physical mounting of one IMU on the vehicle.

    ``pos_v`` is the IMU position in the vehicle frame (origin at the rear
    axle midpoint, x forward, y right, z down). For wheel IMUs, ``lever_wheel``
    is the vector from the IMU measurement center to the wheel center in the
    (spinning) IMU frame, ``forward_sign`` normalizes the spin-axis gyro so
    that forward motion reads positive, and ``yaw_offset`` is the azimuth of
    the IMU x-axis relative to the vehicle x-axis (the vehicle heading equals
    the IMU heading minus this offset). Both wheel IMUs are mounted with their
    x-axis along the axle toward the vehicle's right, which makes
    ``yaw_offset`` +pi/2 and ``forward_sign`` -1 for either wheel.
    ``imu_to_vehicle`` (C_b_v) is the calibrated body-IMU mounting rotation.
    """

    imu_id: str
    role: str
    pos_v: np.ndarray
    wheel_radius: float = 0.0
    lever_wheel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    forward_sign: float = -1.0
    yaw_offset: float = np.pi / 2.0
    imu_to_vehicle: Rotation = field(default_factory=Rotation.identity)

    def __post_init__(self):
        if self.role not in (ROLE_LEFT_WHEEL, ROLE_RIGHT_WHEEL, ROLE_BODY):
            raise ValueError(f"unknown role {self.role!r}")
        pos_v = np.asarray(self.pos_v, dtype=float)
        lever = np.asarray(self.lever_wheel, dtype=float)
        if not np.all(np.isfinite(lever)):
            raise ValueError("lever_wheel must be finite")
        object.__setattr__(self, "pos_v", pos_v)
        object.__setattr__(self, "lever_wheel", lever)
        if self.is_wheel and not self.wheel_radius > 0:
            raise ValueError(f"wheel_radius must be positive for {self.role}")
        if self.is_wheel and abs(self.forward_sign) != 1.0:
            raise ValueError("forward_sign must be +1 or -1")

    @property
    def is_wheel(self) -> bool:
        return self.role in WHEEL_ROLES


@dataclass(frozen=True)
class FusionConfig:
    """Run configuration for the fusion engine.

    Rates must divide the IMU rate evenly; velocity/NHC updates land on
    multiples of ``1/vel_update_rate`` of the stream clock and the multi-IMU
    constraint on whole multiples of ``1/constraint_rate``. A
    ``constraint_rate`` of zero disables the constraint, which reduces any
    multi-IMU topology to independent subsystems.
    """

    topology: str = "single_wheel"
    mode: str = "distributed"
    imu_rate: float = 200.0
    vel_update_rate: float = 2.0
    constraint_rate: float = 1.0
    vel_noise_wheel: np.ndarray = field(default_factory=lambda: np.array([0.03, 0.02, 0.02]))
    vel_noise_body: np.ndarray = field(default_factory=lambda: np.array([0.05, 0.04, 0.04]))
    constraint_noise: np.ndarray = field(default_factory=lambda: np.array([0.2, 0.2, 0.2]))
    weights: Optional[dict] = None  # imu_id -> scalar, defaults to equal
    initial_heading: float = 0.0  # vehicle yaw at start, rad
    gravity: float = GRAVITY
    include_earth_rate: bool = False
    latitude: float = 30.5 * np.pi / 180.0  # used only with include_earth_rate
    align_duration: float = 5.0
    estimate_initial_bias: bool = True
    # Initial error-state standard deviations.
    init_pos_std: float = 0.01  # m
    init_vel_std: float = 0.01  # m/s
    init_att_std: np.ndarray = field(
        default_factory=lambda: np.deg2rad([0.5, 0.5, 0.5])
    )
    output_rate: float = 2.0
    diagnostics: bool = False

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.mode not in ("distributed", "centralized"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "centralized" and self.topology != "triple":
            raise ValueError("centralized mode is only defined for the triple topology")
        for name in ("vel_update_rate", "output_rate"):
            rate = getattr(self, name)
            if rate <= 0 or abs(self.imu_rate / rate - round(self.imu_rate / rate)) > 1e-9:
                raise ValueError(f"{name} must divide imu_rate evenly")
        if self.constraint_rate < 0 or (
            self.constraint_rate > 0
            and abs(self.imu_rate / self.constraint_rate - round(self.imu_rate / self.constraint_rate)) > 1e-9
        ):
            raise ValueError("constraint_rate must be zero or divide imu_rate evenly")
        for name in ("vel_noise_wheel", "vel_noise_body", "constraint_noise", "init_att_std"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or np.any(v <= 0):
                raise ValueError(f"{name} must be a positive 3-vector")
            object.__setattr__(self, name, v)

    @property
    def roles(self) -> tuple:
        return TOPOLOGIES[self.topology]

    @property
    def horizontal_assumption(self) -> bool:
        """Vehicle roll/pitch assumed zero unless a body IMU supplies them."""
        return ROLE_BODY not in self.roles

    def weight_for(self, imu_id: str, ids: tuple) -> float:
        if self.weights is None:
            return 1.0 / len(ids)
        w = {k: float(v) for k, v in self.weights.items() if k in ids}
        total = sum(w.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"subsystem weights must sum to 1, got {total}")
        return w[imu_id]

    def with_(self, **kw) -> "FusionConfig":
        return replace(self, **kw)


def static_coarse_align(
    stream: ImuStream,
    initial_heading: float,
    err: SensorErrorModel,
    duration: Optional[float] = None,
    gravity: float = GRAVITY,
) -> tuple[NavState, np.ndarray]:
    """Level the IMU from stationary data and seed the gyro bias estimate.

    Roll and pitch come from the mean specific force (gravity leveling for a
    z-down navigation frame); yaw is set to ``initial_heading`` (the IMU's own
    heading, not the vehicle's). The mean gyro reading is returned as the
    initial gyro bias; earth rotation (~15 deg/h) is deliberately neglected
    since it is far below MEMS bias levels.

    Returns the aligned :class:`NavState` (zero position/velocity, timestamped
    at the end of the window) and the gyro bias estimate.

    Raises
    ------
    ValueError
        If the window is shorter than 1 s, the mean specific force deviates
        from gravity by more than 5 % (tilted or accelerating), or the gyro
        variance exceeds 10x the white-noise prediction (motion detected).
    """
    if duration is None:
        n = len(stream)
    else:
        n = int(np.searchsorted(stream.t, stream.t[0] + duration, side="right"))
    if n < 2 or stream.t[n - 1] - stream.t[0] < 1.0 - 1e-9:
        raise ValueError("static alignment needs at least 1 s of stationary data")

    f_mean = stream.accel[:n].mean(axis=0)
    g_meas = float(np.linalg.norm(f_mean))
    if abs(g_meas - gravity) > 0.05 * gravity:
        raise ValueError(
            f"mean specific force {g_meas:.3f} m/s^2 deviates from gravity by more "
            "than 5 %; data is not stationary"
        )

    rate = stream.rate
    var_limit = 10.0 * err.arw**2 * rate
    gyro_var = stream.gyro[:n].var(axis=0)
    if np.any(gyro_var > var_limit):
        raise ValueError(
            "gyro variance exceeds 10x the angular-random-walk prediction; "
            "motion detected during alignment"
        )

    roll = np.arctan2(-f_mean[1], -f_mean[2])
    pitch = np.arctan(f_mean[0] / np.hypot(f_mean[1], f_mean[2]))
    att = Rotation.from_euler(np.array([roll, pitch, initial_heading]))
    bias = stream.gyro[:n].mean(axis=0)
    nav = NavState(t=float(stream.t[n - 1]), pos=np.zeros(3), vel=np.zeros(3), att=att)
    return nav, bias
