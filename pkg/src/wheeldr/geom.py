"""Rotation and frame algebra shared by all modules.

Direction cosine matrices (DCM), Z-Y-X Euler angles (roll, pitch, yaw) and
scalar-first unit quaternions [w, x, y, z]. All frames are right-handed; the
navigation frame is NED (x north, y east, z down), so yaw is the compass
azimuth of the frame's x-axis.

The hot-path helpers are numba kernels operating on plain float64 arrays so
they can be called from other jitted code; :class:`Rotation` is a thin
immutable wrapper for configuration and I/O level code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

__all__ = [
    "Rotation",
    "skew",
    "euler_to_dcm",
    "dcm_to_euler",
    "euler_to_quat",
    "quat_to_dcm",
    "dcm_to_quat",
    "quat_to_euler",
    "quat_multiply",
    "quat_from_rotvec",
    "quat_normalize",
    "orthonormalize",
    "apply_small_angle",
    "wrap_angle",
]

# Pitch closer than this to +-pi/2 is treated as gimbal lock; roll is pinned
# to zero and folded into yaw.
GIMBAL_EPS = 1e-6

# Feedback corrections beyond this magnitude signal filter divergence.
MAX_SMALL_ANGLE = 0.5


@njit(cache=True)
def skew(v):
    """Skew-symmetric matrix S with S @ u == np.cross(v, u)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


@njit(cache=True)
def euler_to_dcm(rpy):
    """Z-Y-X Euler angles (roll, pitch, yaw) to the body-to-reference DCM."""
    cr, sr = np.cos(rpy[0]), np.sin(rpy[0])
    cp, sp = np.cos(rpy[1]), np.sin(rpy[1])
    cy, sy = np.cos(rpy[2]), np.sin(rpy[2])
    return np.array(
        [
            [cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy],
            [cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy],
            [-sp, sr * cp, cr * cp],
        ]
    )


@njit(cache=True)
def dcm_to_euler(dcm):
    """DCM to Z-Y-X Euler angles (roll, pitch, yaw).

    At |pitch| >= pi/2 - 1e-6 the decomposition is degenerate; roll is pinned
    to zero and the remaining rotation folded into yaw. Vehicles never pitch
    that far and wheel frames keep their x-axis horizontal, so the branch only
    guards pathological inputs.
    """
    sp = -dcm[2, 0]
    if sp > 1.0:
        sp = 1.0
    elif sp < -1.0:
        sp = -1.0
    pitch = np.arcsin(sp)
    if np.abs(sp) >= 1.0 - GIMBAL_EPS:
        roll = 0.0
        yaw = np.arctan2(-dcm[0, 1], dcm[1, 1])
    else:
        roll = np.arctan2(dcm[2, 1], dcm[2, 2])
        yaw = np.arctan2(dcm[1, 0], dcm[0, 0])
    return np.array([roll, pitch, yaw])


@njit(cache=True)
def euler_to_quat(rpy):
    """Z-Y-X Euler angles to a scalar-first unit quaternion."""
    cr, sr = np.cos(0.5 * rpy[0]), np.sin(0.5 * rpy[0])
    cp, sp = np.cos(0.5 * rpy[1]), np.sin(0.5 * rpy[1])
    cy, sy = np.cos(0.5 * rpy[2]), np.sin(0.5 * rpy[2])
    return np.array(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ]
    )


@njit(cache=True)
def quat_to_dcm(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    return np.array(
        [
            [w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ]
    )


@njit(cache=True)
def dcm_to_quat(dcm):
    """DCM to scalar-first unit quaternion (Shepperd's method)."""
    tr = dcm[0, 0] + dcm[1, 1] + dcm[2, 2]
    q = np.empty(4)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q[0] = 0.25 * s
        q[1] = (dcm[2, 1] - dcm[1, 2]) / s
        q[2] = (dcm[0, 2] - dcm[2, 0]) / s
        q[3] = (dcm[1, 0] - dcm[0, 1]) / s
    elif dcm[0, 0] > dcm[1, 1] and dcm[0, 0] > dcm[2, 2]:
        s = np.sqrt(1.0 + dcm[0, 0] - dcm[1, 1] - dcm[2, 2]) * 2.0
        q[0] = (dcm[2, 1] - dcm[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (dcm[0, 1] + dcm[1, 0]) / s
        q[3] = (dcm[0, 2] + dcm[2, 0]) / s
    elif dcm[1, 1] > dcm[2, 2]:
        s = np.sqrt(1.0 + dcm[1, 1] - dcm[0, 0] - dcm[2, 2]) * 2.0
        q[0] = (dcm[0, 2] - dcm[2, 0]) / s
        q[1] = (dcm[0, 1] + dcm[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (dcm[1, 2] + dcm[2, 1]) / s
    else:
        s = np.sqrt(1.0 + dcm[2, 2] - dcm[0, 0] - dcm[1, 1]) * 2.0
        q[0] = (dcm[1, 0] - dcm[0, 1]) / s
        q[1] = (dcm[0, 2] + dcm[2, 0]) / s
        q[2] = (dcm[1, 2] + dcm[2, 1]) / s
        q[3] = 0.25 * s
    if q[0] < 0.0:
        q = -q
    return q


@njit(cache=True)
def quat_to_euler(q):
    return dcm_to_euler(quat_to_dcm(q))


@njit(cache=True)
def quat_multiply(p, q):
    """Hamilton product p * q (both scalar-first)."""
    return np.array(
        [
            p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
            p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
            p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
            p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
        ]
    )


@njit(cache=True)
def quat_from_rotvec(phi):
    """Exact exponential map: rotation vector to unit quaternion."""
    angle = np.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    q = np.empty(4)
    half = 0.5 * angle
    q[0] = np.cos(half)
    if angle > 1e-12:
        s = np.sin(half) / angle
    else:
        # sin(x/2)/x -> 1/2 - x^2/48
        s = 0.5 - angle * angle / 48.0
    q[1] = s * phi[0]
    q[2] = s * phi[1]
    q[3] = s * phi[2]
    return q


@njit(cache=True)
def quat_normalize(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@njit(cache=True)
def orthonormalize(dcm):
    """Symmetric re-orthonormalization of a near-orthonormal matrix.

    Two iterations of C <- C (3 I - C^T C) / 2; cubic convergence, enough to
    reach 1e-15 residual from drifts of 1e-4.
    """
    c = dcm
    for _ in range(2):
        ctc = c.T @ c
        c = c @ (1.5 * np.eye(3) - 0.5 * ctc)
    return c


@njit(cache=True)
def apply_small_angle_dcm(dcm, phi):
    """(I - skew(phi)) @ dcm, re-orthonormalized. Caller checks |phi|."""
    return orthonormalize((np.eye(3) - skew(phi)) @ dcm)


def apply_small_angle(rotation: "Rotation", phi: np.ndarray) -> "Rotation":
    """First-order attitude correction used for error feedback.

    Returns the re-orthonormalized ``(I - skew(phi)) @ R``. Corrections are
    applied frequently in closed loop, so ``|phi|`` must stay well below a
    radian; larger values signal a diverged filter.

    Raises
    ------
    ValueError
        If ``|phi| >= 0.5`` rad.
    """
    phi = np.asarray(phi, dtype=float)
    norm = float(np.linalg.norm(phi))
    if not np.isfinite(norm) or norm >= MAX_SMALL_ANGLE:
        raise ValueError(
            f"attitude correction too large (|phi| = {norm:.3g} rad >= {MAX_SMALL_ANGLE}); "
            "filter divergence"
        )
    return Rotation(apply_small_angle_dcm(rotation.matrix, phi))


@njit(cache=True)
def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    out = (-a + np.pi) % (2.0 * np.pi)
    return -(out - np.pi)


@dataclass(frozen=True)
class Rotation:
    """Immutable rotation, stored as a 3x3 direction cosine matrix.

    The matrix maps source-frame coordinates into target-frame coordinates
    (e.g. ``C_b_n`` maps body to navigation). Instances are value types and
    safe to share across workers.
    """

    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"rotation matrix must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("rotation matrix has non-finite entries")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def from_euler(cls, rpy) -> "Rotation":
        """From Z-Y-X Euler angles (roll, pitch, yaw) in radians."""
        return cls(euler_to_dcm(np.asarray(rpy, dtype=float)))

    @classmethod
    def from_quat(cls, q) -> "Rotation":
        """From a scalar-first quaternion [w, x, y, z] (normalized first)."""
        return cls(quat_to_dcm(quat_normalize(np.asarray(q, dtype=float))))

    @classmethod
    def about_z(cls, yaw: float) -> "Rotation":
        return cls.from_euler(np.array([0.0, 0.0, float(yaw)]))

    def as_euler(self) -> np.ndarray:
        return dcm_to_euler(self.matrix)

    def as_quat(self) -> np.ndarray:
        return dcm_to_quat(self.matrix)

    @property
    def yaw(self) -> float:
        return float(self.as_euler()[2])

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def inv(self) -> "Rotation":
        return Rotation(self.matrix.T.copy())

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(orthonormalize(self.matrix @ other.matrix))

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.matrix @ self.matrix.T - np.eye(3))))
