"""Strapdown INS mechanization: open-loop prediction of one IMU's navigation
state from raw rate samples.

Flat-earth, constant-gravity local frame; earth rotation is neglected by
default (MEMS gyro bias of this class is more than ten times earth rate) and
can be switched on for the gyro and Coriolis terms. The per-step integration
uses trapezoidal increments with the standard second-order rotation
corrections (exact for rates varying linearly across a step), which keeps the
noise-free round-trip error orders of magnitude below the sensor noise floor
at 200 Hz without a separate high-rate coning loop.

Navigation state is packed as a float64[10] for the jitted kernels:
``[pos(3), vel(3), quat wxyz(4)]``. Corrections are float64[12]:
``[bg(3), ba(3), sg(3), sa(3)]``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import geom
from .core import NavState, ImuSample
from .geom import Rotation, quat_from_rotvec, quat_multiply, quat_normalize, quat_to_dcm

__all__ = [
    "MAX_DT",
    "nav_pack",
    "nav_unpack",
    "imu_compensate",
    "mech_step",
    "ins_update",
    "earth_rate_n",
]

MAX_DT = 0.02  # s; mechanization assumes at least 50 Hz sampling


def nav_pack(state: NavState) -> np.ndarray:
    nav = np.empty(10)
    nav[0:3] = state.pos
    nav[3:6] = state.vel
    nav[6:10] = state.att.as_quat()
    return nav


def nav_unpack(nav: np.ndarray, t: float) -> NavState:
    return NavState(
        t=t,
        pos=nav[0:3].copy(),
        vel=nav[3:6].copy(),
        att=Rotation.from_quat(nav[6:10]),
    )


def earth_rate_n(latitude: float) -> np.ndarray:
    """Earth rotation rate in NED axes at the given latitude."""
    omega_ie = 7.2921150e-5
    return omega_ie * np.array([np.cos(latitude), 0.0, -np.sin(latitude)])


@njit(cache=True)
def imu_compensate(gyro, accel, corr):
    """Remove current bias/scale estimates from one raw sample.

    Inverts the error model  measured = (1 + s) * true + b  per axis.
    """
    w = np.empty(3)
    f = np.empty(3)
    for i in range(3):
        w[i] = (gyro[i] - corr[i]) / (1.0 + corr[6 + i])
        f[i] = (accel[i] - corr[3 + i]) / (1.0 + corr[9 + i])
    return w, f


@njit(cache=True)
def mech_step(nav, w0, w1, f0, f1, dt, g, w_ie_n):
    """Advance the packed nav state by one sample interval.

    ``w0, f0`` are the compensated rates at the interval start, ``w1, f1`` at
    the end. The attitude increment is the trapezoid plus the second-order
    non-commutativity term; the body-frame velocity increment carries the
    matching rotation/sculling terms. Both are exact for rates that vary
    linearly across the step. ``w_ie_n`` is the earth rate in n-axes (zeros
    when earth rotation is neglected).
    """
    cbn = quat_to_dcm(nav[6:10])

    wa = w0.copy()
    wb = w1.copy()
    if w_ie_n[0] != 0.0 or w_ie_n[1] != 0.0 or w_ie_n[2] != 0.0:
        w_ie_b = cbn.T @ w_ie_n
        wa -= w_ie_b
        wb -= w_ie_b

    # attitude increment: trapezoid + (dt^2/12) w0 x w1 (exact for rates
    # varying linearly across the step, and exact at any order for a constant
    # rate via the quaternion exponential)
    dtheta = np.empty(3)
    for i in range(3):
        dtheta[i] = 0.5 * dt * (wa[i] + wb[i])
    c = np.cross(wa, wb)
    for i in range(3):
        dtheta[i] += dt * dt / 12.0 * c[i]

    # velocity increment in the pre-step body frame: the average-rotation
    # matrix A = I + (1-cos)/th^2 [dth x] + (1-sin/th)/th^2 [dth x]^2 is the
    # exact time average of the step rotation for a constant rate; wheel
    # IMUs spin fast enough that the first-order form is not sufficient.
    # Rate samples only bound the integrand at the interval ends; the
    # dominant curvature of f between samples is the frame rotation carrying
    # a space-fixed force (gravity), with f'' ~ (w x)(w x) f. Removing the
    # resulting trapezoid bias (-dt^3/12 f'') keeps fast-spinning wheel IMUs
    # integrable at ordinary sample rates.
    wm = np.empty(3)
    fm = np.empty(3)
    for i in range(3):
        wm[i] = 0.5 * (wa[i] + wb[i])
        fm[i] = 0.5 * (f0[i] + f1[i])
    fdd = np.cross(wm, np.cross(wm, fm))
    dvt = np.empty(3)
    for i in range(3):
        dvt[i] = 0.5 * dt * (f0[i] + f1[i]) - dt * dt * dt / 12.0 * fdd[i]
    th2 = dtheta[0] * dtheta[0] + dtheta[1] * dtheta[1] + dtheta[2] * dtheta[2]
    if th2 > 1e-24:
        th = np.sqrt(th2)
        a1 = (1.0 - np.cos(th)) / th2
        a2 = (1.0 - np.sin(th) / th) / th2
    else:
        a1 = 0.5
        a2 = 1.0 / 6.0
    c1 = np.cross(dtheta, dvt)
    c2 = np.cross(dtheta, c1)
    dvb = np.empty(3)
    for i in range(3):
        dvb[i] = dvt[i] + a1 * c1[i] + a2 * c2[i]

    # sculling residual for linearly varying rates (zero when both are
    # constant; the average-rotation term already carries the rest)
    u = np.cross(wa, f0)
    ab = np.cross(wa, f1)
    ba = np.cross(wb, f0)
    w = np.cross(wb, f1)
    for i in range(3):
        dvb[i] += dt * dt * (-u[i] / 8.0 + 5.0 * ab[i] / 24.0 + ba[i] / 24.0 - w[i] / 8.0)

    dv_n = cbn @ dvb
    v_new = np.empty(3)
    v_new[0] = nav[3] + dv_n[0]
    v_new[1] = nav[4] + dv_n[1]
    v_new[2] = nav[5] + dv_n[2] + g * dt
    if w_ie_n[0] != 0.0 or w_ie_n[1] != 0.0 or w_ie_n[2] != 0.0:
        cor = np.cross(2.0 * w_ie_n, nav[3:6])
        for i in range(3):
            v_new[i] -= cor[i] * dt

    # trapezoidal position update, then attitude
    for i in range(3):
        nav[i] += 0.5 * dt * (nav[3 + i] + v_new[i])
        nav[3 + i] = v_new[i]

    dq = quat_from_rotvec(dtheta)
    q = quat_multiply(nav[6:10], dq)
    nav[6:10] = quat_normalize(q)


def ins_update(
    state: NavState,
    prev: ImuSample,
    cur: ImuSample,
    corrections: np.ndarray | None = None,
    gravity: float = 9.80665,
    w_ie_n: np.ndarray | None = None,
) -> NavState:
    """One mechanization step between two consecutive samples.

    ``corrections`` is the packed ``[bg, ba, sg, sa]`` vector of current
    bias/scale estimates (zeros when omitted); both samples are compensated
    with it before integration.

    Raises
    ------
    ValueError
        On non-monotonic sample times, ``dt`` above 0.02 s, or non-finite
        samples.
    """
    dt = cur.t - prev.t
    if not dt > 0:
        raise ValueError(f"non-monotonic sample times: {prev.t} -> {cur.t}")
    if dt > MAX_DT + 1e-12:
        raise ValueError(f"sample interval {dt:.4f} s exceeds {MAX_DT} s")
    for s in (prev, cur):
        if not (np.all(np.isfinite(s.gyro)) and np.all(np.isfinite(s.accel))):
            raise ValueError("non-finite IMU sample")
    if corrections is None:
        corrections = np.zeros(12)
    if w_ie_n is None:
        w_ie_n = np.zeros(3)

    nav = nav_pack(state)
    w0, f0 = imu_compensate(np.asarray(prev.gyro, float), np.asarray(prev.accel, float), corrections)
    w1, f1 = imu_compensate(np.asarray(cur.gyro, float), np.asarray(cur.accel, float), corrections)
    mech_step(nav, w0, w1, f0, f1, dt, gravity, np.asarray(w_ie_n, float))
    return nav_unpack(nav, cur.t)
