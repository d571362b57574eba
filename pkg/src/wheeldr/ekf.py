"""Generic 21-state error-state Kalman filter engine.

State ordering is fixed by :mod:`wheeldr.core`:
``[dr(3), dv(3), phi(3), bg(3), ba(3), sg(3), sa(3)]``. The continuous model
couples velocity error to attitude error through the rotated specific force
and maps sensor errors through the attitude matrix; biases and scale factors
are first-order Gauss-Markov states.

Matrix products on the covariance path use fixed-order scalar kernels rather
than BLAS. That makes the arithmetic independent of how a block is embedded
in a larger matrix (padding with exact zeros changes nothing), so a dense
multi-IMU filter with block-diagonal dynamics reproduces the per-IMU filters
bit for bit until a coupling measurement arrives, and run-to-run determinism
is unconditional. It also keeps the 63-state filter honestly cubic in cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    IDX_ATT,
    IDX_BA,
    IDX_BG,
    IDX_POS,
    IDX_SA,
    IDX_SG,
    IDX_VEL,
    STATE_DIM,
    FusionConfig,
    NavState,
    SensorErrorModel,
)
from .geom import quat_to_dcm
from .mech import imu_compensate, mech_step

__all__ = [
    "FilterNumericsError",
    "DivergenceError",
    "UpdateInfo",
    "mat_mul",
    "mat_mul_nt",
    "gqg_diag",
    "gm_taus",
    "assemble_phi",
    "build_transition",
    "init_covariance",
    "predict",
    "update",
    "feedback",
    "propagate_span",
    "propagate_span_multi",
]


class FilterNumericsError(RuntimeError):
    """Covariance lost positive semidefiniteness or a solve failed."""


class DivergenceError(RuntimeError):
    """Estimated errors grew beyond the small-angle envelope."""


@njit(cache=True)
def mat_mul(a, b, out):
    """out = a @ b with a fixed ascending-k scalar loop."""
    n, m = a.shape
    p = b.shape[1]
    for i in range(n):
        for j in range(p):
            s = 0.0
            for k in range(m):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@njit(cache=True)
def mat_mul_nt(a, b, out):
    """out = a @ b.T with a fixed ascending-k scalar loop."""
    n, m = a.shape
    p = b.shape[0]
    for i in range(n):
        for j in range(p):
            s = 0.0
            for k in range(m):
                s += a[i, k] * b[j, k]
            out[i, j] = s


def gqg_diag(err: SensorErrorModel) -> np.ndarray:
    """Diagonal of G Q G^T: white-noise PSDs mapped into the error state.

    The attitude/velocity noise maps through C_b_n, which drops out of
    C diag(q) C^T for isotropic q, so the result is constant.
    """
    d = np.zeros(STATE_DIM)
    d[IDX_VEL : IDX_VEL + 3] = err.vrw**2
    d[IDX_ATT : IDX_ATT + 3] = err.arw**2
    d[IDX_BG : IDX_BG + 3] = 2.0 * err.gyro_bias_std**2 / err.tau_bg
    d[IDX_BA : IDX_BA + 3] = 2.0 * err.accel_bias_std**2 / err.tau_ba
    d[IDX_SG : IDX_SG + 3] = 2.0 * err.gyro_sf_std**2 / err.tau_sg
    d[IDX_SA : IDX_SA + 3] = 2.0 * err.accel_sf_std**2 / err.tau_sa
    return d


def gm_taus(err: SensorErrorModel) -> np.ndarray:
    return np.array([err.tau_bg, err.tau_ba, err.tau_sg, err.tau_sa])


@njit(cache=True)
def assemble_phi(phi, cbn, f_hat, w_hat, taus, dt, off):
    """Write Phi = I + F dt for one 21-state block at diagonal offset ``off``.

    Continuous-model blocks: d(dr)=dv; d(dv) = skew(C f) phi + C ba
    + C diag(f) sa; d(phi) = -C bg - C diag(w) sg; Gauss-Markov diagonals
    -1/tau. ``phi`` must be zeroed outside the block beforehand.
    """
    for i in range(21):
        for j in range(21):
            phi[off + i, off + j] = 1.0 if i == j else 0.0
    for i in range(3):
        phi[off + i, off + 3 + i] = dt
    cf = cbn @ f_hat
    # dv/dphi = skew(C f) dt
    phi[off + 3, off + 7] = -cf[2] * dt
    phi[off + 3, off + 8] = cf[1] * dt
    phi[off + 4, off + 6] = cf[2] * dt
    phi[off + 4, off + 8] = -cf[0] * dt
    phi[off + 5, off + 6] = -cf[1] * dt
    phi[off + 5, off + 7] = cf[0] * dt
    for i in range(3):
        for j in range(3):
            cij = cbn[i, j] * dt
            phi[off + 3 + i, off + 12 + j] = cij  # dv/ba = C
            phi[off + 3 + i, off + 18 + j] = cij * f_hat[j]  # dv/sa = C diag(f)
            phi[off + 6 + i, off + 9 + j] = -cij  # dphi/bg = -C
            phi[off + 6 + i, off + 15 + j] = -cij * w_hat[j]  # dphi/sg = -C diag(w)
    for blk in range(4):
        decay = 1.0 - dt / taus[blk]
        for i in range(3):
            phi[off + 9 + 3 * blk + i, off + 9 + 3 * blk + i] = decay


def build_transition(
    state: NavState | np.ndarray,
    sample_gyro: np.ndarray,
    sample_accel: np.ndarray,
    err: SensorErrorModel,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """First-order transition matrix and trapezoidal process noise.

    ``sample_gyro``/``sample_accel`` are the bias/scale-compensated rates at
    the step. Returns ``Phi = I + F dt`` and
    ``Qd = (Phi M Phi^T + M) dt / 2`` with ``M = G Q G^T``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cbn = state.att.matrix if isinstance(state, NavState) else np.asarray(state)
    phi = np.zeros((STATE_DIM, STATE_DIM))
    assemble_phi(
        phi,
        np.ascontiguousarray(cbn),
        np.asarray(sample_accel, float),
        np.asarray(sample_gyro, float),
        gm_taus(err),
        dt,
        0,
    )
    m = np.diag(gqg_diag(err))
    tmp = np.empty_like(m)
    qd = np.empty_like(m)
    mat_mul(phi, m, tmp)
    mat_mul_nt(tmp, phi, qd)
    qd = 0.5 * dt * (qd + m)
    return phi, qd


def init_covariance(config: FusionConfig, err: SensorErrorModel) -> np.ndarray:
    d = np.zeros(STATE_DIM)
    d[IDX_POS : IDX_POS + 3] = config.init_pos_std**2
    d[IDX_VEL : IDX_VEL + 3] = config.init_vel_std**2
    d[IDX_ATT : IDX_ATT + 3] = config.init_att_std**2
    d[IDX_BG : IDX_BG + 3] = err.gyro_bias_std**2
    d[IDX_BA : IDX_BA + 3] = err.accel_bias_std**2
    d[IDX_SG : IDX_SG + 3] = err.gyro_sf_std**2
    d[IDX_SA : IDX_SA + 3] = err.accel_sf_std**2
    return np.diag(d)


def _check_psd(p: np.ndarray):
    eig = np.linalg.eigvalsh(p)
    if eig[0] < -1e-12 * max(np.trace(p), 1.0):
        raise FilterNumericsError(f"covariance lost PSD (min eig {eig[0]:.3e})")


def predict(
    x: np.ndarray, p: np.ndarray, phi: np.ndarray, qd: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Time update: x <- Phi x, P <- Phi P Phi^T + Qd, symmetrized."""
    n = p.shape[0]
    tmp = np.empty((n, n))
    out = np.empty((n, n))
    mat_mul(phi, np.ascontiguousarray(p), tmp)
    mat_mul_nt(tmp, phi, out)
    out += qd
    out = 0.5 * (out + out.T)
    _check_psd(out)
    return phi @ x, out


@dataclass(frozen=True)
class UpdateInfo:
    """Per-update diagnostics: innovation, its covariance, gain, NIS."""

    innovation: np.ndarray
    s: np.ndarray
    gain: np.ndarray
    nis: float


def update(
    x: np.ndarray, p: np.ndarray, z: np.ndarray, h: np.ndarray, r_diag: np.ndarray
) -> tuple[np.ndarray, np.ndarray, UpdateInfo]:
    """Joseph-form measurement update.

    ``z`` is the innovation (predicted minus observed), ``h`` the design
    matrix, ``r_diag`` the diagonal of the measurement noise covariance.
    """
    n = p.shape[0]
    m = len(z)
    if h.shape != (m, n) or r_diag.shape != (m,):
        raise ValueError("inconsistent measurement dimensions")
    if np.any(r_diag <= 0):
        raise ValueError("measurement noise must be positive")

    h = np.ascontiguousarray(h)
    pht = np.empty((n, m))
    mat_mul_nt(np.ascontiguousarray(p), h, pht)
    s = h @ pht + np.diag(r_diag)
    s = 0.5 * (s + s.T)
    try:
        sinv = np.linalg.inv(s)
    except np.linalg.LinAlgError as e:
        raise FilterNumericsError(f"singular innovation covariance: {e}") from e
    if not np.all(np.isfinite(sinv)):
        raise FilterNumericsError("non-finite innovation covariance inverse")

    k = pht @ sinv
    x_new = x + k @ (z - h @ x)

    ikh = np.eye(n) - k @ h
    tmp = np.empty((n, n))
    out = np.empty((n, n))
    mat_mul(np.ascontiguousarray(ikh), np.ascontiguousarray(p), tmp)
    mat_mul_nt(tmp, ikh, out)
    out += (k * r_diag[None, :]) @ k.T
    out = 0.5 * (out + out.T)

    nis = float(z @ sinv @ z)
    return x_new, out, UpdateInfo(innovation=z.copy(), s=s, gain=k, nis=nis)


def feedback(
    nav: np.ndarray, corr: np.ndarray, x: np.ndarray
) -> None:
    """Closed-loop correction of the packed nav state and sensor corrections.

    Estimated errors are *subtracted* from position/velocity and the attitude
    is rotated by the inverse small-angle error; bias/scale corrections
    accumulate. ``x`` is zeroed in place afterwards.

    Raises
    ------
    DivergenceError
        If the attitude correction exceeds the small-angle envelope.
    """
    from .geom import quat_from_rotvec, quat_multiply, quat_normalize

    phi = x[IDX_ATT : IDX_ATT + 3]
    norm = float(np.linalg.norm(phi))
    if not np.all(np.isfinite(x)) or norm >= 0.5:
        raise DivergenceError(f"attitude correction |phi| = {norm:.3g} rad")
    nav[0:3] -= x[IDX_POS : IDX_POS + 3]
    nav[3:6] -= x[IDX_VEL : IDX_VEL + 3]
    # estimated C is (I - phi x) C_true; removing the error left-multiplies
    # by exp(+phi x)
    dq = quat_from_rotvec(phi)
    nav[6:10] = quat_normalize(quat_multiply(dq, nav[6:10]))
    corr[0:3] += x[IDX_BG : IDX_BG + 3]
    corr[3:6] += x[IDX_BA : IDX_BA + 3]
    corr[6:9] += x[IDX_SG : IDX_SG + 3]
    corr[9:12] += x[IDX_SA : IDX_SA + 3]
    x[:] = 0.0


@njit(cache=True)
def _predict_inplace(p, phi, m_half, tmp, out):
    n = p.shape[0]
    for i in range(n):
        p[i, i] += m_half[i]
    mat_mul(phi, p, tmp)
    mat_mul_nt(tmp, phi, out)
    for i in range(n):
        out[i, i] += m_half[i]
    for i in range(n):
        for j in range(n):
            p[i, j] = 0.5 * (out[i, j] + out[j, i])


@njit(cache=True)
def propagate_span(nav, corr, p, gyro, accel, k0, k1, dt, m_half, taus, g, w_ie_n, phi, tmp, out):
    """Mechanize and covariance-predict over samples (k0, k1].

    The state starts at sample ``k0``; each step consumes the pair
    ``(k-1, k)``. ``m_half`` is diag(G Q G^T) dt / 2; the recursion
    ``P <- Phi (P + M dt/2) Phi^T + M dt/2`` is the trapezoidal discretization
    with both products fused. The transition matrix is evaluated at the
    pre-step state and the compensated end-of-step sample. Returns 0, or 1 if
    the state went non-finite.
    """
    w0, f0 = imu_compensate(gyro[k0], accel[k0], corr)
    for k in range(k0 + 1, k1 + 1):
        w1, f1 = imu_compensate(gyro[k], accel[k], corr)
        cbn = quat_to_dcm(nav[6:10])
        assemble_phi(phi, cbn, f1, w1, taus, dt, 0)
        mech_step(nav, w0, w1, f0, f1, dt, g, w_ie_n)
        _predict_inplace(p, phi, m_half, tmp, out)
        w0, f0 = w1, f1
    for i in range(10):
        if not np.isfinite(nav[i]):
            return 1
    return 0


@njit(cache=True)
def propagate_span_multi(
    navs, corrs, p, gyros, accels, k0, k1, dt, m_half, taus, g, w_ie_n, phi, tmp, out
):
    """Dense multi-IMU variant of :func:`propagate_span`.

    ``navs``/``corrs`` are stacked per subsystem, ``p`` is the dense
    ``(21 s, 21 s)`` covariance, ``phi``/``tmp``/``out`` matching scratch.
    The transition is block-diagonal but the covariance product is carried
    densely, exactly as a long-state-vector filter would.
    """
    ns = navs.shape[0]
    w0s = np.empty((ns, 3))
    f0s = np.empty((ns, 3))
    for s in range(ns):
        w0, f0 = imu_compensate(gyros[s, k0], accels[s, k0], corrs[s])
        w0s[s] = w0
        f0s[s] = f0
    for k in range(k0 + 1, k1 + 1):
        for s in range(ns):
            w1, f1 = imu_compensate(gyros[s, k], accels[s, k], corrs[s])
            cbn = quat_to_dcm(navs[s, 6:10])
            assemble_phi(phi, cbn, f1, w1, taus[s], dt, 21 * s)
            mech_step(navs[s], w0s[s], w1, f0s[s], f1, dt, g, w_ie_n)
            w0s[s] = w1
            f0s[s] = f1
        _predict_inplace(p, phi, m_half, tmp, out)
    for s in range(ns):
        for i in range(10):
            if not np.isfinite(navs[s, i]):
                return 1
    return 0
