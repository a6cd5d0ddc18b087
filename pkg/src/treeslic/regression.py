"""Errors-in-variables regression system for one branch.

Per instant the two end-current equations, divided through by the p-end
VT correction factor, read

    W^2 V_pq - theta2 V_qp - theta3 I_pq = 0
               theta2 V_qp - theta4 I_qp = V_pq

with theta = [W^2, W*g_v, W*z*g_ip, z*g_iq] and g the correction-factor
ratios relative to the p-end VT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .grid import FROM, TO
from .synth import BranchMeasurements


@dataclass(frozen=True)
class RegressionSystem:
    d_complex: np.ndarray
    c_complex: np.ndarray
    d_real: np.ndarray
    c_real: np.ndarray

    @property
    def n(self) -> int:
        return self.d_complex.shape[0] // 2


def oriented_series(meas: BranchMeasurements, orientation: str = FROM):
    """(v_p, v_q, i_p, i_q) with the `orientation` end in the p role."""
    if orientation == FROM:
        return meas.v_pq, meas.v_qp, meas.i_pq, meas.i_qp
    if orientation == TO:
        return meas.v_qp, meas.v_pq, meas.i_qp, meas.i_pq
    raise DataError(f"orientation must be 'from' or 'to', got {orientation!r}")


def complex_rows(v_p, v_q, i_p, i_q) -> tuple[np.ndarray, np.ndarray]:
    series = [np.asarray(s, dtype=complex).ravel() for s in (v_p, v_q, i_p, i_q)]
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise DataError(f"series lengths differ: {sorted(lengths)}")
    v_p, v_q, i_p, i_q = series
    n = len(v_p)
    d = np.zeros((2 * n, 4), dtype=complex)
    c = np.zeros(2 * n, dtype=complex)
    d[0::2, 0] = v_p
    d[0::2, 1] = -v_q
    d[0::2, 2] = -i_p
    d[1::2, 1] = v_q
    d[1::2, 3] = -i_q
    c[1::2] = v_p
    return d, c


def to_real(d: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian expansion acting on interleaved [Re th1, Im th1, Re th2, ...].

    Each instant's two complex rows become four real rows ordered
    Re(eq1), Re(eq2), Im(eq1), Im(eq2).
    """
    n2, k = d.shape
    re = np.empty((n2, 2 * k))
    im = np.empty((n2, 2 * k))
    re[:, 0::2], re[:, 1::2] = d.real, -d.imag
    im[:, 0::2], im[:, 1::2] = d.imag, d.real
    n = n2 // 2
    d_real = np.empty((4 * n, 2 * k))
    c_real = np.empty(4 * n)
    d_real[0::4], d_real[1::4] = re[0::2], re[1::2]
    d_real[2::4], d_real[3::4] = im[0::2], im[1::2]
    c_real[0::4], c_real[1::4] = c.real[0::2], c.real[1::2]
    c_real[2::4], c_real[3::4] = c.imag[0::2], c.imag[1::2]
    return d_real, c_real


def build_system(meas: BranchMeasurements, orientation: str = FROM) -> RegressionSystem:
    """Assemble (D, c) with the `orientation` end acting as the p end."""
    d, c = complex_rows(*oriented_series(meas, orientation))
    d_real, c_real = to_real(d, c)
    return RegressionSystem(d, c, d_real, c_real)


def theta_to_real(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=complex)
    out = np.empty(2 * len(theta))
    out[0::2], out[1::2] = theta.real, theta.imag
    return out


def theta_from_real(theta_real) -> np.ndarray:
    theta_real = np.asarray(theta_real, dtype=float)
    return theta_real[0::2] + 1j * theta_real[1::2]


def theta_from_truth(params, tau_vp: complex, tau_vq: complex, tau_ip: complex, tau_iq: complex) -> np.ndarray:
    """Exact theta for given line parameters and p/q-end correction factors."""
    z = complex(params.r, params.x)
    w = 1 + z * 1j * params.b
    return np.array([w * w, w * tau_vq / tau_vp, w * z * tau_ip / tau_vp, z * tau_iq / tau_vp])
