"""Total least squares for D theta ~ c with noise in both D and c."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTlsError, NonGenericTlsError

_V_LAST_MIN = 1e-12
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class TlsSolution:
    theta_real: np.ndarray
    smallest_singular_value: float
    condition_indicator: float

    @property
    def theta(self) -> np.ndarray:
        """Complex view of an interleaved (re, im) solution."""
        return self.theta_real[0::2] + 1j * self.theta_real[1::2]


def total_least_squares(d: np.ndarray, c: np.ndarray) -> TlsSolution:
    """Classical TLS via the SVD of the augmented matrix [D | c].

    Parameters
    ----------
    d : (m, k) array
    c : (m,) array

    Returns
    -------
    TlsSolution
        `theta_real` is -v[:k] / v[k] for the right singular vector v of the
        smallest singular value. `condition_indicator` is the ratio of the two
        smallest singular values; values near 1 mean the solution is poorly
        determined.

    Raises
    ------
    DegenerateTlsError
        If the system is too short or the smallest singular value is repeated.
    NonGenericTlsError
        If the last component of v vanishes, so no finite solution exists.
    """
    d = np.atleast_2d(np.asarray(d, dtype=float))
    if d.shape[0] == 1 and np.ndim(c) == 1 and len(c) > 1:
        d = d.T
    c = np.asarray(c, dtype=float).ravel()
    m, k = d.shape
    if len(c) != m:
        raise DegenerateTlsError(f"D has {m} rows but c has {len(c)}")
    if m < k + 1:
        raise DegenerateTlsError(f"need at least {k + 1} rows for {k} unknowns, got {m}")
    aug = np.column_stack([d, c])
    _, s, vt = np.linalg.svd(aug, full_matrices=False)
    s_min = float(s[-1])
    s_next = float(s[-2]) if k >= 1 else np.inf
    if s_next - s_min <= _TIE_RTOL * max(s[0], 1e-300):
        raise DegenerateTlsError(
            f"smallest singular value is not simple (s = {s[-2]:.3e}, {s[-1]:.3e}); "
            "the data do not excite every unknown", singular_values=s)
    v = vt[-1]
    if abs(v[-1]) < _V_LAST_MIN:
        raise NonGenericTlsError(f"right singular vector has last component {v[-1]:.3e}; no finite TLS solution")
    theta = -v[:-1] / v[-1]
    cond = s_next / s_min if s_min > 0 else np.inf
    return TlsSolution(theta, s_min, float(cond))


def tls_solve(system) -> TlsSolution:
    """TLS solution of a RegressionSystem's real expansion."""
    return total_least_squares(system.d_real, system.c_real)
