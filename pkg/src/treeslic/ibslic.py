"""Single-branch estimation: line parameters and correction-factor ratios."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError
from .grid import FROM, LineParams
from .quantizer import QuantizationConfig, f_w, quantize, sqrt_w
from .regression import build_system
from .synth import BranchMeasurements
from .tls import TlsSolution, tls_solve

log = logging.getLogger(__name__)

MIN_SAMPLES = 8
PLAUSIBLE_RATIO = (0.8, 1.25)


@dataclass(frozen=True)
class CfrEstimate:
    """Correction-factor ratios relative to the p-end VT.

    gamma = (tau_Vq / tau_Vp, tau_Ip / tau_Vp, tau_Iq / tau_Vp).
    """

    gamma: tuple[complex, complex, complex]

    @property
    def v(self) -> complex:
        return self.gamma[0]

    @property
    def i_p(self) -> complex:
        return self.gamma[1]

    @property
    def i_q(self) -> complex:
        return self.gamma[2]

    def implausible(self, bounds=PLAUSIBLE_RATIO) -> list[int]:
        lo, hi = bounds
        return [k for k, g in enumerate(self.gamma) if not lo <= abs(g) <= hi]


@dataclass(frozen=True)
class CorrectionFactorSet:
    """Correction factors of the four ITs of a branch, keyed by its own ends."""

    tau_v_pq: complex
    tau_v_qp: complex
    tau_i_pq: complex
    tau_i_qp: complex

    def as_dict(self) -> dict[str, complex]:
        return {"v_pq": self.tau_v_pq, "v_qp": self.tau_v_qp,
                "i_pq": self.tau_i_pq, "i_qp": self.tau_i_qp}

    @classmethod
    def from_oriented(cls, near: complex, v_far: complex, i_near: complex, i_far: complex,
                      orientation: str) -> "CorrectionFactorSet":
        """Build from p/q-role factors, mapping back to from/to ends."""
        if orientation == FROM:
            return cls(near, v_far, i_near, i_far)
        return cls(v_far, near, i_far, i_near)


@dataclass(frozen=True)
class IbSlicResult:
    params: LineParams
    m_star: int
    gamma: CfrEstimate
    theta: np.ndarray
    w_hat: complex
    tls: TlsSolution = field(repr=False)
    orientation: str = FROM
    w_gap: float = 0.0
    outside_grid: bool = False
    warnings: tuple[str, ...] = ()


def ib_slic(meas: BranchMeasurements, params_db: LineParams,
            cfg: QuantizationConfig = QuantizationConfig(), orientation: str = FROM) -> IbSlicResult:
    """Estimate one branch's line parameters and correction-factor ratios.

    Parameters
    ----------
    meas : BranchMeasurements
    params_db : LineParams
        Database values that anchor the bin grid.
    cfg : QuantizationConfig
    orientation : {"from", "to"}
        End that plays the p role; ratios are relative to the VT at that end.

    Returns
    -------
    IbSlicResult
        `w_gap` is |W_hat - f_w(params)|, the distance from the TLS estimate
        to the chosen bin.
    """
    if meas.n < MIN_SAMPLES:
        raise DataError(f"branch {meas.branch}: {meas.n} samples, need at least {MIN_SAMPLES}")
    sol = tls_solve(build_system(meas, orientation))
    theta = sol.theta
    w_hat = sqrt_w(theta[0])
    sel = quantize(w_hat, params_db, cfg)
    z = sel.params.z
    gamma = CfrEstimate((complex(theta[1] / w_hat), complex(theta[2] / (w_hat * z)), complex(theta[3] / z)))
    warnings = []
    bad = gamma.implausible()
    if bad:
        msg = f"branch {meas.branch}: implausible ratio magnitudes at {bad}: {[abs(gamma.gamma[k]) for k in bad]}"
        log.warning(msg)
        warnings.append(msg)
    if sel.outside_grid:
        warnings.append(f"branch {meas.branch}: W estimate beyond the end bin m={sel.m_star}")
    return IbSlicResult(sel.params, sel.m_star, gamma, theta, w_hat, sol, orientation,
                        abs(w_hat - f_w(sel.params)), sel.outside_grid, tuple(warnings))


def average_rqm_branch_factors(gammas: Sequence[CfrEstimate], orientation: str = FROM) -> CorrectionFactorSet:
    """Absolute factors of the RQM branch, taking its RQM-end VT as 1 + j0.

    `gammas` are per-run ratios with the RQM end in the p role.
    """
    if not gammas:
        raise DataError("no runs to average")
    g = np.array([c.gamma for c in gammas]).mean(axis=0)
    return CorrectionFactorSet.from_oriented(1 + 0j, complex(g[0]), complex(g[1]), complex(g[2]), orientation)
