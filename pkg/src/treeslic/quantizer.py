"""Bin selection for line parameters from the TLS estimate of W = 1 + z*(j*b)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, SqrtAmbiguityError
from .grid import LineParams

_SQRT_RE_MIN = 1e-6
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class QuantizationConfig:
    """Normalized bin steps and the integer bin range.

    Bin m scales every database value by (1 + delta*m); the defaults give
    61 bins covering +/-30%.
    """

    delta_r: float = 0.01
    delta_x: float = 0.01
    delta_b: float = 0.01
    m_min: int = -30
    m_max: int = 30

    def __post_init__(self):
        if self.m_min > self.m_max:
            raise ConfigError(f"empty bin range [{self.m_min}, {self.m_max}]")
        for d in (self.delta_r, self.delta_x, self.delta_b):
            if d <= 0:
                raise ConfigError(f"bin steps must be positive, got {d}")
            if max(abs(d * self.m_min), abs(d * self.m_max)) > 0.3 + 1e-12:
                raise ConfigError(f"step {d} over [{self.m_min}, {self.m_max}] leaves the +/-30% envelope")

    @property
    def m_range(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    @property
    def n_bins(self) -> int:
        return self.m_max - self.m_min + 1


class BinTable(NamedTuple):
    m: np.ndarray
    r: np.ndarray
    x: np.ndarray
    b: np.ndarray
    w: np.ndarray


def f_w(params) -> complex:
    """W = 1 + (r + jx)(jb) = (1 - x*b) + j*r*b."""
    return complex(1.0 - params.x * params.b, params.r * params.b)


def params_at(params_db, m: int, cfg: QuantizationConfig = QuantizationConfig()):
    return LineParams(params_db.r * (1 + cfg.delta_r * m),
                      params_db.x * (1 + cfg.delta_x * m),
                      params_db.b * (1 + cfg.delta_b * m))


def bin_table(params_db, cfg: QuantizationConfig = QuantizationConfig()) -> BinTable:
    try:
        return _cached_table(params_db, cfg)
    except TypeError:  # unhashable duck-typed params
        return _make_table(params_db, cfg)


def _make_table(params_db, cfg: QuantizationConfig) -> BinTable:
    m = cfg.m_range
    r = params_db.r * (1 + cfg.delta_r * m)
    x = params_db.x * (1 + cfg.delta_x * m)
    b = params_db.b * (1 + cfg.delta_b * m)
    tab = BinTable(m, r, x, b, (1.0 - x * b) + 1j * (r * b))
    for a in tab:
        a.flags.writeable = False
    return tab


_cached_table = lru_cache(maxsize=1024)(_make_table)


def sqrt_w(theta1: complex) -> complex:
    """Square root of theta1 on the right half-plane branch."""
    theta1 = complex(theta1)
    if theta1 == 0:
        raise SqrtAmbiguityError("theta1 = 0 has no usable square root")
    w = complex(np.sqrt(theta1))
    if w.real < 0:
        w = -w
    if w.real < _SQRT_RE_MIN:
        raise SqrtAmbiguityError(f"both square roots of theta1 = {theta1} lie on the imaginary axis")
    return w


@dataclass(frozen=True)
class BinSelection:
    params: object
    m_star: int
    distance: float
    outside_grid: bool

    def __iter__(self):
        # Allows `params, m = quantize(...)`.
        yield self.params
        yield self.m_star


def quantize(w_hat: complex, params_db, cfg: QuantizationConfig = QuantizationConfig()) -> BinSelection:
    """Pick the bin whose W(m) is nearest to `w_hat`.

    Ties go to the smaller |m|, then the smaller m. `outside_grid` is set when
    the winner is an end bin and `w_hat` projects beyond it along the W(m)
    curve, i.e. the estimate left the parameter envelope.
    """
    tab = bin_table(params_db, cfg)
    d2 = np.abs(tab.w - complex(w_hat)) ** 2
    best = d2.min()
    tied = np.flatnonzero(d2 <= best * (1 + _TIE_RTOL))
    k = min(tied, key=lambda i: (abs(tab.m[i]), tab.m[i]))
    outside = False
    if len(tab.m) > 1 and k in (0, len(tab.m) - 1):
        inner = 1 if k == 0 else -2
        seg = tab.w[k] - tab.w[inner]
        outside = bool(seg != 0 and ((complex(w_hat) - tab.w[k]) * seg.conjugate()).real > 0)
    m = int(tab.m[k])
    return BinSelection(params_at(params_db, m, cfg), m, float(np.sqrt(d2[k])), outside)


class InjectivityReport(NamedTuple):
    injective: bool
    min_distance: float


def injectivity_check(params_db, cfg: QuantizationConfig = QuantizationConfig()) -> InjectivityReport:
    """Whether all W(m) are pairwise distinct, with the smallest pairwise gap."""
    w = bin_table(params_db, cfg).w
    if len(w) < 2:
        return InjectivityReport(True, float("inf"))
    diff = np.abs(w[:, None] - w[None, :])
    dmin = float(diff[np.triu_indices(len(w), 1)].min())
    return InjectivityReport(dmin > 0, dmin)


def min_bin_spacing(params_db, cfg: QuantizationConfig = QuantizationConfig()) -> float:
    """Smallest gap between adjacent bins; sizes the noise tolerance of bin selection."""
    w = bin_table(params_db, cfg).w
    return float(np.abs(np.diff(w)).min()) if len(w) > 1 else float("inf")
