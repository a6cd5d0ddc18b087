"""Ground-truth trajectories, pi-model currents and measurement corruption.

Randomness is drawn from streams keyed by what they feed (seed, purpose,
bus or branch ids, run index), never by call order. Two consequences the
harness relies on: results do not depend on file ordering or scheduling,
and configurations that differ only in sigma, IT class or RQM location
share every draw they have in common.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError, DataError, SingularLineError
from .grid import (FROM, TO, ConnectedTree, LineParams, RatioError, it_class,
                   sample_ratio_error)
from .quantizer import QuantizationConfig, params_at

# Stream tags.
_PARAMS, _RE, _RQM, _ANGLE, _JITTER, _NOISE = range(1, 7)

# Series slots: name -> (end, kind).
SLOTS = ("v_pq", "v_qp", "i_pq", "i_qp")
SLOT_END = {"v_pq": FROM, "v_qp": TO, "i_pq": FROM, "i_qp": TO}
SLOT_KIND = {"v_pq": "V", "v_qp": "V", "i_pq": "I", "i_qp": "I"}


def slot_for(end: str, kind: str) -> str:
    return {(FROM, "V"): "v_pq", (TO, "V"): "v_qp", (FROM, "I"): "i_pq", (TO, "I"): "i_qp"}[(end, kind)]


@dataclass(frozen=True)
class TrajectoryProfile:
    """Shape of the synthetic operating-point sweep.

    Magnitudes ramp linearly over the campaign, `nominal*(1 -/+ ramp)`, with
    Gaussian jitter of relative size `mag_jitter`. Each branch carries a
    static angle drop drawn from `angle_offset_deg` that is modulated by
    `1 - swing/2 + swing*t`, so flows follow the load. `angle_jitter_deg`
    adds per-sample noise to every bus angle.
    """

    nominal: float = 1.0
    ramp: float = 0.03
    mag_jitter: float = 0.001
    angle_offset_deg: tuple[float, float] = (1.0, 4.0)
    angle_swing: float = 0.1
    angle_jitter_deg: float = 0.0
    sample_period: float = 60.0

    def __post_init__(self):
        lo, hi = self.angle_offset_deg
        if not 0 <= lo <= hi:
            raise ConfigError(f"angle offset range {self.angle_offset_deg} is invalid")
        if min(self.ramp, self.mag_jitter, self.angle_swing, self.angle_jitter_deg) < 0:
            raise ConfigError("profile amplitudes must be nonnegative")


# Heavier loading swing, used for field-like windows that must bin identically.
FIELD_PROFILE = TrajectoryProfile(angle_swing=1.0, angle_jitter_deg=0.05)


@dataclass(frozen=True)
class BusTrajectory:
    bus: int
    samples: np.ndarray


@dataclass(frozen=True)
class BranchMeasurements:
    """Time-aligned phasor series at both ends of one branch."""

    branch: str
    v_pq: np.ndarray
    v_qp: np.ndarray
    i_pq: np.ndarray
    i_qp: np.ndarray
    t: np.ndarray | None = None

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=complex).ravel() for a in (self.v_pq, self.v_qp, self.i_pq, self.i_qp)]
        lengths = {len(a) for a in arrays}
        if len(lengths) != 1:
            raise DataError(f"branch {self.branch}: series lengths differ {sorted(lengths)}")
        for name, arr in zip(SLOTS, arrays):
            object.__setattr__(self, name, arr)
        if self.t is not None:
            t = np.asarray(self.t)
            if len(t) != len(arrays[0]):
                raise DataError(f"branch {self.branch}: {len(t)} timestamps for {len(arrays[0])} samples")
            object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return len(self.v_pq)

    def series(self, slot: str) -> np.ndarray:
        return getattr(self, slot)

    def voltage_at(self, end: str) -> np.ndarray:
        return self.v_pq if end == FROM else self.v_qp

    def take(self, idx) -> "BranchMeasurements":
        t = None if self.t is None else self.t[idx]
        return BranchMeasurements(self.branch, self.v_pq[idx], self.v_qp[idx],
                                  self.i_pq[idx], self.i_qp[idx], t)

    def scaled(self, k: complex) -> "BranchMeasurements":
        return BranchMeasurements(self.branch, k * self.v_pq, k * self.v_qp,
                                  k * self.i_pq, k * self.i_qp, self.t)


@dataclass(frozen=True)
class NoiseConfig:
    """Additive Gaussian noise, `sigma` relative to the series magnitude.

    `reference` fixes the magnitude base; by default it is mean |s*| of each
    series, which makes current noise relative to the actual loading.
    """

    sigma: float
    seed: int | None = None
    reference: float | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
        if self.reference is not None and self.reference <= 0:
            raise ConfigError("noise reference magnitude must be positive")


def _keyed(*key) -> np.random.Generator:
    key = [int(k) for k in key]
    if min(key) < 0:
        raise ConfigError(f"seeds and bus ids must be nonnegative for keyed streams, got {key}")
    return np.random.default_rng(key)


def _time_axis(n: int) -> np.ndarray:
    return np.array([0.5]) if n == 1 else np.linspace(0.0, 1.0, n)


def generate_trajectories(tree: ConnectedTree, n: int, profile: TrajectoryProfile = TrajectoryProfile(),
                          seed: int = 0) -> list[BusTrajectory]:
    """True bus-voltage series for every bus of `tree`, sorted by bus id.

    Angles are accumulated outward from the lowest-numbered bus, one drop per
    branch. A single sample (n = 1) sits at the ramp midpoint, i.e. the
    nominal magnitude when jitter is off.
    """
    if n < 1:
        raise ConfigError(f"need at least one sample, got n={n}")
    s = _time_axis(n)
    drop_shape = 1.0 - profile.angle_swing / 2 + profile.angle_swing * s
    root = min(tree.bus_ids)
    angle = {root: np.zeros(n)}
    stack = [root]
    while stack:
        bus = stack.pop()
        for nb, br_id in tree.adjacency[bus]:
            if nb in angle:
                continue
            br = tree.branch(br_id)
            rng = _keyed(seed, _ANGLE, br.from_bus, br.to_bus)
            lo, hi = profile.angle_offset_deg
            drop = np.deg2rad(rng.uniform(lo, hi)) * (1 if rng.random() < 0.5 else -1)
            angle[nb] = angle[bus] - drop * drop_shape
            stack.append(nb)
    out = []
    for bus in sorted(tree.bus_ids):
        rng = _keyed(seed, _JITTER, bus)
        jit = rng.standard_normal((2, n))
        mag = profile.nominal * (1.0 + profile.ramp * (2 * s - 1) + profile.mag_jitter * jit[0])
        mag = np.clip(mag, 0.9, 1.1)
        ang = angle[bus] + np.deg2rad(profile.angle_jitter_deg) * jit[1]
        out.append(BusTrajectory(bus, mag * np.exp(1j * ang)))
    return out


def true_branch_currents(v_p, v_q, params):
    """Pi-model end currents with shunt admittance j*b at each end.

    Works on scalars or arrays. Returns (i_pq, i_qp), both flowing into the line.
    """
    z = complex(params.r, params.x)
    if z == 0:
        raise SingularLineError("line with r = x = 0 has no finite admittance")
    y = 1.0 / z
    ysh = 1j * params.b
    v_p = np.asarray(v_p, dtype=complex)
    v_q = np.asarray(v_q, dtype=complex)
    i_pq = ysh * v_p + (v_p - v_q) * y
    i_qp = ysh * v_q - (v_p - v_q) * y
    return i_pq, i_qp


def corrupt(series, alpha, noise: NoiseConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Measured series m = alpha * s + e.

    `e` has independent N(0, (sigma*ref)^2) real and imaginary parts, with
    `ref` the mean magnitude of `series` unless the noise config fixes it.
    The draw consumes one (n, 2) standard-normal block from `rng`.
    """
    s = np.asarray(series, dtype=complex).ravel()
    a = alpha.value if isinstance(alpha, RatioError) else complex(alpha)
    if noise.sigma == 0:
        return s.copy() if a == 1 else a * s
    rng = rng if rng is not None else np.random.default_rng(noise.seed)
    ref = noise.reference if noise.reference is not None else float(np.mean(np.abs(s)))
    e = rng.standard_normal((len(s), 2))
    return a * s + noise.sigma * ref * (e[:, 0] + 1j * e[:, 1])


@dataclass(frozen=True)
class SynthConfig:
    """Everything that defines a synthetic Monte-Carlo campaign."""

    n: int = 600
    sigma: float = 0.0003
    it_class: object = 0.6
    rqm_class: object = 0.15
    profile: TrajectoryProfile = TrajectoryProfile()
    quantization: QuantizationConfig = QuantizationConfig()
    perturb_params: bool = True
    resample_re_per_run: bool = False
    noise_reference: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
        it_class(self.it_class)
        it_class(self.rqm_class)

    def with_(self, **kw) -> "SynthConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class GroundTruth:
    """True parameters, their bin indices and the ratio error of every slot."""

    params: Mapping[str, LineParams]
    m_true: Mapping[str, int]
    ratio_errors: Mapping[tuple[str, str], complex]

    def tau(self, branch: str, slot: str) -> complex:
        return 1.0 / self.ratio_errors[(branch, slot)]


@dataclass
class Campaign:
    """One or more measurement runs over a common ground truth and trajectory."""

    tree: ConnectedTree
    config: SynthConfig
    runs: list[dict[str, BranchMeasurements]]
    truths: list[GroundTruth]
    trajectories: dict[int, np.ndarray] = field(repr=False)
    clean: dict[str, BranchMeasurements] = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.runs)


def draw_true_params(tree: ConnectedTree, cfg: SynthConfig) -> tuple[dict[str, LineParams], dict[str, int]]:
    params, ms = {}, {}
    q = cfg.quantization
    for br in tree.branches:
        if br.params_true is not None:
            params[br.id], ms[br.id] = br.params_true, None
            continue
        m = int(_keyed(cfg.seed, _PARAMS, br.from_bus, br.to_bus).integers(q.m_min, q.m_max + 1)) \
            if cfg.perturb_params else 0
        params[br.id], ms[br.id] = params_at(br.params_db, m, q), m
    return params, ms


def draw_ratio_errors(tree: ConnectedTree, cfg: SynthConfig, run: int = 0) -> dict[tuple[str, str], complex]:
    """Ratio error for every (branch, slot); the RQM slot uses the RQM class."""
    regular, rqm_spec = it_class(cfg.it_class), it_class(cfg.rqm_class)
    extra = [run] if cfg.resample_re_per_run else []
    rqm_slot = (tree.rqm.branch, slot_for(tree.rqm.end, "V"))
    out = {}
    for br in tree.branches:
        for k, slot in enumerate(SLOTS):
            if (br.id, slot) == rqm_slot:
                alpha = sample_ratio_error(rqm_spec, _keyed(cfg.seed, _RQM, *extra))
            else:
                alpha = sample_ratio_error(regular, _keyed(cfg.seed, _RE, br.from_bus, br.to_bus, k, *extra))
            out[(br.id, slot)] = alpha.value
    return out


def synthesize_campaign(tree: ConnectedTree, config: SynthConfig = SynthConfig(), runs: int = 1,
                        noise_seed: int | None = None) -> Campaign:
    """Synthesize `runs` noisy measurement sets over one trajectory.

    Ratio errors stay fixed across runs unless `resample_re_per_run` is set;
    noise is fresh per run. The noise of run j on a given slot does not
    depend on sigma, IT class or RQM location, so sweeps are paired.
    """
    if runs < 1:
        raise ConfigError(f"need at least one run, got {runs}")
    nseed = config.seed if noise_seed is None else noise_seed
    trajectories = {bt.bus: bt.samples for bt in generate_trajectories(tree, config.n, config.profile, config.seed)}
    params, m_true = draw_true_params(tree, config)
    t = np.arange(config.n) * config.profile.sample_period
    clean = {}
    for br in tree.branches:
        v_p, v_q = trajectories[br.from_bus], trajectories[br.to_bus]
        i_pq, i_qp = true_branch_currents(v_p, v_q, params[br.id])
        clean[br.id] = BranchMeasurements(br.id, v_p, v_q, i_pq, i_qp, t)
    noise = NoiseConfig(config.sigma, reference=config.noise_reference)
    fixed = None if config.resample_re_per_run else draw_ratio_errors(tree, config)
    out_runs, truths = [], []
    for j in range(runs):
        res = fixed if fixed is not None else draw_ratio_errors(tree, config, j)
        truth = GroundTruth(params, m_true, res)
        meas = {}
        for br in tree.branches:
            series = []
            for k, slot in enumerate(SLOTS):
                rng = _keyed(nseed, _NOISE, j, br.from_bus, br.to_bus, k)
                series.append(corrupt(clean[br.id].series(slot), res[(br.id, slot)], noise, rng))
            meas[br.id] = BranchMeasurements(br.id, *series, t)
        out_runs.append(meas)
        truths.append(truth)
    return Campaign(tree, config, out_runs, truths, trajectories, clean)


def synthesize_field_dataset(tree: ConnectedTree, config: SynthConfig, days: int = 10,
                             start: str = "2024-03-04T08:00", per_day: int | None = None) -> Campaign:
    """Single-run campaign stamped over `days` consecutive calendar days.

    Samples are spread evenly over the days between 08:00 and 18:00, so
    weekday-based splits yield interleaved, disjoint windows.
    """
    per_day = per_day or max(1, config.n // days)
    cfg = config.with_(n=per_day * days)
    camp = synthesize_campaign(tree, cfg, runs=1)
    day = np.repeat(np.arange(days), per_day)
    within = np.tile(np.linspace(0, 10 * 3600, per_day, endpoint=False), days)
    t0 = np.datetime64(start, "s")
    stamps = t0 + (day * 86400 + within).astype("timedelta64[s]")
    camp.runs[0] = {k: BranchMeasurements(k, m.v_pq, m.v_qp, m.i_pq, m.i_qp, stamps)
                    for k, m in camp.runs[0].items()}
    return camp

