"""Scoring and Monte-Carlo experiment runners."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .grid import ConnectedTree, it_class
from .quantizer import QuantizationConfig, min_bin_spacing
from .swslic import BranchEstimate, SystemEstimate, sw_slic
from .synth import SLOTS, BranchMeasurements, Campaign, GroundTruth, SynthConfig, slot_for, synthesize_campaign

LINE_QTYS = ("r", "x", "b")
TAU_QTYS = tuple(f"tau_{s}" for s in SLOTS)
RATIO_QTYS = ("gamma_v", "gamma_ip", "gamma_iq")


def are(estimate, truth) -> float:
    """Absolute relative error |est - true| / |true|; complex values use the modulus."""
    if truth == 0:
        raise ValueError("relative error against a zero truth value is undefined")
    return abs(estimate - truth) / abs(truth)


@dataclass
class AreReport:
    """Per-run AREs for every branch and quantity.

    `are[branch][qty]` is an (M,) array with NaN where the run failed.
    Quantities: line parameters r, x, b; absolute factors tau_<slot>;
    ratios gamma_* relative to the RQM-side VT. The RQM reference VT is
    not scored since it is fixed by construction.
    """

    are: dict[str, dict[str, np.ndarray]]
    min_spacing: dict[str, float]
    rqm_slot: tuple[str, str]
    failures: dict[str, int] = field(default_factory=dict)

    @property
    def branches(self) -> list[str]:
        return list(self.are)

    @property
    def m(self) -> int:
        first = next(iter(self.are.values()))
        return len(next(iter(first.values())))

    def mare(self, branch: str, qty: str) -> float:
        vals = self.are[branch].get(qty)
        if vals is None or np.isnan(vals).all():
            return math.nan
        return float(np.nanmean(vals))

    def line_mare(self, branch: str) -> float:
        return float(np.mean([self.mare(branch, q) for q in LINE_QTYS]))

    def scored(self, branch: str) -> list[str]:
        skip = f"tau_{self.rqm_slot[1]}" if branch == self.rqm_slot[0] else None
        return [q for q in LINE_QTYS + TAU_QTYS if q in self.are[branch] and q != skip]

    def per_run_mean(self) -> np.ndarray:
        rows = [self.are[b][q] for b in self.are for q in self.scored(b)]
        return np.nanmean(np.vstack(rows), axis=0)

    @property
    def mu_mare(self) -> float:
        """Mean over runs of the mean ARE across line parameters and correction factors."""
        return float(np.nanmean(self.per_run_mean()))

    def concat(self, other: "AreReport") -> "AreReport":
        merged = {b: {q: np.concatenate([v, other.are[b][q]]) for q, v in qs.items()}
                  for b, qs in self.are.items()}
        fails = {b: self.failures.get(b, 0) + other.failures.get(b, 0) for b in self.are}
        return AreReport(merged, dict(self.min_spacing), self.rqm_slot, fails)

    def table(self) -> list[dict]:
        rows = []
        for b in self.are:
            row = {"branch": b, "min_w_spacing": self.min_spacing[b],
                   "line_mare": self.line_mare(b), "failures": self.failures.get(b, 0)}
            for q in self.are[b]:
                row[q] = self.mare(b, q)
            rows.append(row)
        return rows


def _true_ratios(truth: GroundTruth, branch: str, orientation: str) -> tuple[complex, complex, complex]:
    other = "to" if orientation == "from" else "from"
    tv_p = truth.tau(branch, slot_for(orientation, "V"))
    return (truth.tau(branch, slot_for(other, "V")) / tv_p,
            truth.tau(branch, slot_for(orientation, "I")) / tv_p,
            truth.tau(branch, slot_for(other, "I")) / tv_p)


def score(estimate: SystemEstimate, truths: Sequence[GroundTruth]) -> AreReport:
    """AREs of every per-run estimate against the matching ground truth."""
    tree = estimate.tree
    if len(truths) == 1 and estimate.m > 1:
        truths = list(truths) * estimate.m
    if len(truths) != estimate.m:
        raise DataError(f"{len(truths)} ground-truth sets for {estimate.m} runs")
    rqm_slot = (tree.rqm.branch, slot_for(tree.rqm.end, "V"))
    out, spacing, fails = {}, {}, {}
    for bid, be in estimate.branches.items():
        br = tree.branch(bid)
        spacing[bid] = min_bin_spacing(br.params_db, estimate.quantization)
        qs = {q: np.full(estimate.m, np.nan) for q in LINE_QTYS + TAU_QTYS + RATIO_QTYS}
        for j, (res, truth) in enumerate(zip(be.runs, truths)):
            if res is None:
                continue
            p_true = truth.params[bid]
            for q, est, tr in zip(LINE_QTYS, res.params.as_tuple(), p_true.as_tuple()):
                if tr != 0:
                    qs[q][j] = are(est, tr)
            for q, est, tr in zip(RATIO_QTYS, res.gamma.gamma, _true_ratios(truth, bid, be.orientation)):
                qs[q][j] = are(est, tr)
            if not np.isnan(be.tau_runs[j]).any():
                for k, slot in enumerate(SLOTS):
                    qs[f"tau_{slot}"][j] = are(be.tau_runs[j, k], truth.tau(bid, slot))
        if bid == rqm_slot[0]:
            qs.pop(f"tau_{rqm_slot[1]}")
        out[bid] = qs
        fails[bid] = sum(r is None for r in be.runs)
    return AreReport(out, spacing, rqm_slot, fails)


def merge_estimates(parts: Sequence[SystemEstimate]) -> SystemEstimate:
    """Concatenate estimates of disjoint run chunks, in order."""
    first = parts[0]
    branches = {}
    for bid, be in first.branches.items():
        chunks = [p.branches[bid] for p in parts]
        branches[bid] = BranchEstimate(
            bid, be.orientation,
            [r for c in chunks for r in c.runs],
            np.concatenate([c.lam for c in chunks]),
            np.concatenate([c.tau_runs for c in chunks]),
            [e for c in chunks for e in c.errors])
    return SystemEstimate(first.tree, branches, first.quantization,
                          [r for p in parts for r in p.rho_runs])


def _sw_chunk(args):
    tree, runs, q = args
    return sw_slic(tree, runs, q)


def estimate_campaign(campaign: Campaign, jobs: int = 1) -> SystemEstimate:
    q = campaign.config.quantization
    if jobs <= 1 or campaign.m < 2:
        return sw_slic(campaign.tree, campaign.runs, q)
    bounds = np.linspace(0, campaign.m, min(jobs, campaign.m) + 1).astype(int)
    tasks = [(campaign.tree, campaign.runs[a:b], q) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_sw_chunk, tasks))
    return merge_estimates(parts)


@dataclass
class CampaignResult:
    campaign: Campaign
    estimate: SystemEstimate
    report: AreReport


def run_campaign_full(tree: ConnectedTree, config: SynthConfig, m: int, seed: int | None = None,
                      jobs: int = 1) -> CampaignResult:
    if m < 1:
        raise ConfigError(f"need at least one run, got M={m}")
    cfg = config if seed is None else config.with_(seed=seed)
    camp = synthesize_campaign(tree, cfg, runs=m)
    est = estimate_campaign(camp, jobs)
    return CampaignResult(camp, est, score(est, camp.truths))


def run_campaign(tree: ConnectedTree, config: SynthConfig, m: int, seed: int | None = None,
                 jobs: int = 1) -> AreReport:
    """Synthesize M runs, estimate the whole tree and score every run.

    Ratio errors are fixed across runs unless the config resamples them;
    noise is fresh per run.
    """
    return run_campaign_full(tree, config, m, seed, jobs).report


SWEEP_AXES = {
    "noise_sigma": "sigma",
    "it_class": "it_class",
    "rqm_class": "rqm_class",
    "n": "n",
}


@dataclass
class SweepPoint:
    axis: str
    value: object
    report: AreReport


def _campaign_task(args):
    tree, cfg, m = args
    return run_campaign(tree, cfg, m)


def sweep(tree: ConnectedTree, axis: str, values: Sequence, base: SynthConfig, m: int,
          jobs: int = 1) -> list[SweepPoint]:
    """One campaign per value of `axis`, all sharing the base seed.

    Since draws are keyed by purpose, the points differ only in the swept
    quantity: a sigma sweep scales the same noise realizations.
    """
    if not values:
        raise ConfigError("sweep needs at least one value")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    attr = SWEEP_AXES[axis]
    if attr in ("it_class", "rqm_class"):
        for v in values:
            it_class(v)
    cfgs = [base.with_(**{attr: v}) for v in values]
    tasks = [(tree, c, m) for c in cfgs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_campaign_task, tasks))
    else:
        reports = [_campaign_task(t) for t in tasks]
    return [SweepPoint(axis, v, r) for v, r in zip(values, reports)]


# Field-data consistency.

def _as_datetime(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t)
    if np.issubdtype(t.dtype, np.datetime64):
        return t.astype("datetime64[s]")
    return (np.asarray(t, dtype=float) * 1e3).astype("int64").astype("datetime64[ms]").astype("datetime64[s]")


def _weekday(t: np.ndarray) -> np.ndarray:
    days = _as_datetime(t).astype("datetime64[D]").astype("int64")
    return (days + 3) % 7  # 1970-01-01 was a Thursday; Monday = 0


def split_masks(t: np.ndarray, rule: str) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks (S1, S2) for a timestamp array.

    Rules: "weekday" puts Mon/Wed/Fri in S1 and Tue/Thu in S2, dropping
    weekends; "halves" splits chronologically; "alternate" interleaves
    samples; "identical" uses every sample for both sets.
    """
    n = len(t)
    if rule == "identical":
        return np.ones(n, bool), np.ones(n, bool)
    if rule == "halves":
        order = np.argsort(_as_datetime(t), kind="stable")
        s1 = np.zeros(n, bool)
        s1[order[: n // 2]] = True
        return s1, ~s1
    if rule == "alternate":
        s1 = np.arange(n) % 2 == 0
        return s1, ~s1
    if rule == "weekday":
        wd = _weekday(t)
        return np.isin(wd, (0, 2, 4)), np.isin(wd, (1, 3))
    raise ConfigError(f"unknown split rule {rule!r}")


@dataclass
class FieldConsistencyReport:
    s1: SystemEstimate
    s2: SystemEstimate
    n1: int
    n2: int
    bins_equal: dict[str, bool]
    m_star: dict[str, tuple[int | None, int | None]]
    tau_delta: dict[str, dict[str, complex]]

    @property
    def all_bins_equal(self) -> bool:
        return all(self.bins_equal.values())

    def max_vt_delta(self) -> float:
        return max(abs(d[s]) for d in self.tau_delta.values() for s in ("v_pq", "v_qp"))

    def max_ct_delta(self) -> float:
        return max(abs(d[s]) for d in self.tau_delta.values() for s in ("i_pq", "i_qp"))


def field_consistency(tree: ConnectedTree, measurements: Mapping[str, BranchMeasurements],
                      split: str | Callable = "weekday",
                      cfg: QuantizationConfig = QuantizationConfig()) -> FieldConsistencyReport:
    """Estimate on two partitions of one dataset and compare.

    Each partition runs as a single run. `split` is a rule name accepted by
    `split_masks` or a callable mapping timestamps to (mask1, mask2).
    """
    from .ibslic import MIN_SAMPLES

    first = next(iter(measurements.values()))
    if first.t is None:
        raise DataError("dataset has no timestamps to split on")
    for m in measurements.values():
        if m.n != first.n or not np.array_equal(m.t, first.t):
            raise DataError(f"branch {m.branch}: timestamps are not aligned with branch {first.branch}")
    s1, s2 = split(first.t) if callable(split) else split_masks(first.t, split)
    for name, mask in (("S1", s1), ("S2", s2)):
        if mask.sum() < MIN_SAMPLES:
            raise DataError(f"partition {name} has {int(mask.sum())} samples, need at least {MIN_SAMPLES}")
    e1 = sw_slic(tree, [{k: v.take(s1) for k, v in measurements.items()}], cfg)
    e2 = sw_slic(tree, [{k: v.take(s2) for k, v in measurements.items()}], cfg)
    bins, ms, deltas = {}, {}, {}
    for bid in e1.branches:
        m1, m2 = e1.branches[bid].m_star, e2.branches[bid].m_star
        ms[bid] = (m1, m2)
        bins[bid] = m1 is not None and m1 == m2
        f1, f2 = e1.branches[bid].factors, e2.branches[bid].factors
        if f1 is None or f2 is None:
            deltas[bid] = {s: complex(np.nan, np.nan) for s in SLOTS}
        else:
            a, b = f1.as_dict(), f2.as_dict()
            deltas[bid] = {s: a[s] - b[s] for s in SLOTS}
    return FieldConsistencyReport(e1, e2, int(s1.sum()), int(s2.sum()), bins, ms, deltas)
