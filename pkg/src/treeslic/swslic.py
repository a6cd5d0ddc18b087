"""System-wide calibration: propagate the RQM anchor across the tree.

Every branch is estimated with its RQM-side end in the p role. The absolute
VT factor at that end follows from a chain that starts at the RQM VT and
alternates two kinds of link:

* a same-bus voltage ratio rho between the VTs of two branches meeting at a bus;
* a branch's own VT ratio, far end over near end.

Factors from the same run are multiplied before averaging over runs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DataError, MissingFactorError, SlicError
from .grid import ConnectedTree, Hop, LineParams, dfs_branch_order, path_finder
from .ibslic import CfrEstimate, CorrectionFactorSet, IbSlicResult, ib_slic
from .quantizer import QuantizationConfig, params_at
from .synth import BranchMeasurements

_RHO_MIN_MAG = 1e-9


@dataclass(frozen=True)
class RhoEstimate:
    """Mean ratio of two VT readings of one bus voltage.

    value = tau_out / tau_in for v_in = V/tau_in and v_out = V/tau_out.
    """

    value: complex
    n_used: int
    n_skipped: int = 0
    bus: int | None = None
    incoming: str | None = None
    outgoing: str | None = None


def estimate_rho(v_incoming, v_outgoing, n: int | None = None, **context) -> RhoEstimate:
    """rho = mean over samples of v_incoming / v_outgoing.

    Samples with |v_outgoing| below 1e-9 are skipped. `n` limits the
    estimate to the first n samples.
    """
    v_in = np.asarray(v_incoming, dtype=complex).ravel()
    v_out = np.asarray(v_outgoing, dtype=complex).ravel()
    if len(v_in) != len(v_out):
        raise DataError(f"rho series lengths differ: {len(v_in)} vs {len(v_out)}")
    if n is not None:
        if not 1 <= n <= len(v_in):
            raise DataError(f"rho sample count {n} outside [1, {len(v_in)}]")
        v_in, v_out = v_in[:n], v_out[:n]
    ok = np.abs(v_out) >= _RHO_MIN_MAG
    if not ok.any():
        raise DataError(f"every outgoing sample is below {_RHO_MIN_MAG:g} in magnitude")
    value = complex(np.mean(v_in[ok] / v_out[ok]))
    return RhoEstimate(value, int(ok.sum()), int((~ok).sum()), **context)


class RhoLink(NamedTuple):
    bus: int
    incoming: str
    outgoing: str


class VtLink(NamedTuple):
    branch: str


def lambda_chain(tree: ConnectedTree, target: str) -> list:
    """Links from the RQM VT to the VT at the RQM-side end of `target`."""
    br = tree.branch(target)
    if br.id == tree.rqm.branch:
        return []
    near = min((br.from_bus, br.to_bus), key=lambda b: len(path_finder(tree, b)))
    hops = path_finder(tree, near)
    links: list = []
    current = tree.rqm.branch
    for hop in hops:
        if hop.branch != current:
            links.append(RhoLink(hop.near, current, hop.branch))
        links.append(VtLink(hop.branch))
        current = hop.branch
    if current != target:
        links.append(RhoLink(near, current, target))
    return links


def compute_lambda(chain: Sequence, rho_runs: Sequence[Mapping], gamma_runs: Sequence[Mapping]) -> np.ndarray:
    """Per-run chain products; the anchored Lambda is their mean.

    `rho_runs[j]` maps RhoLink -> complex and `gamma_runs[j]` maps a branch id
    to its CfrEstimate with the RQM-side end in the p role.
    """
    if len(rho_runs) != len(gamma_runs):
        raise DataError("rho and ratio maps cover different numbers of runs")
    out = np.ones(len(gamma_runs), dtype=complex)
    for j, (rhos, gammas) in enumerate(zip(rho_runs, gamma_runs)):
        for link in chain:
            if isinstance(link, RhoLink):
                if link not in rhos:
                    raise MissingFactorError(f"run {j}: no rho at bus {link.bus} between {link.incoming} and {link.outgoing}")
                out[j] *= rhos[link]
            else:
                g = gammas.get(link.branch)
                if g is None:
                    raise MissingFactorError(f"run {j}: no VT ratio for branch {link.branch}")
                out[j] *= g.v
    return out


def branch_correction_factors(lam: complex, gamma: CfrEstimate, orientation: str) -> CorrectionFactorSet:
    """Absolute factors from the near-end anchor and the branch's own ratios."""
    return CorrectionFactorSet.from_oriented(lam, lam * gamma.v, lam * gamma.i_p, lam * gamma.i_q, orientation)


@dataclass
class BranchEstimate:
    branch: str
    orientation: str
    runs: list[IbSlicResult | None]
    lam: np.ndarray
    tau_runs: np.ndarray  # (M, 4) in v_pq, v_qp, i_pq, i_qp order, NaN on failed runs
    errors: list[str] = field(default_factory=list)

    @property
    def ok_runs(self) -> list[IbSlicResult]:
        return [r for r in self.runs if r is not None]

    @property
    def m_star(self) -> int | None:
        ms = [r.m_star for r in self.ok_runs]
        if not ms:
            return None
        counts = Counter(ms)
        top = max(counts.values())
        return min((m for m, c in counts.items() if c == top), key=lambda m: (abs(m), m))

    @property
    def factors(self) -> CorrectionFactorSet | None:
        good = ~np.isnan(self.tau_runs).any(axis=1)
        if not good.any():
            return None
        return CorrectionFactorSet(*(complex(v) for v in self.tau_runs[good].mean(axis=0)))

    @property
    def gamma(self) -> CfrEstimate | None:
        ok = self.ok_runs
        if not ok:
            return None
        g = np.array([r.gamma.gamma for r in ok]).mean(axis=0)
        return CfrEstimate(tuple(complex(v) for v in g))


@dataclass
class SystemEstimate:
    tree: ConnectedTree
    branches: dict[str, BranchEstimate]
    quantization: QuantizationConfig
    rho_runs: list[dict] = field(repr=False, default_factory=list)

    @property
    def m(self) -> int:
        return len(self.rho_runs)

    @property
    def errors(self) -> dict[str, list[str]]:
        return {k: v.errors for k, v in self.branches.items() if v.errors}

    def params(self, branch: str) -> LineParams | None:
        m = self.branches[branch].m_star
        return None if m is None else params_at(self.tree.branch(branch).params_db, m, self.quantization)


def _voltage_at(meas: BranchMeasurements, tree: ConnectedTree, branch: str, bus: int) -> np.ndarray:
    return meas.voltage_at(tree.branch(branch).end_at(bus))


def sw_slic(tree: ConnectedTree, runs: Sequence[Mapping[str, BranchMeasurements]],
            cfg: QuantizationConfig = QuantizationConfig()) -> SystemEstimate:
    """Estimate every branch of `tree` from M measurement runs.

    One branch failing in a run is recorded on that branch and on every
    branch whose anchor chain passes through it; other branches proceed.
    """
    if not runs:
        raise DataError("need at least one run")
    for j, run in enumerate(runs):
        missing = [br.id for br in tree.branches if br.id not in run]
        if missing:
            raise DataError(f"run {j}: no measurements for branch(es) {', '.join(missing)}")
    order: list[Hop] = dfs_branch_order(tree)
    orient = {h.branch: tree.branch(h.branch).end_at(h.near) for h in order}
    chains = {h.branch: lambda_chain(tree, h.branch) for h in order}

    results: dict[str, list[IbSlicResult | None]] = {h.branch: [] for h in order}
    errors: dict[str, list[str]] = {h.branch: [] for h in order}
    gamma_runs, rho_runs = [], []
    for j, run in enumerate(runs):
        gammas = {}
        for h in order:
            br = tree.branch(h.branch)
            try:
                res = ib_slic(run[br.id], br.params_db, cfg, orient[br.id])
            except SlicError as exc:
                errors[br.id].append(f"run {j}: {exc}")
                res = None
            results[br.id].append(res)
            if res is not None:
                gammas[br.id] = res.gamma
        rhos = {}
        for chain in chains.values():
            for link in chain:
                if isinstance(link, RhoLink) and link not in rhos:
                    v_in = _voltage_at(run[link.incoming], tree, link.incoming, link.bus)
                    v_out = _voltage_at(run[link.outgoing], tree, link.outgoing, link.bus)
                    rhos[link] = estimate_rho(v_in, v_out, bus=link.bus, incoming=link.incoming,
                                              outgoing=link.outgoing).value
        gamma_runs.append(gammas)
        rho_runs.append(rhos)

    estimates = {}
    m_runs = len(runs)
    for h in order:
        bid = h.branch
        lam = np.full(m_runs, np.nan + 0j)
        tau = np.full((m_runs, 4), np.nan + 0j)
        for j in range(m_runs):
            res = results[bid][j]
            try:
                lam[j] = compute_lambda(chains[bid], [rho_runs[j]], [gamma_runs[j]])[0]
            except MissingFactorError as exc:
                if res is not None:
                    errors[bid].append(str(exc))
                continue
            if res is not None:
                cf = branch_correction_factors(lam[j], res.gamma, orient[bid])
                tau[j] = list(cf.as_dict().values())
        estimates[bid] = BranchEstimate(bid, orient[bid], results[bid], lam, tau, errors[bid])
    return SystemEstimate(tree, estimates, cfg, rho_runs)
