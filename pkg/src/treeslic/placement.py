"""RQM placement: score every candidate branch end by its campaign mu_MARE."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .grid import ENDS, ConnectedTree
from .harness import run_campaign
from .synth import SynthConfig


@dataclass(frozen=True)
class PlacementRow:
    branch: str
    end: str
    bus: int
    mu_mare: float
    rank: int


@dataclass
class PlacementResult:
    rows: list[PlacementRow]

    @property
    def opt_loc(self) -> PlacementRow:
        return self.rows[0]

    def row(self, branch: str, end: str) -> PlacementRow:
        return next(r for r in self.rows if r.branch == branch and r.end == end)


def candidates(tree: ConnectedTree) -> list[tuple[str, str]]:
    return [(br.id, end) for br in sorted(tree.branches, key=lambda b: b.id) for end in ENDS]


def _score(args) -> float:
    tree, cfg, m = args
    return run_campaign(tree, cfg, m).mu_mare


def rqm_placement(tree: ConnectedTree, config: SynthConfig, m: int, jobs: int = 1) -> PlacementResult:
    """Rank all 2*|branches| RQM locations by mu_MARE, best first.

    Candidates share the seed, so they see the same trajectory, line
    parameters, regular ratio errors and noise. Only the anchored VT and
    its error (the RQM draw) move. Ties rank by branch id, then end.
    """
    cands = candidates(tree)
    tasks = [(tree.with_rqm(b, e), config, m) for b, e in cands]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(_score, tasks))
    else:
        scores = [_score(t) for t in tasks]
    ranked = sorted(zip(cands, scores), key=lambda cs: (cs[1], cs[0]))
    rows = [PlacementRow(b, e, tree.branch(b).bus_at(e), s, k + 1) for k, ((b, e), s) in enumerate(ranked)]
    return PlacementResult(rows)
