"""Network topology, line parameters and instrument-transformer error models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, TreeError, UnknownBusError

FROM, TO = "from", "to"
ENDS = (FROM, TO)

# Slack on the +/-30% envelope so grid values such as 1 + 0.01*30 pass.
_ENVELOPE = 0.3 + 1e-9


@dataclass(frozen=True)
class LineParams:
    """Series resistance, series reactance and per-end shunt susceptance (p.u.)."""

    r: float
    x: float
    b: float

    def __post_init__(self):
        vals = (self.r, self.x, self.b)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"non-finite line parameters {vals}")
        if self.r <= 0 or self.x <= 0:
            raise ConfigError(f"r and x must be positive, got r={self.r}, x={self.x}")
        if self.b < 0:
            raise ConfigError(f"b must be nonnegative, got {self.b}")

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)

    @property
    def y(self) -> complex:
        return 1.0 / self.z

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.x, self.b)


@dataclass(frozen=True)
class Bus:
    id: int
    name: str = ""


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    params_db: LineParams
    params_true: LineParams | None = None
    name: str | None = None

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise TreeError(f"branch {self.id} connects bus {self.from_bus} to itself")
        if self.params_true is not None:
            for db, tr in zip(self.params_db.as_tuple(), self.params_true.as_tuple()):
                if db == 0:
                    if tr != 0:
                        raise ConfigError(f"branch {self.id}: true value {tr} with zero database value")
                elif abs(tr / db - 1.0) > _ENVELOPE:
                    raise ConfigError(f"branch {self.id}: true value {tr} outside 30% of {db}")

    @property
    def id(self) -> str:
        return self.name or f"{self.from_bus}-{self.to_bus}"

    def bus_at(self, end: str) -> int:
        if end == FROM:
            return self.from_bus
        if end == TO:
            return self.to_bus
        raise ConfigError(f"end must be 'from' or 'to', got {end!r}")

    def end_at(self, bus: int) -> str:
        if bus == self.from_bus:
            return FROM
        if bus == self.to_bus:
            return TO
        raise TreeError(f"bus {bus} is not an end of branch {self.id}")

    def other(self, bus: int) -> int:
        return self.to_bus if self.end_at(bus) == FROM else self.from_bus


@dataclass(frozen=True)
class ITClassSpec:
    """Accuracy class limits: magnitude error as a fraction, angle error in radians."""

    max_magnitude_error: float
    max_angle_error: float

    def __post_init__(self):
        if self.max_magnitude_error < 0 or self.max_angle_error < 0:
            raise ConfigError("IT class limits must be nonnegative")
        if self.max_magnitude_error >= 0.05:
            raise ConfigError(f"magnitude limit {self.max_magnitude_error} is not an IT accuracy class")


# Angle limits scale with the class in the proportions of IEEE C57.13.
IT_CLASSES: Mapping[float, ITClassSpec] = MappingProxyType({
    0.0: ITClassSpec(0.0, 0.0),
    0.15: ITClassSpec(0.0015, 0.002),
    0.3: ITClassSpec(0.003, 0.0045),
    0.6: ITClassSpec(0.006, 0.009),
    1.2: ITClassSpec(0.012, 0.018),
})


def it_class(label) -> ITClassSpec:
    """Resolve a class label (0.15, "0.6", ...) or pass an ITClassSpec through."""
    if isinstance(label, ITClassSpec):
        return label
    try:
        key = float(label)
    except (TypeError, ValueError):
        raise ConfigError(f"unknown IT class {label!r}") from None
    for k, spec in IT_CLASSES.items():
        if math.isclose(k, key, abs_tol=1e-12):
            return spec
    raise ConfigError(f"unknown IT class {label!r}; known: {sorted(IT_CLASSES)}")


@dataclass(frozen=True)
class RatioError:
    """Complex multiplicative error of one instrument transformer."""

    value: complex

    @property
    def tau(self) -> complex:
        """Correction factor, the inverse of the ratio error."""
        return 1.0 / self.value

    def within(self, spec: ITClassSpec, tol: float = 1e-12) -> bool:
        mag, ang = abs(self.value), np.angle(self.value)
        return (abs(mag - 1.0) <= spec.max_magnitude_error + tol
                and abs(ang) <= spec.max_angle_error + tol)


def sample_ratio_error(spec: ITClassSpec, rng_seed) -> RatioError:
    """Draw a ratio error uniformly inside the class box.

    `rng_seed` is anything `numpy.random.default_rng` accepts, including a
    Generator, in which case two uniforms are consumed from it.
    """
    rng = np.random.default_rng(rng_seed)
    u_mag, u_ang = rng.uniform(-1.0, 1.0, size=2)
    if spec.max_magnitude_error == 0 and spec.max_angle_error == 0:
        return RatioError(1 + 0j)
    mag = 1.0 + spec.max_magnitude_error * u_mag
    ang = spec.max_angle_error * u_ang
    return RatioError(complex(mag * np.exp(1j * ang)))


@dataclass(frozen=True)
class RqmLocation:
    branch: str
    end: str


class Hop(NamedTuple):
    """One branch of a path, oriented in traversal direction."""

    branch: str
    near: int
    far: int


@dataclass(frozen=True)
class ConnectedTree:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    rqm: RqmLocation
    name: str = ""
    adjacency: Mapping[int, tuple[tuple[int, str], ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise TreeError("bus ids are not unique")
        known = set(ids)
        br_ids = [br.id for br in self.branches]
        if len(set(br_ids)) != len(br_ids):
            raise TreeError("branch ids are not unique")
        adj: dict[int, list[tuple[int, str]]] = {i: [] for i in ids}
        for br in self.branches:
            for bus in (br.from_bus, br.to_bus):
                if bus not in known:
                    raise TreeError(f"branch {br.id} references unknown bus {bus}")
            adj[br.from_bus].append((br.to_bus, br.id))
            adj[br.to_bus].append((br.from_bus, br.id))
        if len(self.branches) != len(ids) - 1:
            raise TreeError(f"{len(ids)} buses need {len(ids) - 1} branches for a tree, got {len(self.branches)}")
        # Sorted adjacency makes every traversal independent of file order.
        frozen = {k: tuple(sorted(v, key=lambda nb: (nb[0], nb[1]))) for k, v in adj.items()}
        object.__setattr__(self, "adjacency", MappingProxyType(frozen))
        if ids:
            seen = _reachable(frozen, ids[0])
            if len(seen) != len(ids):
                missing = sorted(known - seen)
                raise TreeError(f"tree is disconnected; unreachable buses {missing}")
        if self.rqm.branch not in br_ids:
            raise TreeError(f"RQM references unknown branch {self.rqm.branch!r}")
        if self.rqm.end not in ENDS:
            raise TreeError(f"RQM end must be 'from' or 'to', got {self.rqm.end!r}")
        object.__setattr__(self, "_by_id", {br.id: br for br in self.branches})

    def __reduce__(self):
        return (ConnectedTree, (self.buses, self.branches, self.rqm, self.name))

    def branch(self, branch_id: str) -> Branch:
        try:
            return self._by_id[branch_id]
        except KeyError:
            raise TreeError(f"unknown branch {branch_id!r}") from None

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def rqm_bus(self) -> int:
        return self.branch(self.rqm.branch).bus_at(self.rqm.end)

    def with_rqm(self, branch_id: str, end: str) -> "ConnectedTree":
        return ConnectedTree(self.buses, self.branches, RqmLocation(branch_id, end), self.name)

    def leaves(self) -> list[int]:
        return [bus for bus, nbs in self.adjacency.items() if len(nbs) == 1]


def _reachable(adj, start) -> set[int]:
    seen, stack = {start}, [start]
    while stack:
        for nb, _ in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen


def path_finder(tree: ConnectedTree, goal: int, start: int | None = None) -> list[Hop]:
    """Unique simple path from the RQM bus (or `start`) to `goal`.

    Depth-first search over the tree. Each hop is oriented in the direction
    of travel, so `hop.far` of one hop is `hop.near` of the next and the
    intermediate buses are the `far` ends of all but the last hop.
    """
    if goal not in tree.adjacency:
        raise UnknownBusError(goal)
    start = tree.rqm_bus if start is None else start
    if start not in tree.adjacency:
        raise UnknownBusError(start)
    parent: dict[int, tuple[int, str] | None] = {start: None}
    stack = [start]
    while stack:
        bus = stack.pop()
        if bus == goal:
            break
        for nb, br in reversed(tree.adjacency[bus]):
            if nb not in parent:
                parent[nb] = (bus, br)
                stack.append(nb)
    hops = []
    bus = goal
    while parent[bus] is not None:
        prev, br = parent[bus]
        hops.append(Hop(br, prev, bus))
        bus = prev
    return hops[::-1]


def path_sequence(hops: Sequence[Hop]) -> list:
    """Render hops as the alternating [(p, q), bus, (q, r), ...] form."""
    out: list = []
    for i, hop in enumerate(hops):
        if i:
            out.append(hop.near)
        out.append((hop.near, hop.far))
    return out


def dfs_branch_order(tree: ConnectedTree) -> list[Hop]:
    """Every branch once, in DFS pre-order from the RQM bus, oriented away from it."""
    start = tree.rqm_bus
    order: list[Hop] = []
    seen = {start}
    # Visit the RQM branch first so that it anchors the order.
    rqm = tree.branch(tree.rqm.branch)
    stack: list[tuple[int, int, str]] = []
    nbs = [nb for nb in tree.adjacency[start] if nb[1] != rqm.id]
    for nb, br in reversed(nbs):
        stack.append((start, nb, br))
    stack.append((start, rqm.other(start), rqm.id))
    while stack:
        near, far, br = stack.pop()
        if far in seen:
            continue
        seen.add(far)
        order.append(Hop(br, near, far))
        for nb, nbr in reversed(tree.adjacency[far]):
            if nb not in seen:
                stack.append((far, nb, nbr))
    return order


def orientation_of(tree: ConnectedTree, branch_id: str) -> str:
    """End of `branch_id` nearer the RQM bus; it plays the p role in estimation."""
    br = tree.branch(branch_id)
    if br.id == tree.rqm.branch:
        return tree.rqm.end
    d_from = len(path_finder(tree, br.from_bus))
    d_to = len(path_finder(tree, br.to_bus))
    return FROM if d_from < d_to else TO
