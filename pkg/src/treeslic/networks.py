"""Built-in test networks."""

from __future__ import annotations

from .grid import Branch, Bus, ConnectedTree, LineParams, RqmLocation, TO, FROM

# 345 kV subnetwork of the IEEE 118-bus case: (from, to, r, x, total charging b).
_REPLICA_118 = [
    (8, 9, 0.00244, 0.0305, 1.162),
    (9, 10, 0.00258, 0.0322, 1.23),
    (8, 30, 0.00431, 0.0504, 0.514),
    (30, 26, 0.00799, 0.086, 0.908),
    (30, 38, 0.00464, 0.054, 0.422),
    (38, 65, 0.00901, 0.0986, 1.046),
    (65, 64, 0.00269, 0.0302, 0.38),
    (64, 63, 0.00172, 0.02, 0.216),
    (65, 68, 0.00138, 0.016, 0.638),
    (68, 81, 0.00175, 0.0202, 0.808),
]

# Three-branch chain with the line values reported for the field deployment.
_FIELD_CHAIN = [
    (1, 2, 0.00238, 0.0315, 0.3503, "A-B"),
    (2, 3, 0.00384, 0.0518, 0.5755, "B-C"),
    (3, 4, 0.00269, 0.0248, 0.43, "C-D"),
]


def replica_118() -> ConnectedTree:
    """Ten-branch 345 kV tree, RQM on the bus-10 end of branch 9-10."""
    buses = sorted({b for row in _REPLICA_118 for b in row[:2]})
    branches = [Branch(f, t, LineParams(r, x, btot / 2)) for f, t, r, x, btot in _REPLICA_118]
    return ConnectedTree([Bus(i, f"Bus {i}") for i in buses], branches,
                         RqmLocation("9-10", TO), name="replica-118-345kV")


def field_chain() -> ConnectedTree:
    """Four-bus chain A-B-C-D, RQM on the A end of A-B."""
    names = {1: "A", 2: "B", 3: "C", 4: "D"}
    branches = [Branch(f, t, LineParams(r, x, b), name=n) for f, t, r, x, b, n in _FIELD_CHAIN]
    return ConnectedTree([Bus(i, names[i]) for i in names], branches,
                         RqmLocation("A-B", FROM), name="field-chain")


def chain(n_buses: int, params: LineParams | None = None, rqm_end: str = FROM) -> ConnectedTree:
    """Chain 1-2-...-n with identical lines; the RQM sits on branch 1-2."""
    params = params or LineParams(0.0025, 0.03, 0.4)
    buses = [Bus(i, str(i)) for i in range(1, n_buses + 1)]
    branches = [Branch(i, i + 1, params) for i in range(1, n_buses)]
    return ConnectedTree(buses, branches, RqmLocation("1-2", rqm_end), name=f"chain-{n_buses}")


BUILTIN = {
    "replica118": replica_118,
    "field": field_chain,
}
