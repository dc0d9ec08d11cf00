"""Routing validation (A1-A3), branching/joining points, 2-by-2 ground truth."""

from __future__ import annotations

import enum
from itertools import combinations

from ..errors import A1Violation, A2Violation, A3Violation, DegenerateComponent
from .model import Routing, Topology


class TwoByTwoType(enum.IntEnum):
    UNKNOWN = 0
    TYPE1 = 1
    TYPE2 = 2
    TYPE3 = 3
    TYPE4 = 4

    def swapped(self) -> "TwoByTwoType":
        """Type seen when the two receivers are listed in the other order."""
        if self is TwoByTwoType.TYPE2:
            return TwoByTwoType.TYPE3
        if self is TwoByTwoType.TYPE3:
            return TwoByTwoType.TYPE2
        return self


def _common_prefix(p: tuple[str, ...], q: tuple[str, ...]) -> int:
    k = 0
    for a, b in zip(p, q):
        if a != b:
            break
        k += 1
    return k


def _common_suffix(p: tuple[str, ...], q: tuple[str, ...]) -> int:
    k = 0
    for a, b in zip(reversed(p), reversed(q)):
        if a != b:
            break
        k += 1
    return k


def validate_routing(topology: Topology, routing: Routing) -> Routing:
    """Check A1-A3; return the routing unchanged."""
    for s in routing.sources:
        for r in routing.receivers:
            path = routing.paths.get((s, r))
            if path is None:
                raise A1Violation(f"no path {s}->{r}")
            if path[0] != s or path[-1] != r:
                raise A1Violation(f"path {s}->{r} has wrong endpoints")
            if len(set(path)) != len(path):
                raise A1Violation(f"path {s}->{r} revisits a node")
            for a, b in zip(path, path[1:]):
                if not topology.has_edge(a, b):
                    raise A1Violation(f"path {s}->{r} uses missing link {a}->{b}")
    extra = set(routing.paths) - {(s, r) for s in routing.sources for r in routing.receivers}
    if extra:
        raise A1Violation(f"routes for undeclared pairs {sorted(extra)}")
    for s in routing.sources:
        for r1, r2 in combinations(routing.receivers, 2):
            p, q = routing.paths[(s, r1)], routing.paths[(s, r2)]
            k = _common_prefix(p, q)
            if set(p[k:]) & set(q[k:]):
                raise A2Violation(f"paths {s}->{r1} and {s}->{r2} re-merge after branching")
    for r in routing.receivers:
        for s1, s2 in combinations(routing.sources, 2):
            p, q = routing.paths[(s1, r)], routing.paths[(s2, r)]
            k = _common_suffix(p, q)
            if set(p[:-k] if k else p) & set(q[:-k] if k else q):
                raise A3Violation(f"paths {s1}->{r} and {s2}->{r} split after joining")
    return routing


def branching_point(routing: Routing, s: str, r1: str, r2: str) -> str:
    """Last node shared by the paths from s to r1 and r2."""
    p, q = routing.paths[(s, r1)], routing.paths[(s, r2)]
    return p[_common_prefix(p, q) - 1]


def joining_point(routing: Routing, r: str, s1: str, s2: str) -> str:
    """First node of the common suffix of the paths from s1 and s2 to r."""
    p, q = routing.paths[(s1, r)], routing.paths[(s2, r)]
    return p[len(p) - _common_suffix(p, q)]


def classify_2x2_oracle(routing: Routing, s1: str, s2: str, r1: str, r2: str) -> TwoByTwoType:
    """Structural 2-by-2 type from the routes alone."""
    if len({s1, s2, r1, r2}) < 4:
        raise DegenerateComponent(f"end nodes not distinct: {s1},{s2},{r1},{r2}")
    j1 = joining_point(routing, r1, s1, s2)
    j2 = joining_point(routing, r2, s1, s2)
    if j1 == j2:
        return TwoByTwoType.TYPE1
    p1 = routing.paths[(s1, r1)]
    p2 = routing.paths[(s1, r2)]
    shared = _common_prefix(p1, p2)
    # a join at or above the S1 branching point sits on both S1 paths
    if j1 in p1[:shared]:
        return TwoByTwoType.TYPE2
    if j2 in p2[:shared]:
        return TwoByTwoType.TYPE3
    return TwoByTwoType.TYPE4


def all_pair_types(routing: Routing, s1: str, s2: str) -> dict[tuple[str, str], TwoByTwoType]:
    """Oracle types for every receiver pair, keyed in receiver-list order."""
    return {
        (a, b): classify_2x2_oracle(routing, s1, s2, a, b)
        for a, b in combinations(routing.receivers, 2)
    }
