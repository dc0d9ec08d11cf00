"""JSON topology file: nodes, edges, routes and an optional joins section."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..errors import TopologyError
from .model import Edge, Node, Routing, Topology

_TOP_KEYS = {"nodes", "edges", "routes", "joins"}
_NODE_KEYS = {"id", "role"}
_EDGE_KEYS = {"a", "b", "directed", "fixed_delay_ms", "queue_delay_max_ms", "loss_prob"}
_ROUTE_KEYS = {"src", "dst", "path"}
_JOIN_KEYS = {"receiver", "host_link"}


def _check_keys(obj: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise TopologyError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise TopologyError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise TopologyError(f"{where}: missing field(s) {sorted(missing)}")


def to_document(topology: Topology, routing: Routing | None = None,
                joins: dict[str, tuple[str, str]] | None = None) -> dict:
    doc: dict[str, Any] = {
        "nodes": [{"id": n.id, "role": n.role} for n in topology.nodes],
        "edges": [
            {"a": e.a, "b": e.b, "directed": e.directed, "fixed_delay_ms": e.fixed_delay,
             "queue_delay_max_ms": e.queue_delay_max, "loss_prob": e.loss_prob}
            for e in topology.edges
        ],
        "routes": [],
    }
    if routing is not None:
        doc["routes"] = [{"src": s, "dst": r, "path": list(routing.paths[(s, r)])}
                         for s in routing.sources for r in routing.receivers]
    if joins is not None:
        doc["joins"] = [{"receiver": r, "host_link": list(link)} for r, link in sorted(joins.items())]
    return doc


def from_document(doc: dict) -> tuple[Topology, Routing | None, dict[str, tuple[str, str]] | None]:
    _check_keys(doc, _TOP_KEYS, {"nodes", "edges"}, "document")
    nodes = []
    for i, n in enumerate(doc["nodes"]):
        _check_keys(n, _NODE_KEYS, {"id"}, f"nodes[{i}]")
        nodes.append(Node(str(n["id"]), n.get("role", "internal")))
    edges = []
    for i, e in enumerate(doc["edges"]):
        _check_keys(e, _EDGE_KEYS, {"a", "b"}, f"edges[{i}]")
        edges.append(Edge(str(e["a"]), str(e["b"]), bool(e.get("directed", False)),
                          float(e.get("fixed_delay_ms", 0.0)), float(e.get("queue_delay_max_ms", 0.0)),
                          float(e.get("loss_prob", 0.0))))
    topo = Topology(tuple(nodes), tuple(edges))
    routing = None
    routes = doc.get("routes") or []
    if routes:
        paths = {}
        sources: list[str] = []
        receivers: list[str] = []
        for i, r in enumerate(routes):
            _check_keys(r, _ROUTE_KEYS, _ROUTE_KEYS, f"routes[{i}]")
            s, d = str(r["src"]), str(r["dst"])
            if (s, d) in paths:
                raise TopologyError(f"routes[{i}]: duplicate route {s}->{d}")
            paths[(s, d)] = tuple(str(x) for x in r["path"])
            if s not in sources:
                sources.append(s)
            if d not in receivers:
                receivers.append(d)
        routing = Routing(paths, tuple(sources), tuple(receivers))
    joins = None
    if "joins" in doc:
        joins = {}
        for i, j in enumerate(doc["joins"]):
            _check_keys(j, _JOIN_KEYS, _JOIN_KEYS, f"joins[{i}]")
            a, b = j["host_link"]
            joins[str(j["receiver"])] = (str(a), str(b))
    return topo, routing, joins


def dumps(topology: Topology, routing: Routing | None = None, joins=None) -> str:
    return json.dumps(to_document(topology, routing, joins), indent=2)


def loads(text: str):
    return from_document(json.loads(text))


def write_topology(path: str | Path, topology: Topology, routing: Routing | None = None,
                   joins=None) -> None:
    Path(path).write_text(dumps(topology, routing, joins) + "\n")


def read_topology(path: str | Path):
    """Returns (topology, routing or None, joins or None)."""
    return loads(Path(path).read_text())
