"""Sparse thresholded graph over the network nodes.

Edges are undirected and carry a kind, a weight (link gain in dB for edges
built from the channel) and the Euclidean distance used for routing.
Activation never deletes nodes or built edges: it only hides edges with an
inactive endpoint, so any pattern can be undone.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, NamedTuple

from lawnsim.channel import ChannelParams, gain_at_distance
from lawnsim.errors import ContractError
from lawnsim.scenario import Node, Scenario

ActivationPattern = Mapping[int, bool]


class EdgeKind(str, enum.Enum):
    CONNECTIVITY = "Connectivity"
    INTERFERENCE = "Interference"


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    kind: EdgeKind
    weight: float
    distance_m: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"self-loop on node {self.a}")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        if not (math.isfinite(self.weight) and math.isfinite(self.distance_m)):
            raise ValueError("edge weight and distance must be finite")

    @property
    def key(self) -> tuple[int, int, EdgeKind]:
        return (self.a, self.b, self.kind)

    def other(self, node_id: int) -> int:
        return self.b if node_id == self.a else self.a


class DegreeStats(NamedTuple):
    mean_degree: float
    min_degree: int
    max_degree: int
    n_components: int


class TopologyGraph:
    """Immutable graph; :meth:`apply_activation` returns a new view."""

    def __init__(self, scenario: Scenario, built_edges: Iterable[Edge], threshold_db: float,
                 params: ChannelParams | None = None, active: Iterable[bool] | None = None,
                 edge_power: Mapping[tuple[int, int], float] | None = None,
                 _cache: dict | None = None):
        self.scenario = scenario
        self.params = params or ChannelParams()
        self.threshold_db = threshold_db
        self.built_edges: tuple[Edge, ...] = tuple(built_edges)
        n = len(scenario.nodes)
        seen = set()
        for e in self.built_edges:
            if not (0 <= e.a < n and 0 <= e.b < n):
                raise ValueError(f"edge {e.key} references unknown node")
            if e.key in seen:
                raise ValueError(f"duplicate edge {e.key}")
            seen.add(e.key)
        self.active: tuple[bool, ...] = (tuple(bool(v) for v in active) if active is not None
                                         else tuple(n.features.active for n in scenario.nodes))
        if len(self.active) != n:
            raise ValueError("activation vector length mismatch")
        # Power allocated on an (a, b) edge by a scheduler; never changes topology.
        self.edge_power: dict[tuple[int, int], float] = dict(edge_power or {})
        self.edges: tuple[Edge, ...] = tuple(
            e for e in self.built_edges if self.active[e.a] and self.active[e.b])
        self._adj: list[dict[int, Edge]] = [{} for _ in range(n)]
        for e in self.edges:
            if e.kind is EdgeKind.CONNECTIVITY:
                self._adj[e.a][e.b] = e
                self._adj[e.b][e.a] = e
        # Activation-independent memo (e.g. link gains) shared by derived views.
        self.cache: dict = _cache if _cache is not None else {}
        self._any_adj: list[set[int]] = [set() for _ in range(n)]
        for e in self.edges:
            self._any_adj[e.a].add(e.b)
            self._any_adj[e.b].add(e.a)

    @property
    def n_nodes(self) -> int:
        return len(self.scenario.nodes)

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(
            n if n.features.active == act else replace(n, features=replace(n.features, active=act))
            for n, act in zip(self.scenario.nodes, self.active))

    def node(self, node_id: int) -> Node:
        return self.scenario.nodes[node_id]

    def is_active(self, node_id: int) -> bool:
        return self.active[node_id]

    def neighbors(self, node_id: int) -> dict[int, Edge]:
        """Live connectivity neighbors of ``node_id`` keyed by neighbor id."""
        return self._adj[node_id]

    def linked(self, a: int, b: int) -> bool:
        """True if any live edge (connectivity or interference) joins a and b."""
        return b in self._any_adj[a]

    def edge(self, a: int, b: int) -> Edge | None:
        return self._adj[a].get(b)

    def degree(self, node_id: int) -> int:
        return len(self._any_adj[node_id])

    def pattern(self) -> dict[int, bool]:
        return dict(enumerate(self.active))

    def apply_activation(self, pattern: ActivationPattern) -> TopologyGraph:
        return apply_activation(self, pattern)

    def with_edge_power(self, edge_power: Mapping[tuple[int, int], float]) -> TopologyGraph:
        return TopologyGraph(self.scenario, self.built_edges, self.threshold_db, self.params,
                             self.active, edge_power, self.cache)

    def __repr__(self) -> str:
        return (f"TopologyGraph(n_nodes={self.n_nodes}, n_edges={len(self.edges)}, "
                f"threshold_db={self.threshold_db})")


def _eligible_pairs(scenario: Scenario) -> Iterable[tuple[Node, Node]]:
    nodes = scenario.nodes
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            if a.is_emt or b.is_emt:
                yield a, b


def pair_gains(scenario: Scenario, params: ChannelParams) -> list[tuple[int, int, float, float]]:
    """Steered gain and distance for every E-MT/E-MT and E-MT/other pair."""
    out = []
    for a, b in _eligible_pairs(scenario):
        d = a.pos.distance_to(b.pos)
        out.append((a.id, b.id, gain_at_distance(d, params, steered=True), d))
    return out


def build_graph(scenario: Scenario, params: ChannelParams, threshold_db: float) -> TopologyGraph:
    """Connect every E-MT-involving pair whose steered gain reaches ``threshold_db``."""
    if not scenario.nodes:
        raise ContractError("cannot build a graph over an empty scenario")
    edges = [Edge(a, b, EdgeKind.CONNECTIVITY, g, d)
             for a, b, g, d in pair_gains(scenario, params) if g >= threshold_db]
    return TopologyGraph(scenario, edges, threshold_db, params,
                         active=[True] * len(scenario.nodes))


def apply_activation(graph: TopologyGraph, pattern: ActivationPattern) -> TopologyGraph:
    if set(pattern) != set(range(graph.n_nodes)):
        raise ContractError("activation pattern must cover exactly the graph's node ids")
    active = [bool(pattern[i]) for i in range(graph.n_nodes)]
    if tuple(active) == graph.active:
        return graph
    return TopologyGraph(graph.scenario, graph.built_edges, graph.threshold_db, graph.params,
                         active, graph.edge_power, graph.cache)


def all_active(graph: TopologyGraph) -> dict[int, bool]:
    return {i: True for i in range(graph.n_nodes)}


def _overlaps(graph: TopologyGraph, hub_is_emt: bool) -> list[tuple[int, list[int]]]:
    out = []
    for node in graph.scenario.nodes:
        if node.is_emt != hub_is_emt or not graph.is_active(node.id):
            continue
        peers = sorted(j for j in graph.neighbors(node.id)
                       if graph.node(j).is_emt != hub_is_emt)
        if len(peers) >= 2:
            out.append((node.id, peers))
    return out


def find_overlaps(graph: TopologyGraph) -> list[tuple[int, list[int]]]:
    """Active E-MTs linked to two or more active users, users sorted by id."""
    return _overlaps(graph, hub_is_emt=True)


def find_user_side_overlaps(graph: TopologyGraph) -> list[tuple[int, list[int]]]:
    """Active users linked to two or more active E-MTs."""
    return _overlaps(graph, hub_is_emt=False)


def connected_components(graph: TopologyGraph) -> list[list[int]]:
    seen = set()
    comps = []
    for start in range(graph.n_nodes):
        if start in seen or not graph.is_active(start):
            continue
        comp = []
        queue = deque([start])
        seen.add(start)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in sorted(graph._any_adj[u]):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def degree_stats(graph: TopologyGraph) -> DegreeStats:
    live = [i for i in range(graph.n_nodes) if graph.is_active(i)]
    if not live:
        return DegreeStats(0.0, 0, 0, 0)
    degs = [graph.degree(i) for i in live]
    return DegreeStats(sum(degs) / len(degs), min(degs), max(degs),
                       len(connected_components(graph)))


def calibrate_threshold(scenario: Scenario, params: ChannelParams,
                        target_mean_degree: float = 5.0) -> float:
    """Threshold (dB) giving a mean degree as close as possible to the target.

    The k strongest eligible pairs are kept, where k = round(target * N / 2);
    the threshold is placed midway between the k-th and (k+1)-th gains.
    """
    gains = sorted((g for _, _, g, _ in pair_gains(scenario, params)), reverse=True)
    n = len(scenario.nodes)
    k = int(round(target_mean_degree * n / 2))
    if not gains or k <= 0:
        return math.inf
    if k >= len(gains):
        return -math.inf
    return 0.5 * (gains[k - 1] + gains[k])


def edge_list_csv(graph: TopologyGraph) -> str:
    """Live edges as CSV with header ``a,b,kind,weight_db,distance_m``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a", "b", "kind", "weight_db", "distance_m"])
    for e in sorted(graph.edges, key=lambda e: e.key):
        w.writerow([e.a, e.b, e.kind.value, repr(e.weight), repr(e.distance_m)])
    return buf.getvalue()


def summary_json(graph: TopologyGraph) -> str:
    stats = degree_stats(graph)
    return json.dumps({
        "n_nodes": graph.n_nodes,
        "n_active": sum(graph.active),
        "n_edges": len(graph.edges),
        "threshold_db": graph.threshold_db,
        **stats._asdict(),
    }, indent=1, sort_keys=True)
