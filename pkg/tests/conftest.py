import math

import pytest

from lawnsim.scenario import Node, NodeRole, Position3, scenario_from_nodes
from lawnsim.topology import Edge, EdgeKind, TopologyGraph

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def report(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(
            f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
    return report


def node(role: NodeRole, x: float, y: float, z: float = 0.0, **kw) -> Node:
    return Node(0, role, Position3(x, y, z), aerial=z > 0, **kw)


def emt(x: float, y: float, z: float = 0.0) -> Node:
    return node(NodeRole.EMT_UAV if z > 0 else NodeRole.EMT_TERRESTRIAL, x, y, z)


def hand_graph(nodes, edges, threshold_db: float = -math.inf, params=None) -> TopologyGraph:
    """Graph over ``nodes`` with explicit (a, b) or (a, b, distance) connectivity edges.

    Without an explicit distance the Euclidean one is used; the weight is a
    placeholder since hand-built routing tests only look at distances.
    """
    scen = scenario_from_nodes(nodes)
    built = []
    for e in edges:
        a, b = e[0], e[1]
        d = e[2] if len(e) > 2 else scen.nodes[a].pos.distance_to(scen.nodes[b].pos)
        built.append(Edge(a, b, EdgeKind.CONNECTIVITY, 0.0, d))
    return TopologyGraph(scen, built, threshold_db, params)


def simple_path_minimum(adj: dict[int, dict[int, float]], src: int, dst: int) -> float:
    """Exhaustive minimum over all simple paths, summing edge lengths left to right."""
    best = math.inf
    stack = [(src, 0.0, {src})]
    while stack:
        u, dist, seen = stack.pop()
        if u == dst:
            best = min(best, dist)
            continue
        for v, w in adj[u].items():
            if v not in seen:
                stack.append((v, dist + w, seen | {v}))
    return best
