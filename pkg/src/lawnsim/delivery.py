"""In-network task delivery between E-MTs over the thresholded graph.

Three routers share one graph: a distance-weighted Dijkstra search, a
memoryless nearest-neighbor walk, and a nearest-first depth-first search
with backtracking. Only E-MTs relay; users never appear on a route.
"""
from __future__ import annotations

import enum
import heapq
import json
import statistics
from dataclasses import dataclass, field
from typing import Callable

from lawnsim.channel import SPEED_OF_LIGHT, ChannelParams
from lawnsim.errors import ContractError
from lawnsim.rng import make_rng
from lawnsim.scenario import Scenario
from lawnsim.topology import Edge, TopologyGraph, build_graph


class Method(str, enum.Enum):
    TA_DIJKSTRA = "TaDijkstra"
    GREEDY_LOCAL = "GreedyLocal"
    GREEDY_REACHABLE = "GreedyReachable"


@dataclass(frozen=True)
class DeliveryTask:
    src: int
    dst: int

    def __post_init__(self):
        if self.src == self.dst:
            raise ContractError("source and destination must differ")


@dataclass(frozen=True)
class DelayParams:
    t_proc_s: float = 1e-3  # per-hop forwarding/processing time


@dataclass(frozen=True)
class Route:
    hops: tuple[int, ...]
    total_distance_m: float

    @property
    def n_hops(self) -> int:
        return len(self.hops) - 1


@dataclass(frozen=True)
class DeliveryOutcome:
    method: Method
    success: bool
    route: Route | None = None
    delay_s: float | None = None

    def __post_init__(self):
        if self.success != (self.route is not None):
            raise ValueError("success must coincide with a route being present")


def route_delay(route: Route, params: DelayParams = DelayParams()) -> float:
    """Propagation time over the route plus a fixed processing time per hop."""
    return route.total_distance_m / SPEED_OF_LIGHT + route.n_hops * params.t_proc_s


def _relay_neighbors(graph: TopologyGraph, u: int) -> dict[int, Edge]:
    return {v: e for v, e in graph.neighbors(u).items() if graph.node(v).is_emt}


def _check_task(graph: TopologyGraph, task: DeliveryTask) -> None:
    for end in (task.src, task.dst):
        if not 0 <= end < graph.n_nodes:
            raise ContractError(f"unknown node {end}")
        if not graph.node(end).is_emt:
            raise ContractError(f"node {end} is not an E-MT")
        if not graph.is_active(end):
            raise ContractError(f"node {end} is inactive")


def _make_route(graph: TopologyGraph, hops: list[int]) -> Route:
    total = 0.0
    for u, v in zip(hops, hops[1:]):
        total += graph.neighbors(u)[v].distance_m
    return Route(tuple(hops), total)


def _outcome(method: Method, route: Route | None, delay_params: DelayParams) -> DeliveryOutcome:
    if route is None:
        return DeliveryOutcome(method, False)
    return DeliveryOutcome(method, True, route, route_delay(route, delay_params))


def dijkstra_route(graph: TopologyGraph, task: DeliveryTask,
                   delay_params: DelayParams = DelayParams()) -> DeliveryOutcome:
    """Minimum-distance route; ties go to fewer hops, then the smaller hop sequence."""
    _check_task(graph, task)
    # Labels are (distance, hops, path); every extension strictly increases
    # distance, so the composite key keeps Dijkstra's label-setting property.
    best: dict[int, tuple[float, int, tuple[int, ...]]] = {task.src: (0.0, 0, (task.src,))}
    heap = [best[task.src]]
    done = set()
    while heap:
        label = heapq.heappop(heap)
        dist, nh, path = label
        u = path[-1]
        if u in done or best[u] != label:
            continue
        done.add(u)
        if u == task.dst:
            return _outcome(Method.TA_DIJKSTRA, Route(path, dist), delay_params)
        for v, e in _relay_neighbors(graph, u).items():
            if v in done:
                continue
            cand = (dist + e.distance_m, nh + 1, path + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, cand)
    return _outcome(Method.TA_DIJKSTRA, None, delay_params)


def _nearest_first(graph: TopologyGraph, u: int, exclude: set[int]) -> list[int]:
    nbrs = _relay_neighbors(graph, u)
    return sorted((v for v in nbrs if v not in exclude), key=lambda v: (nbrs[v].distance_m, v))


def greedy_local_route(graph: TopologyGraph, task: DeliveryTask,
                       delay_params: DelayParams = DelayParams()) -> DeliveryOutcome:
    """Always hop to the nearest unvisited neighbor; fail at a dead end."""
    _check_task(graph, task)
    path = [task.src]
    visited = {task.src}
    while path[-1] != task.dst:
        options = _nearest_first(graph, path[-1], visited)
        if not options:
            return _outcome(Method.GREEDY_LOCAL, None, delay_params)
        path.append(options[0])
        visited.add(options[0])
    return _outcome(Method.GREEDY_LOCAL, _make_route(graph, path), delay_params)


def greedy_reachable_route(graph: TopologyGraph, task: DeliveryTask,
                           delay_params: DelayParams = DelayParams()) -> DeliveryOutcome:
    """Nearest-first depth-first search that backtracks out of dead ends."""
    _check_task(graph, task)
    path = [task.src]
    visited = {task.src}
    pending = [_nearest_first(graph, task.src, visited)]
    while path:
        if path[-1] == task.dst:
            return _outcome(Method.GREEDY_REACHABLE, _make_route(graph, path), delay_params)
        options = pending[-1]
        while options and options[0] in visited:
            options.pop(0)
        if not options:
            path.pop()
            pending.pop()
            continue
        v = options.pop(0)
        visited.add(v)
        path.append(v)
        pending.append(_nearest_first(graph, v, visited))
    return _outcome(Method.GREEDY_REACHABLE, None, delay_params)


ROUTERS: dict[Method, Callable[..., DeliveryOutcome]] = {
    Method.TA_DIJKSTRA: dijkstra_route,
    Method.GREEDY_LOCAL: greedy_local_route,
    Method.GREEDY_REACHABLE: greedy_reachable_route,
}


@dataclass
class MethodStats:
    method: Method
    n_trials: int
    success_rate: float
    mean_delay_ms: float
    median_delay_ms: float
    mean_hops: float

    def as_row(self) -> dict:
        return {"method": self.method.value, "n_trials": self.n_trials,
                "success_rate": self.success_rate, "mean_delay_ms": self.mean_delay_ms,
                "median_delay_ms": self.median_delay_ms, "mean_hops": self.mean_hops}


@dataclass
class DeliveryReport:
    threshold_db: float
    stats: dict[Method, MethodStats]
    trials: list[dict[Method, DeliveryOutcome]] = field(repr=False)
    tasks: list[DeliveryTask] = field(repr=False)

    @property
    def connected_fraction(self) -> float:
        return self.stats[Method.TA_DIJKSTRA].success_rate

    def rows(self) -> list[dict]:
        return [self.stats[m].as_row() for m in Method]

    def trial_jsonl(self) -> str:
        lines = []
        for i, (task, outs) in enumerate(zip(self.tasks, self.trials)):
            rec = {"trial": i, "src": task.src, "dst": task.dst}
            for m, o in outs.items():
                rec[m.value] = {"success": o.success,
                                "hops": list(o.route.hops) if o.route else None,
                                "distance_m": o.route.total_distance_m if o.route else None,
                                "delay_s": o.delay_s}
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"


def draw_task(emt_ids: list[int], seed: int, trial: int) -> DeliveryTask:
    rng = make_rng(seed, trial)
    i, j = rng.choice(len(emt_ids), size=2, replace=False)
    return DeliveryTask(emt_ids[int(i)], emt_ids[int(j)])


def run_trials(graph: TopologyGraph, tasks: list[DeliveryTask],
               delay_params: DelayParams = DelayParams()) -> list[dict[Method, DeliveryOutcome]]:
    return [{m: router(graph, t, delay_params) for m, router in ROUTERS.items()} for t in tasks]


def aggregate(trials: list[dict[Method, DeliveryOutcome]]) -> dict[Method, MethodStats]:
    """Success rates over all trials; delay and hops over mutually successful ones."""
    n = len(trials)
    mutual = [t for t in trials if all(o.success for o in t.values())]
    stats = {}
    for m in Method:
        succ = sum(t[m].success for t in trials)
        delays = [t[m].delay_s * 1e3 for t in mutual]
        hops = [t[m].route.n_hops for t in mutual]
        nan = float("nan")
        stats[m] = MethodStats(
            m, n, succ / n if n else nan,
            statistics.fmean(delays) if delays else nan,
            statistics.median(delays) if delays else nan,
            statistics.fmean(hops) if hops else nan)
    return stats


def run_delivery_experiment(scenario: Scenario, params: ChannelParams, threshold_db: float,
                            n_trials: int, seed: int,
                            delay_params: DelayParams = DelayParams()) -> DeliveryReport:
    """Route ``n_trials`` random E-MT pairs with all three methods on one graph."""
    if n_trials < 1:
        raise ContractError("n_trials must be at least 1")
    emts = scenario.emt_ids
    if len(emts) < 2:
        raise ContractError("delivery needs at least two E-MTs")
    graph = build_graph(scenario, params, threshold_db)
    tasks = [draw_task(emts, seed, t) for t in range(n_trials)]
    trials = run_trials(graph, tasks, delay_params)
    return DeliveryReport(threshold_db, aggregate(trials), trials, tasks)
