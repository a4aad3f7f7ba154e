"""Communication-user selection in an overloaded multi-function network.

Every active E-MT splits its transmit power equally over its roles: the comm
users it serves, the charging users it reaches, and the sensing target if it
is the sensing transmitter. Comm and sensing beams leak into neighbouring
receivers with the off-beam gain; the WPT share leaks nowhere.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

from lawnsim.channel import ChannelParams, db_to_linear, echo_gain_db, gain_at_distance
from lawnsim.errors import ContractError
from lawnsim.scenario import NodeRole
from lawnsim.topology import ActivationPattern, TopologyGraph, all_active, apply_activation


SENSING_SCALES = ("log", "linear")


class SelectionMethod(str, enum.Enum):
    NO_SELECTION = "NoSelection"
    USER_CENTRIC = "UserCentric"
    TOPOLOGY_AWARE = "TopologyAware"
    BRUTE_FORCE = "BruteForce"


@dataclass(frozen=True)
class ObjectiveWeights:
    w_se: float = 1.0
    w_sens: float = 1.0
    w_wpt: float = 1.0
    # How the sensing SINR enters the objective; see sensing_score().
    sensing_scale: str = "log"

    def __post_init__(self):
        ws = (self.w_se, self.w_sens, self.w_wpt)
        if any(w < 0 for w in ws) or not any(w > 0 for w in ws):
            raise ValueError("weights must be nonnegative and not all zero")
        if self.sensing_scale not in SENSING_SCALES:
            raise ValueError(f"unknown sensing scale {self.sensing_scale!r}")


@dataclass(frozen=True)
class Metrics:
    sum_se: float
    sensing_sinr_db: float
    wpt_energy_j: float

    @property
    def sensing_sinr_linear(self) -> float:
        return 0.0 if self.sensing_sinr_db == -math.inf else db_to_linear(self.sensing_sinr_db)

    @property
    def sensing_outage(self) -> bool:
        return self.sensing_sinr_db == -math.inf


@dataclass(frozen=True)
class ServiceAssignment:
    pattern: Mapping[int, bool]
    serving: Mapping[int, int]
    sensing_target: int | None
    sensing_tx: int | None
    sensing_rx: tuple[int, ...]
    wpt_sources: Mapping[int, tuple[int, ...]]
    # E-MT id -> {peer id: fraction of that E-MT's transmit power}
    power_split: Mapping[int, Mapping[int, float]]

    def fraction(self, emt: int, peer: int) -> float:
        return self.power_split.get(emt, {}).get(peer, 0.0)

    def comm_fraction(self, emt: int) -> float:
        return sum(f for p, f in self.power_split.get(emt, {}).items() if p in self._comm_peers)

    def radiating_fraction(self, emt: int) -> float:
        """Share of power in beams that interfere (everything except WPT)."""
        return sum(f for p, f in self.power_split.get(emt, {}).items() if p not in self._wpt_peers)

    @property
    def _comm_peers(self) -> frozenset[int]:
        return frozenset(self.serving)

    @property
    def _wpt_peers(self) -> frozenset[int]:
        return frozenset(self.wpt_sources)


@dataclass(frozen=True)
class SelectionResult:
    method: SelectionMethod
    pattern: dict[int, bool]
    assignment: ServiceAssignment
    sum_se: float
    sensing_sinr_db: float
    wpt_energy_j: float
    scalar_objective: float
    graph: TopologyGraph = field(repr=False, compare=False)
    history: tuple[float, ...] = field(default=(), compare=False)

    @property
    def metrics(self) -> Metrics:
        return Metrics(self.sum_se, self.sensing_sinr_db, self.wpt_energy_j)

    @property
    def sensing_outage(self) -> bool:
        return self.sensing_sinr_db == -math.inf

    @property
    def n_active_users(self) -> int:
        return sum(1 for u in comm_users(self.graph) if self.pattern[u])


def comm_users(graph: TopologyGraph) -> list[int]:
    return graph.scenario.ids_with_role(NodeRole.COMM_USER)


def _gain_lin(graph: TopologyGraph, a: int, b: int, steered: bool) -> float:
    key = ("gain", min(a, b), max(a, b), steered)
    g = graph.cache.get(key)
    if g is None:
        d = graph.node(a).pos.distance_to(graph.node(b).pos)
        g = db_to_linear(gain_at_distance(d, graph.params, steered))
        graph.cache[key] = g
    return g


def _echo_lin(graph: TopologyGraph, tx: int, target: int, rx: int) -> float:
    key = ("echo", tx, target, rx)
    g = graph.cache.get(key)
    if g is None:
        g = db_to_linear(echo_gain_db(graph.node(tx), graph.node(target), graph.node(rx),
                                      graph.params))
        graph.cache[key] = g
    return g


def _activated(graph: TopologyGraph, pattern: ActivationPattern) -> TopologyGraph:
    return apply_activation(graph, pattern)


def _best_emt(graph: TopologyGraph, node_id: int) -> list[int]:
    """Active E-MT neighbours of a node, strongest first, ties to the lowest id."""
    nbrs = graph.neighbors(node_id)
    emts = [j for j in nbrs if graph.node(j).is_emt and graph.is_active(j)]
    return sorted(emts, key=lambda j: (-nbrs[j].weight, j))


def make_assignment(graph: TopologyGraph, pattern: ActivationPattern) -> ServiceAssignment:
    """Deterministic service assignment and equal power split for a pattern."""
    g = _activated(graph, pattern)
    serving: dict[int, int] = {}
    roles: dict[int, list[int]] = {j: [] for j in g.scenario.emt_ids if g.is_active(j)}
    for u in comm_users(g):
        if not g.is_active(u):
            continue
        cands = _best_emt(g, u)
        if cands:
            serving[u] = cands[0]
            roles[cands[0]].append(u)
    wpt: dict[int, tuple[int, ...]] = {}
    for c in g.scenario.ids_with_role(NodeRole.CHARGING_USER):
        if not g.is_active(c):
            continue
        srcs = tuple(sorted(_best_emt(g, c)))
        wpt[c] = srcs
        for j in srcs:
            roles[j].append(c)
    targets = [t for t in g.scenario.ids_with_role(NodeRole.SENSING_TARGET) if g.is_active(t)]
    target = targets[0] if targets else None
    tx, rx = None, ()
    if target is not None:
        cands = _best_emt(g, target)
        if cands:
            tx = cands[0]
            rx = tuple(sorted(cands[1:]))
            roles[tx].append(target)
    split = {j: {p: 1.0 / len(peers) for p in peers} for j, peers in roles.items() if peers}
    return ServiceAssignment(dict(pattern), serving, target, tx, rx, wpt, split)


def _user_sinr(g: TopologyGraph, a: ServiceAssignment, u: int, params: ChannelParams) -> float:
    p = params.tx_power_w
    j = a.serving[u]
    signal = p * a.fraction(j, u) * _gain_lin(g, j, u, steered=True)
    interference = 0.0
    for k in a.power_split:
        if k != j and g.linked(k, u):
            interference += p * a.radiating_fraction(k) * _gain_lin(g, k, u, steered=False)
    return signal / (params.noise_w + interference)


def user_sinrs(graph: TopologyGraph, assignment: ServiceAssignment,
               params: ChannelParams | None = None) -> dict[int, float]:
    params = params or graph.params
    g = _activated(graph, assignment.pattern)
    return {u: _user_sinr(g, assignment, u, params) for u in assignment.serving}


def sum_spectral_efficiency(graph: TopologyGraph, assignment: ServiceAssignment,
                            params: ChannelParams | None = None) -> float:
    """Sum of log2(1 + SINR) over served users, in bit/s/Hz."""
    return sum(math.log2(1.0 + s) for s in user_sinrs(graph, assignment, params).values())


def sensing_sinrs(graph: TopologyGraph, assignment: ServiceAssignment,
                  params: ChannelParams | None = None) -> dict[int, float]:
    """Linear echo SINR at every sensing receiver."""
    params = params or graph.params
    a = assignment
    if a.sensing_tx is None or not a.sensing_rx:
        return {}
    p = params.tx_power_w
    out = {}
    for r in a.sensing_rx:
        echo = p * a.fraction(a.sensing_tx, a.sensing_target) * _echo_lin(
            graph, a.sensing_tx, a.sensing_target, r)
        interference = 0.0
        for k in a.power_split:
            if k != r:
                cf = a.comm_fraction(k)
                if cf > 0:
                    interference += p * cf * _gain_lin(graph, k, r, steered=False)
        out[r] = echo / (params.noise_w + interference)
    return out


def sensing_sinr(graph: TopologyGraph, assignment: ServiceAssignment,
                 params: ChannelParams | None = None) -> float:
    """Best-receiver sensing SINR in dB; ``-inf`` signals a sensing outage."""
    vals = sensing_sinrs(graph, assignment, params)
    if not vals:
        return -math.inf
    best = max(vals.values())
    return 10.0 * math.log10(best) if best > 0 else -math.inf


def wpt_energy(graph: TopologyGraph, assignment: ServiceAssignment,
               params: ChannelParams | None = None) -> float:
    """Energy (J) harvested by all charging users during one slot."""
    params = params or graph.params
    p = params.tx_power_w
    total = 0.0
    for c, srcs in assignment.wpt_sources.items():
        rx_power = sum(p * assignment.fraction(j, c) * _gain_lin(graph, j, c, steered=True)
                       for j in srcs)
        total += params.wpt_efficiency * rx_power * params.slot_duration_s
    return total


def evaluate(graph: TopologyGraph, pattern: ActivationPattern,
             params: ChannelParams | None = None) -> tuple[ServiceAssignment, Metrics]:
    a = make_assignment(graph, pattern)
    return a, Metrics(sum_spectral_efficiency(graph, a, params), sensing_sinr(graph, a, params),
                      wpt_energy(graph, a, params))


def sensing_score(sinr_lin: float, baseline_lin: float, scale: str = "log") -> float:
    """Sensing term of the objective; equals 1 at the baseline.

    ``"linear"`` is the plain ratio. ``"log"`` adds one unit per decade of
    SINR gain, keeping the term commensurate with the other two ratios when
    the baseline is deeply interference-limited.
    """
    if baseline_lin <= 0:
        return 1.0 + sinr_lin
    if scale == "linear":
        return sinr_lin / baseline_lin
    if scale == "log":
        return 1.0 + math.log10(sinr_lin / baseline_lin) if sinr_lin > 0 else -math.inf
    raise ValueError(f"unknown sensing scale {scale!r}")


def scalar_objective(metrics: Metrics, baseline: Metrics,
                     weights: ObjectiveWeights = ObjectiveWeights()) -> float:
    """Weighted sum of metrics normalised by the no-selection baseline.

    Each term equals 1 at the baseline. A metric whose baseline is zero
    cannot be normalised and enters as ``1 + x`` instead.
    """
    def ratio(x: float, x0: float) -> float:
        return x / x0 if x0 > 0 else 1.0 + x

    sens = sensing_score(metrics.sensing_sinr_linear, baseline.sensing_sinr_linear,
                         weights.sensing_scale)
    return (weights.w_se * ratio(metrics.sum_se, baseline.sum_se)
            + weights.w_sens * sens
            + weights.w_wpt * ratio(metrics.wpt_energy_j, baseline.wpt_energy_j))


def _result(method: SelectionMethod, graph: TopologyGraph, pattern: dict[int, bool],
            baseline: Metrics, weights: ObjectiveWeights, params: ChannelParams | None,
            history: tuple[float, ...] = ()) -> SelectionResult:
    a, m = evaluate(graph, pattern, params)
    power = {(j, peer): frac for j, split in a.power_split.items() for peer, frac in split.items()}
    g = apply_activation(graph, pattern).with_edge_power(power)
    return SelectionResult(method, dict(pattern), a, m.sum_se, m.sensing_sinr_db, m.wpt_energy_j,
                           scalar_objective(m, baseline, weights), g, history)


def baseline_metrics(graph: TopologyGraph, params: ChannelParams | None = None) -> Metrics:
    return evaluate(graph, all_active(graph), params)[1]


def select_none(graph: TopologyGraph, weights: ObjectiveWeights = ObjectiveWeights(),
                params: ChannelParams | None = None) -> SelectionResult:
    pattern = all_active(graph)
    return _result(SelectionMethod.NO_SELECTION, graph, pattern,
                   baseline_metrics(graph, params), weights, params)


def best_link_snr_db(graph: TopologyGraph, user: int, params: ChannelParams | None = None) -> float:
    """Interference-blind SNR of a user's strongest link at full E-MT power."""
    params = params or graph.params
    cands = _best_emt(graph, user)
    if not cands:
        return -math.inf
    gain_db = graph.neighbors(user)[cands[0]].weight
    return params.tx_power_dbm + gain_db - params.noise_dbm


def select_user_centric(graph: TopologyGraph, params: ChannelParams | None = None,
                        qos_floor_db: float = 0.0,
                        weights: ObjectiveWeights = ObjectiveWeights()) -> SelectionResult:
    """Keep each comm user iff its own best-link SNR clears the QoS floor."""
    pattern = all_active(graph)
    for u in comm_users(graph):
        pattern[u] = best_link_snr_db(graph, u, params) >= qos_floor_db
    return _result(SelectionMethod.USER_CENTRIC, graph, pattern,
                   baseline_metrics(graph, params), weights, params)


def select_topology_aware(graph: TopologyGraph, weights: ObjectiveWeights = ObjectiveWeights(),
                          params: ChannelParams | None = None) -> SelectionResult:
    """Greedy deactivation: drop the comm user whose removal helps most, until none does."""
    baseline = baseline_metrics(graph, params)
    pattern = all_active(graph)
    current = scalar_objective(baseline, baseline, weights)
    history = [current]
    while True:
        best_user, best_val = None, current
        for u in comm_users(graph):
            if not pattern[u]:
                continue
            trial = dict(pattern)
            trial[u] = False
            val = scalar_objective(evaluate(graph, trial, params)[1], baseline, weights)
            if val > best_val:
                best_user, best_val = u, val
        if best_user is None:
            break
        pattern[best_user] = False
        current = best_val
        history.append(current)
    return _result(SelectionMethod.TOPOLOGY_AWARE, graph, pattern, baseline, weights, params,
                   tuple(history))


def select_brute_force(graph: TopologyGraph, weights: ObjectiveWeights = ObjectiveWeights(),
                       params: ChannelParams | None = None, max_users: int = 12) -> SelectionResult:
    """Exhaustive search over all comm-user activation patterns."""
    users = comm_users(graph)
    if len(users) > max_users:
        raise ContractError(f"{len(users)} comm users exceed the brute-force limit {max_users}")
    baseline = baseline_metrics(graph, params)
    base_pattern = all_active(graph)
    best_pattern, best_val = None, -math.inf
    # product() enumerates in lexicographic order (False < True), so keeping
    # only strict improvements resolves ties toward the smallest pattern.
    for states in itertools.product((False, True), repeat=len(users)):
        trial = dict(base_pattern)
        trial.update(zip(users, states))
        val = scalar_objective(evaluate(graph, trial, params)[1], baseline, weights)
        if val > best_val:
            best_pattern, best_val = trial, val
    return _result(SelectionMethod.BRUTE_FORCE, graph, best_pattern, baseline, weights, params)
