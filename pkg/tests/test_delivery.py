import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import emt, hand_graph, node, simple_path_minimum
from lawnsim.channel import SPEED_OF_LIGHT, ChannelParams
from lawnsim.delivery import (DelayParams, DeliveryTask, Method, Route, aggregate, draw_task,
                              dijkstra_route, greedy_local_route, greedy_reachable_route,
                              route_delay, run_delivery_experiment, run_trials)
from lawnsim.errors import ContractError
from lawnsim.scenario import NodeRole, ScenarioConfig, generate_scenario

ROUTERS = (dijkstra_route, greedy_local_route, greedy_reachable_route)


def triangle():
    return hand_graph([emt(0, 0), emt(1, 0), emt(2, 0)], [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)])


def trap():
    # S=0, trap T=1 nearest to S but a dead end, relay X=2, destination D=3.
    return hand_graph([emt(0, 0), emt(1, 0), emt(0, 2), emt(0, 4)], [(0, 1), (0, 2), (2, 3)])


def test_triangle_prefers_two_short_hops():
    out = dijkstra_route(triangle(), DeliveryTask(0, 2))
    assert out.route.hops == (0, 1, 2)
    assert out.route.total_distance_m == 2.0


def test_direct_edge_gives_single_hop():
    g = hand_graph([emt(0, 0), emt(3, 0), emt(1, 5)], [(0, 1), (0, 2), (2, 1)])
    for router in ROUTERS:
        out = router(g, DeliveryTask(0, 1))
        assert out.route.hops == (0, 1)


def test_disconnected_destination_fails_everywhere():
    g = hand_graph([emt(0, 0), emt(1, 0), emt(9, 9)], [(0, 1)])
    for router in ROUTERS:
        out = router(g, DeliveryTask(0, 2))
        assert not out.success and out.route is None and out.delay_s is None


def test_dead_end_trap():
    g = trap()
    task = DeliveryTask(0, 3)
    assert not greedy_local_route(g, task).success
    best = dijkstra_route(g, task)
    assert best.route.hops == (0, 2, 3)
    adj = {u: {v: e.distance_m for v, e in g.neighbors(u).items()} for u in range(4)}
    assert best.route.total_distance_m == simple_path_minimum(adj, 0, 3)
    reach = greedy_reachable_route(g, task)
    assert reach.success
    assert reach.route.total_distance_m >= best.route.total_distance_m


def test_path_graph_greedy_succeeds():
    g = hand_graph([emt(0, 0), emt(1, 0)], [(0, 1)])
    assert greedy_local_route(g, DeliveryTask(0, 1)).route.hops == (0, 1)


def test_users_never_relay():
    g = hand_graph([emt(0, 0), node(NodeRole.COMM_USER, 1, 0), emt(2, 0)], [(0, 1), (1, 2)])
    for router in ROUTERS:
        assert not router(g, DeliveryTask(0, 2)).success
    with pytest.raises(ContractError):
        dijkstra_route(g, DeliveryTask(0, 1))


def test_equal_distance_ties_prefer_fewer_hops_then_lower_ids():
    # 0-3 direct (2.0) versus 0-1-3 (1.0 + 1.0); 0-1-3 versus 0-2-3 on equal hops.
    g = hand_graph([emt(0, 0), emt(1, 1), emt(1, -1), emt(2, 0)],
                   [(0, 3, 2.0), (0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)])
    assert dijkstra_route(g, DeliveryTask(0, 3)).route.hops == (0, 3)
    g2 = hand_graph([emt(0, 0), emt(1, 1), emt(1, -1), emt(2, 0)],
                    [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)])
    assert dijkstra_route(g2, DeliveryTask(0, 3)).route.hops == (0, 1, 3)


def test_inactive_endpoint_is_a_contract_error():
    g = triangle().apply_activation({0: True, 1: True, 2: False})
    with pytest.raises(ContractError):
        dijkstra_route(g, DeliveryTask(0, 2))
    with pytest.raises(ContractError):
        DeliveryTask(1, 1)


def test_delay_formula():
    one = Route((0, 1), 250.0)
    assert route_delay(one) == pytest.approx(250.0 / SPEED_OF_LIGHT + 1e-3, rel=1e-15)
    three = Route((0, 1, 2, 3), 1500.0)
    assert route_delay(three) == pytest.approx(3 * 500 / SPEED_OF_LIGHT + 3e-3, rel=1e-15)
    assert route_delay(three) == pytest.approx(3.005e-3, abs=1e-6)
    assert route_delay(Route((0, 1, 2), 250.0)) > route_delay(one)
    assert route_delay(one, DelayParams(0.0)) == pytest.approx(250.0 / SPEED_OF_LIGHT)


def random_graph(rng, n, p):
    pts = rng.uniform(0, 100, size=(n, 2))
    nodes = [emt(float(x), float(y)) for x, y in pts]
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
    return hand_graph(nodes, edges)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9), st.floats(0.1, 0.9))
def test_router_properties(seed, n, p):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p)
    adj = {u: {v: e.distance_m for v, e in g.neighbors(u).items()} for u in range(n)}
    task = DeliveryTask(0, n - 1)
    best = dijkstra_route(g, task)
    local = greedy_local_route(g, task)
    reach = greedy_reachable_route(g, task)
    oracle = simple_path_minimum(adj, 0, n - 1)
    assert best.success == (oracle < math.inf) == reach.success
    assert local.success <= reach.success
    if best.success:
        assert best.route.total_distance_m == oracle
        for other in (local, reach):
            if other.success:
                route = other.route
                assert len(set(route.hops)) == len(route.hops)
                assert all(v in g.neighbors(u) for u, v in zip(route.hops, route.hops[1:]))
                assert best.delay_s <= other.delay_s


def test_aggregate_uses_mutual_successes():
    g = trap()
    tasks = [DeliveryTask(0, 3), DeliveryTask(3, 0), DeliveryTask(1, 0)]
    stats = aggregate(run_trials(g, tasks))
    assert stats[Method.GREEDY_LOCAL].success_rate == pytest.approx(2 / 3)
    assert stats[Method.TA_DIJKSTRA].success_rate == 1.0
    # only 3->0 (two hops) and 1->0 (one hop) count toward delay and hops
    assert stats[Method.TA_DIJKSTRA].mean_hops == pytest.approx(1.5)


def test_task_draws_are_reproducible_and_distinct():
    ids = list(range(10, 20))
    a = [draw_task(ids, 3, t) for t in range(50)]
    assert a == [draw_task(ids, 3, t) for t in range(50)]
    assert all(t.src != t.dst and t.src in ids and t.dst in ids for t in a)


def test_small_experiment_orderings():
    scen = generate_scenario(ScenarioConfig(area_x=600, area_y=600, n_emt_uav=15,
                                            n_emt_terrestrial=15, n_charging_users=0,
                                            n_sensing_targets=0, seed=1))
    report = run_delivery_experiment(scen, ChannelParams(), -80.0, 300, seed=1)
    s = report.stats
    assert s[Method.GREEDY_LOCAL].success_rate <= s[Method.GREEDY_REACHABLE].success_rate
    assert s[Method.GREEDY_REACHABLE].success_rate == s[Method.TA_DIJKSTRA].success_rate
    assert (s[Method.TA_DIJKSTRA].mean_delay_ms
            <= s[Method.GREEDY_REACHABLE].mean_delay_ms)
    first = json.loads(report.trial_jsonl().splitlines()[0])
    assert {"trial", "src", "dst", "TaDijkstra"} <= set(first)
    with pytest.raises(ContractError):
        run_delivery_experiment(scen, ChannelParams(), -80.0, 0, seed=1)


def test_single_connected_trial_dijkstra_not_slower():
    g = trap()
    out = run_trials(g, [DeliveryTask(2, 0)])[0]
    assert all(o.success for o in out.values())
    assert out[Method.TA_DIJKSTRA].delay_s <= min(o.delay_s for o in out.values())
