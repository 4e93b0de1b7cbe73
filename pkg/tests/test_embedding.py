import math
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from sagin_bdo.embedding import (
    CostBreakdown,
    CostParams,
    Embedding,
    Limits,
    NetworkState,
    audit_state,
    check_feasible,
    commit,
    configuration_cost,
    enumerate_candidates,
    marginal_cost,
    order_preserving_placements,
    release,
)
from sagin_bdo.errors import EmbeddingError
from sagin_bdo.missions import GeneratorConfig, generate_missions
from sagin_bdo.network import build_case_study_network

from instances import make_network, random_install_costs, random_mission, random_network, simple_mission
from oracles import brute_placements, oracle_candidates, rel_close

INSTALL = {v: 30.0 for v in "ABCDE"}


def embed(net, m, nodes, placement, state=None, params=CostParams()):
    e = Embedding(m.id, net.route_from_nodes(nodes), tuple(placement))
    if state is not None:
        e = Embedding(m.id, e.route, e.placement, marginal_cost(e, m, state, params))
    return e


def test_stars_and_bars_one_hop():
    assert list(order_preserving_placements(2, 3)) == [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)]
    net = make_network("gg", [(0, 1)], 1000, 100)
    m = simple_mission(0, 0, 1, "ABC", net=net)
    cands = enumerate_candidates(m, net, NetworkState.fresh(net, INSTALL), Limits(max_hops=1))
    assert sorted(c.placement for c in cands) == [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)]


@pytest.mark.parametrize("hops", range(1, 6))
@pytest.mark.parametrize("chain", range(1, 6))
def test_placement_count(hops, chain):
    got = list(order_preserving_placements(hops + 1, chain))
    assert len(got) == math.comb(chain + hops, hops)
    assert sorted(got) == brute_placements(hops + 1, chain)


def test_oversized_bandwidth_blocked():
    net = build_case_study_network(0)
    m = generate_missions(0, net, GeneratorConfig(mission_count=1))[0]
    m = replace(m, bandwidth_demand=120.0)
    assert enumerate_candidates(m, net, NetworkState.fresh(net, INSTALL)) == []


def test_feasibility_examples():
    net = make_network("gg", [(0, 1)], [75, 500], 100)
    state = NetworkState.fresh(net, INSTALL)
    first = simple_mission(1, 0, 1, "A", compute=[20], net=net)
    commit(embed(net, first, (0, 1), (0,)), first, state)
    assert state.residual_compute[0] == 25.0
    shared = simple_mission(2, 0, 1, "A", compute=[20], net=net)
    assert check_feasible(embed(net, shared, (0, 1), (0,)), shared, state) == []
    fresh = simple_mission(3, 0, 1, "B", compute=[20], net=net)
    assert check_feasible(embed(net, fresh, (0, 1), (0,)), fresh, state) == ["compute capacity on node 0"]


def test_delay_budget_violation():
    net = make_network("gggg", [(0, 1), (1, 2), (2, 3)], 500, 100, delay=16.0)
    m = simple_mission(0, 0, 3, "A", budget=40.0, net=net)
    e = embed(net, m, (0, 1, 2, 3), (0,))
    assert e.route.total_delay == 48.0
    assert check_feasible(e, m, NetworkState.fresh(net, INSTALL)) == ["delay budget"]
    assert enumerate_candidates(m, net, NetworkState.fresh(net, INSTALL)) == []


def test_bandwidth_violation_names_link():
    net = make_network("ggg", [(0, 1), (1, 2)], 500, [100, 5])
    m = simple_mission(0, 0, 2, "A", bw=10, net=net)
    assert check_feasible(embed(net, m, (0, 1, 2), (0,)), m, NetworkState.fresh(net, INSTALL)) == [
        "bandwidth capacity on link 1"]


def test_single_vnf_cost():
    net = make_network("gg", [(0, 1)], 500, 100)
    m = simple_mission(0, 0, 1, "A", bw=10, compute=[20], net=net)
    cost = marginal_cost(embed(net, m, (0, 1), (0,)), m, NetworkState.fresh(net, INSTALL))
    assert cost == CostBreakdown(10.0, 0.0, 30.0, 20.0, 60.0)


def test_sharing_beats_shorter_route():
    # 4-hop route through node 2, which already runs C; 3-hop route without it
    net = make_network("ggggggg", [(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (5, 6), (6, 4)], 500, 100)
    state = NetworkState.fresh(net, INSTALL)
    other = simple_mission(9, 1, 3, "C", bw=10, compute=[20], net=net)
    commit(embed(net, other, (1, 2, 3), (2,)), other, state)
    m = simple_mission(0, 0, 4, "C", bw=10, compute=[20], net=net)
    reuse = marginal_cost(embed(net, m, (0, 1, 2, 3, 4), (2,)), m, state)
    new = marginal_cost(embed(net, m, (0, 5, 6, 4), (5,)), m, state)
    assert (reuse.bandwidth_cost, reuse.new_install_cost, reuse.total) == (40.0, 0.0, 60.0)
    assert (new.bandwidth_cost, new.new_install_cost, new.total) == (30.0, 30.0, 80.0)
    best = enumerate_candidates(m, net, state)[0]
    assert (best.route.nodes, best.placement) == ((0, 1, 2, 3, 4), (2,))


def test_air_multiplier_doubles():
    air = make_network("ag", [(0, 1)], 500, 100)
    ground = make_network("gg", [(0, 1)], 500, 100)
    m = simple_mission(0, 0, 1, "AB", compute=[20, 15], net=air)
    ca = marginal_cost(embed(air, m, (0, 1), (0, 0)), m, NetworkState.fresh(air, INSTALL))
    cg = marginal_cost(embed(ground, m, (0, 1), (0, 0)), m, NetworkState.fresh(ground, INSTALL))
    assert ca.processing_cost == 2 * cg.processing_cost == 70.0
    assert ca.new_install_cost == 2 * cg.new_install_cost
    assert ca.a2g_bandwidth_cost == 10.0 and cg.a2g_bandwidth_cost == 0.0


def test_weights():
    net = make_network("gg", [(0, 1)], 500, 100)
    m = simple_mission(0, 0, 1, "A", bw=10, compute=[20], net=net)
    cost = marginal_cost(embed(net, m, (0, 1), (0,)), m, NetworkState.fresh(net, INSTALL),
                         CostParams(w_bandwidth=2.0, w_compute=0.5))
    assert cost.total == 2.0 * 10 + 0.5 * 50


def test_instance_sharing_refcounts():
    net = make_network("gg", [(0, 1)], 500, 100)
    state = NetworkState.fresh(net, INSTALL)
    a = simple_mission(0, 0, 1, "C", compute=[20], net=net)
    b = simple_mission(1, 0, 1, "C", compute=[25], net=net)
    ea, eb = embed(net, a, (0, 1), (0,)), embed(net, b, (0, 1), (0,))
    commit(ea, a, state)
    commit(eb, b, state)
    assert state.instances[(0, "C")] == 2
    assert state.residual_compute[0] == 500 - 30 - 20 - 25
    release(ea, a, state)
    assert state.instances[(0, "C")] == 1
    assert state.residual_compute[0] == 500 - 30 - 25
    release(eb, b, state)
    assert (0, "C") not in state.instances
    assert state.residual_compute[0] == 500.0
    assert state == NetworkState.fresh(net, INSTALL)


def test_commit_errors():
    net = make_network("gg", [(0, 1)], [40, 500], 100)
    state = NetworkState.fresh(net, INSTALL)
    m = simple_mission(0, 0, 1, "A", compute=[20], net=net)
    with pytest.raises(EmbeddingError, match="infeasible"):
        commit(embed(net, m, (0, 1), (0,)), m, state)
    e = embed(net, m, (0, 1), (1,))
    commit(e, m, state)
    with pytest.raises(EmbeddingError, match="already committed"):
        commit(e, m, state)
    other = simple_mission(1, 0, 1, "A", compute=[5], net=net)
    with pytest.raises(EmbeddingError):
        release(embed(net, other, (0, 1), (1,)), other, state)
    with pytest.raises(EmbeddingError, match="order-preserving"):
        commit(Embedding(1, e.route, (1, 0)), simple_mission(1, 0, 1, "AB", net=net), state)


def test_hosts_restrict_placement_not_route():
    net = make_network("gag", [(0, 1), (1, 2)], 500, 100)
    m = simple_mission(0, 0, 2, "AB", net=net)
    cands = enumerate_candidates(m, net, NetworkState.fresh(net, INSTALL), hosts=[0, 2])
    assert cands and all(1 not in c.placement for c in cands)
    assert all(c.route.nodes == (0, 1, 2) for c in cands)


def test_max_candidates():
    net = make_network("ggg", [(0, 1), (1, 2), (0, 2)], 500, 100)
    m = simple_mission(0, 0, 2, "AB", net=net)
    state = NetworkState.fresh(net, INSTALL)
    full = enumerate_candidates(m, net, state)
    assert enumerate_candidates(m, net, state, Limits(max_candidates=3)) == full[:3]


def _random_loaded_state(rng, net, install, params, n_missions=3):
    """A state with a few greedily committed missions."""
    state = NetworkState.fresh(net, install)
    for i in range(n_missions):
        m = random_mission(rng, net, 100 + i, chain_max=3)
        cands = enumerate_candidates(m, net, state, Limits(max_hops=3, k_paths=3), params)
        if cands:
            commit(cands[0], m, state)
    return state


@settings(max_examples=60)
@given(st.integers(0, 10**9))
def test_enumeration_matches_brute_force(seed):
    rng = random.Random(seed)
    net = random_network(rng, n_max=7, cpu=(80, 250))
    install = random_install_costs(rng)
    params = CostParams(w_bandwidth=rng.choice([0.5, 1.0, 2.0]), air_multiplier=rng.choice([1.0, 2.0, 3.0]))
    state = _random_loaded_state(rng, net, install, params)
    m = random_mission(rng, net, 0, chain_max=3)
    hosts = None if rng.random() < 0.5 else set(net.segment_nodes(m.origin))
    got = enumerate_candidates(m, net, state, Limits(max_hops=6, k_paths=10**6), params, hosts)
    want = oracle_candidates(net, m, state.residual_compute, state.residual_bandwidth, state.instances,
                             install, params, max_hops=6, hosts=hosts)
    assert {(c.route.nodes, c.placement) for c in got} == set(want)
    assert len(got) == len(want)
    for c in got:
        o = want[(c.route.nodes, c.placement)]
        cb = c.cost
        for a, b in zip((cb.bandwidth_cost, cb.a2g_bandwidth_cost, cb.new_install_cost, cb.processing_cost, cb.total), o):
            assert rel_close(a, b)
        assert all(p <= q for p, q in zip(c.positions, c.positions[1:]))
    keys = [c.sort_key() for c in got]
    assert keys == sorted(keys)


@settings(max_examples=60)
@given(st.integers(0, 10**9))
def test_commit_release_round_trip_and_audit(seed):
    rng = random.Random(seed)
    net = random_network(rng)
    install = random_install_costs(rng)
    state = NetworkState.fresh(net, install)
    live = []
    snapshots = [state.copy()]
    for i in range(8):
        m = random_mission(rng, net, i)
        cands = enumerate_candidates(m, net, state, Limits(max_hops=3, k_paths=4))
        if not cands:
            continue
        e = rng.choice(cands)
        commit(e, m, state)
        assert audit_state(state) == []
        assert min(state.residual_compute) >= 0 and min(state.residual_bandwidth) >= 0
        live.append((e, m))
        snapshots.append(state.copy())
    # undo in reverse: every intermediate state is reproduced bit for bit
    for (e, m), snap in zip(reversed(live), reversed(snapshots[:-1])):
        release(e, m, state)
        assert audit_state(state) == []
        assert state == snap
    assert state == NetworkState.fresh(net, install)


@settings(max_examples=40)
@given(st.integers(0, 10**9))
def test_release_order_does_not_matter(seed):
    rng = random.Random(seed)
    net = random_network(rng)
    install = random_install_costs(rng)
    state = NetworkState.fresh(net, install)
    live = []
    for i in range(6):
        m = random_mission(rng, net, i)
        cands = enumerate_candidates(m, net, state, Limits(max_hops=3, k_paths=4))
        if cands:
            commit(cands[0], m, state)
            live.append((cands[0], m))
    total = configuration_cost(state)
    assert rel_close(total.total, math.fsum(e.cost.total for e, _ in live))
    rng.shuffle(live)
    for e, m in live:
        release(e, m, state)
        assert audit_state(state) == []
    assert state == NetworkState.fresh(net, install)


@settings(max_examples=40)
@given(st.integers(0, 10**9))
def test_prior_instance_never_raises_cost(seed):
    rng = random.Random(seed)
    net = random_network(rng)
    install = random_install_costs(rng)
    params = CostParams()
    base = _random_loaded_state(rng, net, install, params)
    m = random_mission(rng, net, 0)
    cands = enumerate_candidates(m, net, base, Limits(max_hops=3, k_paths=4), params)
    richer = base.copy()
    n = rng.randrange(len(net.nodes))
    v = rng.choice(m.chain)
    richer.instances[(n, v)] = richer.instances.get((n, v), 0) + 1
    for c in cands:
        assert marginal_cost(c, m, richer, params).total <= marginal_cost(c, m, base, params).total
