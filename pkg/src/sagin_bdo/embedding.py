"""Feasibility, marginal cost and transactional state for chain embeddings.

An embedding pairs one simple route with an order-preserving assignment of
chain positions to route nodes. Node compute pays for VNF instances (once
per node and type, shared across missions) plus per-position processing;
links pay the mission's bandwidth once per traversal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Optional, Sequence

from .errors import EmbeddingError
from .missions import Mission
from .network import LinkKind, Network, Route, Segment, k_simple_paths


@dataclass(frozen=True)
class CostParams:
    w_bandwidth: float = 1.0  # per Mbps*hop
    w_compute: float = 1.0  # per GFLOPS
    air_multiplier: float = 2.0
    ground_multiplier: float = 1.0

    def multiplier(self, segment: Segment) -> float:
        return self.air_multiplier if segment is Segment.AIR else self.ground_multiplier


@dataclass(frozen=True)
class Limits:
    max_hops: int = 4
    k_paths: int = 10
    max_candidates: Optional[int] = None


@dataclass(frozen=True)
class CostBreakdown:
    bandwidth_cost: float = 0.0
    a2g_bandwidth_cost: float = 0.0
    new_install_cost: float = 0.0
    processing_cost: float = 0.0
    total: float = 0.0

    @property
    def computation_cost(self) -> float:
        return self.new_install_cost + self.processing_cost

    @classmethod
    def combine(cls, parts: Iterable["CostBreakdown"]) -> "CostBreakdown":
        parts = list(parts)
        return cls(*(math.fsum(getattr(p, f) for p in parts) for f in
                     ("bandwidth_cost", "a2g_bandwidth_cost", "new_install_cost", "processing_cost", "total")))


@dataclass(frozen=True)
class Embedding:
    mission_id: int
    route: Route
    placement: tuple[int, ...]  # hosting node per chain position
    cost: CostBreakdown = field(default=CostBreakdown(), compare=False)

    @property
    def positions(self) -> tuple[int, ...]:
        index = {n: i for i, n in enumerate(self.route.nodes)}
        return tuple(index[n] for n in self.placement)

    def instances(self, m: Mission) -> set[tuple[int, str]]:
        return set(zip(self.placement, m.chain))

    def sort_key(self):
        return (self.cost.total, self.route.hop_count, self.route.nodes, self.positions)


@dataclass(eq=False)
class NetworkState:
    """Residual capacities plus installed instances with mission reference counts.

    Residuals are always ``capacity - fsum(live allocations)``, so any
    commit/release sequence that returns to the same set of live embeddings
    reproduces the same floats bit for bit.
    """

    net: Network
    install_costs: Mapping[str, float]
    node_alloc: list[dict] = field(default_factory=list)
    link_alloc: list[dict] = field(default_factory=list)
    instances: dict[tuple[int, str], int] = field(default_factory=dict)
    committed: dict[int, tuple[Embedding, Mission]] = field(default_factory=dict)
    residual_compute: list[float] = field(default_factory=list)
    residual_bandwidth: list[float] = field(default_factory=list)

    @classmethod
    def fresh(cls, net: Network, install_costs: Mapping[str, float]) -> "NetworkState":
        return cls(
            net=net,
            install_costs=dict(install_costs),
            node_alloc=[{} for _ in net.nodes],
            link_alloc=[{} for _ in net.links],
            residual_compute=[nd.compute_capacity for nd in net.nodes],
            residual_bandwidth=[ln.bandwidth_capacity for ln in net.links],
        )

    def copy(self) -> "NetworkState":
        return NetworkState(
            net=self.net,
            install_costs=self.install_costs,
            node_alloc=[dict(d) for d in self.node_alloc],
            link_alloc=[dict(d) for d in self.link_alloc],
            instances=dict(self.instances),
            committed=dict(self.committed),
            residual_compute=list(self.residual_compute),
            residual_bandwidth=list(self.residual_bandwidth),
        )

    def __eq__(self, other):
        if not isinstance(other, NetworkState):
            return NotImplemented
        return (
            self.node_alloc == other.node_alloc
            and self.link_alloc == other.link_alloc
            and self.instances == other.instances
            and self.committed.keys() == other.committed.keys()
            and self.residual_compute == other.residual_compute
            and self.residual_bandwidth == other.residual_bandwidth
        )

    def has_instance(self, node: int, vnf: str) -> bool:
        return (node, vnf) in self.instances

    def service_pairs(self, node: int) -> int:
        """Sum of mission reference counts over the instances on ``node``."""
        return sum(c for (n, _), c in self.instances.items() if n == node)

    def _refresh_node(self, n: int) -> None:
        self.residual_compute[n] = self.net.nodes[n].compute_capacity - math.fsum(self.node_alloc[n].values())

    def _refresh_link(self, li: int) -> None:
        self.residual_bandwidth[li] = self.net.links[li].bandwidth_capacity - math.fsum(self.link_alloc[li].values())


# ---------------------------------------------------------------------------
# cost and feasibility


def _node_requirements(placement, m: Mission, state: NetworkState):
    """Per hosting node: (new install GFLOPS, processing GFLOPS, new instance ids)."""
    req: dict[int, list] = {}
    for node, vnf, demand in zip(placement, m.chain, m.compute_demands):
        slot = req.setdefault(node, [[], [], set()])
        slot[1].append(demand)
        if (node, vnf) not in state.instances and vnf not in slot[2]:
            slot[2].add(vnf)
            slot[0].append(state.install_costs[vnf])
    return req


def _breakdown(route: Route, req, m: Mission, net: Network, params: CostParams) -> CostBreakdown:
    a2g_hops = sum(1 for li in route.links if net.links[li].kind is LinkKind.A2G)
    bw = m.bandwidth_demand * route.hop_count
    a2g = m.bandwidth_demand * a2g_hops
    install = []
    proc = []
    for node in sorted(req):
        mult = params.multiplier(net.nodes[node].segment)
        install.extend(c * mult for c in req[node][0])
        proc.extend(d * mult for d in req[node][1])
    inst = math.fsum(install)
    pr = math.fsum(proc)
    total = params.w_bandwidth * bw + params.w_compute * (inst + pr)
    return CostBreakdown(bw, a2g, inst, pr, total)


def marginal_cost(e: Embedding, m: Mission, state: NetworkState, params: CostParams = CostParams()) -> CostBreakdown:
    """Cost of adding ``e`` to ``state``; instances already present are free."""
    req = _node_requirements(e.placement, m, state)
    return _breakdown(e.route, req, m, state.net, params)


def check_feasible(e: Embedding, m: Mission, state: NetworkState) -> list[str]:
    """Violated constraints, each naming the binding resource. Empty means feasible."""
    problems = []
    for li in e.route.links:
        if state.residual_bandwidth[li] < m.bandwidth_demand:
            problems.append(f"bandwidth capacity on link {li}")
    req = _node_requirements(e.placement, m, state)
    for node in sorted(req):
        need = math.fsum(req[node][0]) + math.fsum(req[node][1])
        if state.residual_compute[node] < need:
            problems.append(f"compute capacity on node {node}")
    if e.route.total_delay > m.delay_budget:
        problems.append("delay budget")
    return problems


def _check_structure(e: Embedding, m: Mission) -> None:
    if e.mission_id != m.id:
        raise EmbeddingError(f"embedding for mission {e.mission_id} applied to mission {m.id}")
    if len(e.placement) != len(m.chain):
        raise EmbeddingError("placement length does not match chain length")
    pos = e.positions  # raises KeyError if a host is off-route
    if any(a > b for a, b in zip(pos, pos[1:])):
        raise EmbeddingError("placement is not order-preserving along the route")


def commit(e: Embedding, m: Mission, state: NetworkState) -> NetworkState:
    """Reserve bandwidth, compute and instances for ``e``. Mutates and returns ``state``."""
    _check_structure(e, m)
    if m.id in state.committed:
        raise EmbeddingError(f"mission {m.id} is already committed")
    problems = check_feasible(e, m, state)
    if problems:
        raise EmbeddingError(f"committing infeasible embedding for mission {m.id}: {problems}")
    for li in e.route.links:
        state.link_alloc[li][m.id] = m.bandwidth_demand
        state._refresh_link(li)
    touched = set()
    for pos, (node, vnf, demand) in enumerate(zip(e.placement, m.chain, m.compute_demands)):
        state.node_alloc[node][("proc", m.id, pos)] = demand
        touched.add(node)
    for node, vnf in sorted(e.instances(m)):
        count = state.instances.get((node, vnf), 0)
        if count == 0:
            state.node_alloc[node][("inst", vnf)] = state.install_costs[vnf]
        state.instances[(node, vnf)] = count + 1
    for node in touched:
        state._refresh_node(node)
    state.committed[m.id] = (e, m)
    return state


def release(e: Embedding, m: Mission, state: NetworkState) -> NetworkState:
    """Exact inverse of :func:`commit`; unreferenced instances are removed and refunded."""
    live = state.committed.get(m.id)
    if live is None or live[0] != e:
        raise EmbeddingError(f"mission {m.id} has no committed embedding matching this one")
    for li in e.route.links:
        del state.link_alloc[li][m.id]
        state._refresh_link(li)
    touched = set()
    for pos, node in enumerate(e.placement):
        del state.node_alloc[node][("proc", m.id, pos)]
        touched.add(node)
    for node, vnf in sorted(e.instances(m)):
        count = state.instances[(node, vnf)] - 1
        if count == 0:
            del state.instances[(node, vnf)]
            del state.node_alloc[node][("inst", vnf)]
        else:
            state.instances[(node, vnf)] = count
    for node in touched:
        state._refresh_node(node)
    del state.committed[m.id]
    return state


def audit_state(state: NetworkState) -> list[str]:
    """Rebuild residuals and instance counts from the committed embeddings alone.

    Also flags any committed route over its mission's delay budget.
    """
    net = state.net
    problems = []
    compute_use: list[list[float]] = [[] for _ in net.nodes]
    bw_use: list[list[float]] = [[] for _ in net.links]
    refs: dict[tuple[int, str], int] = {}
    for mid, (e, m) in state.committed.items():
        if e.route.total_delay > m.delay_budget:
            problems.append(f"mission {mid}: route delay {e.route.total_delay!r} over budget {m.delay_budget!r}")
        for li in e.route.links:
            bw_use[li].append(m.bandwidth_demand)
        for node, demand in zip(e.placement, m.compute_demands):
            compute_use[node].append(demand)
        for key in set(zip(e.placement, m.chain)):
            refs[key] = refs.get(key, 0) + 1
    for (node, vnf) in refs:
        compute_use[node].append(state.install_costs[vnf])
    if refs != state.instances:
        problems.append("instance reference counts disagree with committed embeddings")
    for n, nd in enumerate(net.nodes):
        expect = nd.compute_capacity - math.fsum(compute_use[n])
        if expect != state.residual_compute[n]:
            problems.append(f"node {n}: residual {state.residual_compute[n]!r} != recomputed {expect!r}")
        if not 0 <= state.residual_compute[n] <= nd.compute_capacity:
            problems.append(f"node {n}: residual compute out of range")
    for li, ln in enumerate(net.links):
        expect = ln.bandwidth_capacity - math.fsum(bw_use[li])
        if expect != state.residual_bandwidth[li]:
            problems.append(f"link {li}: residual {state.residual_bandwidth[li]!r} != recomputed {expect!r}")
        if not 0 <= state.residual_bandwidth[li] <= ln.bandwidth_capacity:
            problems.append(f"link {li}: residual bandwidth out of range")
    return problems


def configuration_cost(state: NetworkState, params: CostParams = CostParams()) -> CostBreakdown:
    """Cost of everything committed in ``state``, independent of commit order."""
    net = state.net
    bw, a2g, proc = [], [], []
    for e, m in state.committed.values():
        bw.append(m.bandwidth_demand * e.route.hop_count)
        a2g.append(m.bandwidth_demand * sum(1 for li in e.route.links if net.links[li].kind is LinkKind.A2G))
        proc.extend(d * params.multiplier(net.nodes[n].segment) for n, d in zip(e.placement, m.compute_demands))
    install = [state.install_costs[v] * params.multiplier(net.nodes[n].segment) for (n, v) in state.instances]
    b, a, i, p = math.fsum(bw), math.fsum(a2g), math.fsum(install), math.fsum(proc)
    return CostBreakdown(b, a, i, p, params.w_bandwidth * b + params.w_compute * (i + p))


# ---------------------------------------------------------------------------
# candidate generation


def order_preserving_placements(route_len: int, chain_len: int, allowed: Optional[Sequence[int]] = None):
    """Non-decreasing route positions, one per chain position, lexicographic order."""
    positions = range(route_len) if allowed is None else allowed
    return combinations_with_replacement(positions, chain_len)


def enumerate_candidates(
    m: Mission,
    net: Network,
    state: NetworkState,
    limits: Limits = Limits(),
    params: CostParams = CostParams(),
    hosts: Optional[Iterable[int]] = None,
) -> list[Embedding]:
    """Feasible embeddings over the top-k routes, cheapest first.

    ``hosts`` restricts which nodes may run chain VNFs (the route itself may
    still cross any node). Sorted by (total cost, hop count, route nodes,
    placement positions); truncated to ``limits.max_candidates`` if set.
    """
    host_set = None if hosts is None else set(hosts)
    routes = k_simple_paths(net, m.src, m.dst, limits.max_hops, limits.k_paths)
    out = []
    for route in routes:
        if route.total_delay > m.delay_budget:
            continue
        if any(state.residual_bandwidth[li] < m.bandwidth_demand for li in route.links):
            continue
        allowed = [i for i, n in enumerate(route.nodes) if host_set is None or n in host_set]
        if not allowed:
            continue
        for pos in order_preserving_placements(len(route.nodes), len(m.chain), allowed):
            placement = tuple(route.nodes[p] for p in pos)
            req = _node_requirements(placement, m, state)
            if any(state.residual_compute[n] < math.fsum(r[0]) + math.fsum(r[1]) for n, r in req.items()):
                continue
            cost = _breakdown(route, req, m, net, params)
            out.append(Embedding(m.id, route, placement, cost))
    out.sort(key=Embedding.sort_key)
    if limits.max_candidates is not None:
        out = out[: limits.max_candidates]
    return out


def diagnose_block(
    m: Mission,
    net: Network,
    state: NetworkState,
    limits: Limits = Limits(),
    hosts: Optional[Iterable[int]] = None,
) -> str:
    """Name the resource that first rules out every candidate."""
    routes = k_simple_paths(net, m.src, m.dst, limits.max_hops, limits.k_paths)
    if not routes:
        return "no route"
    routes = [r for r in routes if r.total_delay <= m.delay_budget]
    if not routes:
        return "delay budget"
    routes = [r for r in routes if all(state.residual_bandwidth[li] >= m.bandwidth_demand for li in r.links)]
    if not routes:
        return "bandwidth capacity"
    if hosts is not None:
        host_set = set(hosts)
        if not any(n in host_set for r in routes for n in r.nodes):
            return "no eligible host"
    return "compute capacity"
