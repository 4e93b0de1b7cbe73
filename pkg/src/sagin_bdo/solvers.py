"""Admission and optimisation: greedy sequential, exact branch-and-bound, local search."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .embedding import (
    CostBreakdown,
    CostParams,
    Embedding,
    Limits,
    NetworkState,
    check_feasible,
    commit,
    configuration_cost,
    diagnose_block,
    enumerate_candidates,
    marginal_cost,
    release,
)
from .missions import DEFAULT_CATALOG, Mission
from .network import Network


class OffloadPolicy(str, enum.Enum):
    BDO = "bdo"
    NOBDO = "nobdo"


def hosting_nodes(m: Mission, net: Network, policy: OffloadPolicy) -> Optional[list[int]]:
    """Nodes allowed to run the mission's VNFs; ``None`` means unrestricted."""
    if policy is OffloadPolicy.BDO:
        return None
    return net.segment_nodes(m.origin)


DEFAULT_INSTALL_COSTS = {v.id: v.install_cost for v in DEFAULT_CATALOG}


@dataclass(frozen=True)
class MissionResult:
    mission_id: int
    embedding: Optional[Embedding] = None
    reason: str = ""

    @property
    def accepted(self) -> bool:
        return self.embedding is not None


@dataclass
class SolveOutcome:
    results: list[MissionResult]
    state: NetworkState
    optimal: Optional[bool] = None
    budget_exhausted: bool = False
    expansions: int = 0
    params: CostParams = field(default_factory=CostParams)

    @property
    def accepted_count(self) -> int:
        return sum(r.accepted for r in self.results)

    @property
    def blocked_count(self) -> int:
        return len(self.results) - self.accepted_count

    @property
    def embeddings(self) -> list[Embedding]:
        return [r.embedding for r in self.results if r.embedding is not None]

    @property
    def total_cost(self) -> CostBreakdown:
        return CostBreakdown.combine(e.cost for e in self.embeddings)

    def key(self) -> tuple[int, float]:
        return (-self.accepted_count, self.total_cost.total)


def _fresh_state(net, install_costs):
    return NetworkState.fresh(net, DEFAULT_INSTALL_COSTS if install_costs is None else install_costs)


def _replay(missions, chosen: Mapping[int, Embedding], net, params, install_costs, reasons=None) -> tuple[list[MissionResult], NetworkState]:
    """Commit ``chosen`` in mission input order, recomputing each marginal cost."""
    state = _fresh_state(net, install_costs)
    results = []
    for m in missions:
        e = chosen.get(m.id)
        if e is None:
            results.append(MissionResult(m.id, None, (reasons or {}).get(m.id, "blocked")))
            continue
        e = Embedding(m.id, e.route, e.placement, marginal_cost(e, m, state, params))
        commit(e, m, state)
        results.append(MissionResult(m.id, e))
    return results, state


def solve_greedy_sequential(
    missions: Sequence[Mission],
    net: Network,
    policy: OffloadPolicy = OffloadPolicy.BDO,
    limits: Limits = Limits(),
    params: CostParams = CostParams(),
    install_costs: Optional[Mapping[str, float]] = None,
) -> SolveOutcome:
    """Admit missions in the given order, each on its cheapest feasible candidate."""
    state = _fresh_state(net, install_costs)
    results = []
    for m in missions:
        hosts = hosting_nodes(m, net, policy)
        cands = enumerate_candidates(m, net, state, limits, params, hosts)
        if not cands:
            results.append(MissionResult(m.id, None, diagnose_block(m, net, state, limits, hosts)))
            continue
        commit(cands[0], m, state)
        results.append(MissionResult(m.id, cands[0]))
    return SolveOutcome(results, state, params=params)


def solve_exact_batch(
    missions: Sequence[Mission],
    net: Network,
    policy: OffloadPolicy = OffloadPolicy.BDO,
    limits: Limits = Limits(),
    params: CostParams = CostParams(),
    install_costs: Optional[Mapping[str, float]] = None,
    objective: str = "lexicographic",
    block_penalty: float = 1e4,
    max_expansions: int = 2_000_000,
) -> SolveOutcome:
    """Branch-and-bound over per-mission candidate lists plus a block branch.

    The lexicographic objective maximises accepted missions, then minimises
    total weighted cost. ``objective="weighted"`` instead minimises
    ``cost + block_penalty * blocked``. Candidates are generated once against
    the empty network; the greedy solution seeds the incumbent. When the
    expansion cap is hit the incumbent is returned with ``optimal=False``.
    """
    if objective not in ("lexicographic", "weighted"):
        raise ValueError(f"unknown objective {objective!r}")
    missions = list(missions)
    base = _fresh_state(net, install_costs)
    hosts = {m.id: hosting_nodes(m, net, policy) for m in missions}
    cands = {m.id: enumerate_candidates(m, net, base, limits, params, hosts[m.id]) for m in missions}
    # per-mission cost floor: installs may be shared, bandwidth and processing never are
    floor = {}
    for m in missions:
        opts = [c.cost.total - params.w_compute * c.cost.new_install_cost for c in cands[m.id]]
        floor[m.id] = min(opts) if opts else math.inf

    def make_key(accepted, blocked, cost):
        if objective == "lexicographic":
            return (-accepted, cost)
        return (cost + block_penalty * blocked,)

    greedy = solve_greedy_sequential(missions, net, policy, limits, params, install_costs)
    best_key = make_key(greedy.accepted_count, greedy.blocked_count, configuration_cost(greedy.state, params).total)
    best = {r.mission_id: r.embedding for r in greedy.results if r.accepted}

    order = sorted(missions, key=lambda m: len(cands[m.id]))
    # suffix sums over the branching order for the bounds
    n = len(order)
    can_accept = [0] * (n + 1)
    floor_sum = [0.0] * (n + 1)
    weighted_floor = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        m = order[i]
        has = 1 if cands[m.id] else 0
        can_accept[i] = can_accept[i + 1] + has
        floor_sum[i] = floor_sum[i + 1] + (floor[m.id] if has else 0.0)
        weighted_floor[i] = weighted_floor[i + 1] + min(block_penalty, floor[m.id])

    state = base
    chosen: dict[int, Embedding] = {}
    expansions = 0
    exhausted = False

    def bound(depth, accepted, blocked, cost):
        if objective == "lexicographic":
            return (-(accepted + can_accept[depth]), cost + floor_sum[depth])
        return (cost + block_penalty * blocked + weighted_floor[depth],)

    def search(depth, accepted, blocked, cost):
        nonlocal best_key, best, expansions, exhausted
        if exhausted:
            return
        expansions += 1
        if expansions > max_expansions:
            exhausted = True
            return
        if depth == n:
            key = make_key(accepted, blocked, cost)
            if key < best_key:
                best_key = key
                best = dict(chosen)
            return
        if bound(depth, accepted, blocked, cost) >= best_key:
            return
        m = order[depth]
        for c in cands[m.id]:
            if check_feasible(c, m, state):
                continue
            step = marginal_cost(c, m, state, params).total
            commit(c, m, state)
            chosen[m.id] = c
            search(depth + 1, accepted + 1, blocked, cost + step)
            del chosen[m.id]
            release(c, m, state)
            if exhausted:
                return
        search(depth + 1, accepted, blocked + 1, cost)

    search(0, 0, 0, 0.0)

    reasons = {
        m.id: diagnose_block(m, net, base, limits, hosts[m.id]) if not cands[m.id] else "not selected"
        for m in missions
    }
    results, final = _replay(missions, best, net, params, install_costs, reasons)
    return SolveOutcome(results, final, optimal=not exhausted, budget_exhausted=exhausted,
                        expansions=expansions, params=params)


def improve_local_search(
    outcome: SolveOutcome,
    missions: Sequence[Mission],
    net: Network,
    policy: OffloadPolicy = OffloadPolicy.BDO,
    limits: Limits = Limits(),
    params: CostParams = CostParams(),
    install_costs: Optional[Mapping[str, float]] = None,
    budget: int = 10,
) -> SolveOutcome:
    """Re-embedding and unblocking moves, kept only on lexicographic improvement.

    ``budget`` caps the number of full passes; scanning is by mission id.
    """
    by_id = {m.id: m for m in missions}
    state = outcome.state.copy()
    current = {r.mission_id: r.embedding for r in outcome.results if r.accepted}
    reasons = {r.mission_id: r.reason for r in outcome.results}

    def cost_now():
        return configuration_cost(state, params).total

    def improves(old_cost, new_cost):
        return new_cost < old_cost - 1e-12 * max(1.0, abs(old_cost))

    def best_for(m):
        cands = enumerate_candidates(m, net, state, limits, params, hosting_nodes(m, net, policy))
        return cands[0] if cands else None

    for _ in range(budget):
        changed = False
        # (a) re-embed accepted missions onto cheaper candidates
        for mid in sorted(current):
            m = by_id[mid]
            old = current[mid]
            before = cost_now()
            release(old, m, state)
            new = best_for(m)
            if new is not None and new != old:
                commit(new, m, state)
                if improves(before, cost_now()):
                    current[mid] = new
                    changed = True
                    continue
                release(new, m, state)
            commit(old, m, state)
        # (b) unblock a blocked mission by moving one accepted mission
        for bid in sorted(set(by_id) - set(current)):
            b = by_id[bid]
            for aid in sorted(current):
                a = by_id[aid]
                old_a = current[aid]
                release(old_a, a, state)
                eb = best_for(b)
                if eb is None:
                    commit(old_a, a, state)
                    continue
                commit(eb, b, state)
                ea = best_for(a)
                if ea is not None:
                    commit(ea, a, state)
                    current[aid] = ea
                    current[bid] = eb
                    changed = True
                    break
                release(eb, b, state)
                commit(old_a, a, state)
        if not changed:
            break

    results, final = _replay(missions, current, net, params, install_costs, reasons)
    return SolveOutcome(results, final, params=params)
