"""Air-node energy model and the per-run metrics report."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Mapping, Optional, Sequence

from .embedding import CostParams, Embedding, NetworkState
from .errors import ConfigError
from .missions import Mission, MissionClass
from .network import LinkKind, Network, Segment
from .solvers import SolveOutcome

UNLIMITED = math.inf  # endurance with no computation load


@dataclass(frozen=True)
class EnergyModel:
    battery_wh: float = 100.0
    power_per_vnf_mission_w: float = 0.2

    def __post_init__(self):
        if self.battery_wh <= 0 or self.power_per_vnf_mission_w <= 0:
            raise ConfigError("battery and per-VNF power must be positive")

    def endurance_hours(self, service_pairs: int) -> float:
        if service_pairs == 0:
            return UNLIMITED
        return self.battery_wh / (self.power_per_vnf_mission_w * service_pairs)


def duty_endurance(state: NetworkState, node: int, model: EnergyModel = EnergyModel()) -> float:
    """Hours the computation battery of an air node lasts under its current load."""
    if state.net.nodes[node].segment is not Segment.AIR:
        raise ValueError(f"node {node} is a ground node; duty endurance is defined for air nodes only")
    return model.endurance_hours(state.service_pairs(node))


_CLASS_TAG = {MissionClass.DELAY_SENSITIVE: "ds", MissionClass.COMPUTATION_INTENSIVE: "ci"}


@dataclass(frozen=True)
class MetricsReport:
    mission_count: int
    accepted_count: int
    blocking_rate: float
    computation_cost_total: float
    computation_cost_per_completed: Optional[float]  # None: no accepted mission
    bandwidth_cost_total: float
    a2g_bandwidth_cost: float
    total_cost: float
    air_service_pairs: int
    duty_endurance: tuple[float, ...]  # per air node, hours; inf = unlimited
    duty_endurance_min: float
    offload_ratio_air: Optional[float]
    offload_ratio_ground: Optional[float]
    # (origin, class tag) -> (offloaded, accepted)
    offload_counts: Mapping[tuple[str, str], tuple[int, int]] = field(default_factory=dict)

    def offload_ratio(self, origin: Segment, mclass: MissionClass) -> Optional[float]:
        off, acc = self.offload_counts.get((origin.value, _CLASS_TAG[mclass]), (0, 0))
        return off / acc if acc else None


def _offloaded(e: Embedding, m: Mission, net: Network) -> bool:
    return any(net.nodes[n].segment is not m.origin for n in e.placement)


def _offload_summary(pairs, net):
    counts = {}
    for origin in Segment:
        for mc, tag in _CLASS_TAG.items():
            counts[(origin.value, tag)] = [0, 0]
    for e, m in pairs:
        slot = counts[(m.origin.value, _CLASS_TAG[m.mclass])]
        slot[1] += 1
        slot[0] += _offloaded(e, m, net)
    counts = {k: (v[0], v[1]) for k, v in counts.items()}

    def ratio(origin):
        off = sum(v[0] for k, v in counts.items() if k[0] == origin.value)
        acc = sum(v[1] for k, v in counts.items() if k[0] == origin.value)
        return off / acc if acc else None

    return counts, ratio(Segment.AIR), ratio(Segment.GROUND)


def _report(n_missions, pairs, costs, service_pairs, net, model) -> MetricsReport:
    accepted = len(pairs)
    comp = math.fsum(c[0] for c in costs)
    bw = math.fsum(c[1] for c in costs)
    a2g = math.fsum(c[2] for c in costs)
    total = math.fsum(c[3] for c in costs)
    endurance = tuple(model.endurance_hours(service_pairs[n]) for n in net.air_nodes)
    counts, r_air, r_ground = _offload_summary(pairs, net)
    return MetricsReport(
        mission_count=n_missions,
        accepted_count=accepted,
        blocking_rate=(n_missions - accepted) / n_missions if n_missions else 0.0,
        computation_cost_total=comp,
        computation_cost_per_completed=comp / accepted if accepted else None,
        bandwidth_cost_total=bw,
        a2g_bandwidth_cost=a2g,
        total_cost=total,
        air_service_pairs=sum(service_pairs[n] for n in net.air_nodes),
        duty_endurance=endurance,
        duty_endurance_min=min(endurance) if endurance else UNLIMITED,
        offload_ratio_air=r_air,
        offload_ratio_ground=r_ground,
        offload_counts=counts,
    )


def aggregate_metrics(
    outcome: SolveOutcome,
    missions: Sequence[Mission],
    net: Network,
    model: EnergyModel = EnergyModel(),
) -> MetricsReport:
    """Metrics from the per-embedding cost breakdowns and the final state."""
    by_id = {m.id: m for m in missions}
    pairs = [(r.embedding, by_id[r.mission_id]) for r in outcome.results if r.accepted]
    costs = [
        (e.cost.computation_cost, e.cost.bandwidth_cost, e.cost.a2g_bandwidth_cost, e.cost.total)
        for e, _ in pairs
    ]
    service = {n: outcome.state.service_pairs(n) for n in net.air_nodes}
    return _report(len(outcome.results), pairs, costs, service, net, model)


def recompute_metrics(
    embeddings: Sequence[Embedding],
    missions: Sequence[Mission],
    net: Network,
    params: CostParams,
    install_costs: Mapping[str, float],
    model: EnergyModel = EnergyModel(),
) -> MetricsReport:
    """Audit path: rebuild every metric from raw placements and routes only.

    Install costs are attributed to the first embedding (in mission order)
    that uses a (node, VNF) pair; the report must equal :func:`aggregate_metrics`.
    """
    by_id = {m.id: m for m in missions}
    pos = {m.id: i for i, m in enumerate(missions)}
    ordered = sorted(embeddings, key=lambda e: pos[e.mission_id])
    seen: set[tuple[int, str]] = set()
    costs = []
    users: dict[int, set] = {n: set() for n in net.air_nodes}
    for e in ordered:
        m = by_id[e.mission_id]
        install, proc = [], []
        fresh = sorted(set(zip(e.placement, m.chain)) - seen)
        for node in sorted(set(e.placement)):
            mult = params.multiplier(net.nodes[node].segment)
            install.extend(install_costs[v] * mult for (n, v) in fresh if n == node)
            proc.extend(d * mult for n, d in zip(e.placement, m.compute_demands) if n == node)
        seen.update(fresh)
        i, p = math.fsum(install), math.fsum(proc)
        hops = len(e.route.nodes) - 1
        a2g_hops = sum(
            1 for u, v in zip(e.route.nodes, e.route.nodes[1:])
            if net.links[net.link_between(u, v)].kind is LinkKind.A2G
        )
        bw = m.bandwidth_demand * hops
        total = params.w_bandwidth * bw + params.w_compute * (i + p)
        costs.append((i + p, bw, m.bandwidth_demand * a2g_hops, total))
        for n, v in zip(e.placement, m.chain):
            if n in users:
                users[n].add((m.id, v))
    service = {n: len(s) for n, s in users.items()}
    pairs = [(e, by_id[e.mission_id]) for e in ordered]
    return _report(len(missions), pairs, costs, service, net, model)


# ---------------------------------------------------------------------------
# CSV row

METRIC_COLUMNS = (
    "mission_count", "accepted_count", "blocking_rate",
    "computation_cost_total", "computation_cost_per_completed",
    "bandwidth_cost_total", "a2g_bandwidth_cost", "total_cost",
    "air_service_pairs", "duty_endurance_min", "duty_endurance_per_air_node",
    "offload_ratio_air", "offload_ratio_ground",
    "offload_ratio_air_ds", "offload_ratio_air_ci",
    "offload_ratio_ground_ds", "offload_ratio_ground_ci",
    "offload_counts",
)


def fmt_number(x) -> str:
    if x is None or (isinstance(x, float) and math.isinf(x)):
        return ""
    return repr(x) if isinstance(x, float) else str(x)


def report_row(r: MetricsReport) -> tuple[list[str], list[str]]:
    """Cells in :data:`METRIC_COLUMNS` order plus the sentinel flags they carry."""
    flags = []
    if r.computation_cost_per_completed is None:
        flags.append("computation_cost_per_completed=undefined")
    if math.isinf(r.duty_endurance_min):
        flags.append("duty_endurance_min=unlimited")
    ratios = {
        "offload_ratio_air": r.offload_ratio_air,
        "offload_ratio_ground": r.offload_ratio_ground,
        "offload_ratio_air_ds": r.offload_ratio(Segment.AIR, MissionClass.DELAY_SENSITIVE),
        "offload_ratio_air_ci": r.offload_ratio(Segment.AIR, MissionClass.COMPUTATION_INTENSIVE),
        "offload_ratio_ground_ds": r.offload_ratio(Segment.GROUND, MissionClass.DELAY_SENSITIVE),
        "offload_ratio_ground_ci": r.offload_ratio(Segment.GROUND, MissionClass.COMPUTATION_INTENSIVE),
    }
    flags.extend(f"{k}=undefined" for k, v in ratios.items() if v is None)
    counts = ";".join(f"{o}_{c}={off}/{acc}" for (o, c), (off, acc) in sorted(r.offload_counts.items()))
    cells = [
        fmt_number(r.mission_count), fmt_number(r.accepted_count), fmt_number(r.blocking_rate),
        fmt_number(r.computation_cost_total), fmt_number(r.computation_cost_per_completed),
        fmt_number(r.bandwidth_cost_total), fmt_number(r.a2g_bandwidth_cost), fmt_number(r.total_cost),
        fmt_number(r.air_service_pairs), fmt_number(r.duty_endurance_min),
        ";".join(fmt_number(x) or "unlimited" for x in r.duty_endurance),
        *(fmt_number(v) for v in ratios.values()),
        counts,
    ]
    return cells, flags


def metric_value(r: MetricsReport, name: str):
    """Numeric metric by column name; ``None`` for undefined, ``inf`` for unlimited."""
    if name.startswith("offload_ratio_") and name[-3:] in ("_ds", "_ci"):
        origin = Segment(name.split("_")[2])
        mclass = MissionClass.DELAY_SENSITIVE if name.endswith("_ds") else MissionClass.COMPUTATION_INTENSIVE
        return r.offload_ratio(origin, mclass)
    if name not in {f.name for f in fields(MetricsReport)}:
        raise KeyError(name)
    return getattr(r, name)
