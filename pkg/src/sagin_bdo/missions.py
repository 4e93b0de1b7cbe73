"""VNF catalog, network function chain requests, and the seeded mission generator."""
from __future__ import annotations

import csv
import enum
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, GenerationError, LoadError
from .network import Network, Segment


@dataclass(frozen=True)
class VnfType:
    id: str
    install_cost: float = 30.0  # GFLOPS per installed instance

    def __post_init__(self):
        if self.install_cost < 0:
            raise ConfigError(f"VNF {self.id}: install cost must be >= 0")


DEFAULT_CATALOG: tuple[VnfType, ...] = tuple(VnfType(c) for c in "ABCDE")


class MissionClass(str, enum.Enum):
    DELAY_SENSITIVE = "delay_sensitive"
    COMPUTATION_INTENSIVE = "computation_intensive"


@dataclass(frozen=True)
class Mission:
    id: int
    origin: Segment
    mclass: MissionClass
    src: int
    dst: int
    chain: tuple[str, ...]
    bandwidth_demand: float  # Mbps
    compute_demands: tuple[float, ...]  # GFLOPS, one per chain position
    delay_budget: float  # ms


@dataclass(frozen=True)
class ClassProfile:
    bandwidth_range: tuple[float, float]
    compute_range: tuple[float, float]
    delay_budget_range: tuple[float, float]


def _default_profiles() -> dict[MissionClass, ClassProfile]:
    return {
        MissionClass.DELAY_SENSITIVE: ClassProfile((5.0, 15.0), (7.0, 18.0), (40.0, 40.0)),
        MissionClass.COMPUTATION_INTENSIVE: ClassProfile((5.0, 15.0), (30.0, 55.0), (90.0, 90.0)),
    }


@dataclass(frozen=True)
class GeneratorConfig:
    mission_count: int = 10
    class_mix: float = 0.5  # fraction delay-sensitive
    origin_mix: float = 0.5  # fraction ground-origin
    profiles: Mapping[MissionClass, ClassProfile] = field(default_factory=_default_profiles)
    chain_length_range: tuple[int, int] = (3, 6)
    catalog: tuple[VnfType, ...] = DEFAULT_CATALOG

    def validate(self) -> None:
        if self.mission_count < 0:
            raise ConfigError("mission_count must be >= 0")
        for name in ("class_mix", "origin_mix"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        lo, hi = self.chain_length_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"chain_length_range must satisfy 1 <= low <= high, got ({lo}, {hi})")
        if not self.catalog:
            raise ConfigError("VNF catalog is empty")
        ids = [v.id for v in self.catalog]
        if len(set(ids)) != len(ids):
            raise ConfigError("VNF catalog ids must be unique")
        if hi > len(self.catalog) and len(self.catalog) < 2:
            raise ConfigError("chains longer than the catalog need at least two VNF types")
        for mc in MissionClass:
            if mc not in self.profiles:
                raise ConfigError(f"missing demand profile for {mc.value}")
            prof = self.profiles[mc]
            for rname in ("bandwidth_range", "compute_range", "delay_budget_range"):
                a, b = getattr(prof, rname)
                if not 0 < a <= b:
                    raise ConfigError(f"{mc.value}.{rname} must satisfy 0 < low <= high, got ({a}, {b})")

    def install_costs(self) -> dict[str, float]:
        return {v.id: v.install_cost for v in self.catalog}


def _draw_chain(rng: np.random.Generator, ids: Sequence[str], length: int) -> tuple[str, ...]:
    perm = [ids[i] for i in rng.permutation(len(ids))]
    chain = perm[: min(length, len(ids))]
    while len(chain) < length:
        # repeats only once the catalog is exhausted, never back-to-back
        pool = [v for v in ids if v != chain[-1]]
        chain.append(pool[int(rng.integers(len(pool)))])
    return tuple(chain)


def generate_missions(seed: int, net: Network, cfg: GeneratorConfig | None = None) -> list[Mission]:
    """Draw ``cfg.mission_count`` missions in arrival order.

    Each mission consumes the same sequence of draws, so the first ``n``
    missions for a given seed do not depend on the requested count.
    """
    cfg = cfg or GeneratorConfig()
    cfg.validate()
    pools = {s: net.segment_nodes(s) for s in Segment}
    needed = set()
    if cfg.origin_mix > 0:
        needed.add(Segment.GROUND)
    if cfg.origin_mix < 1:
        needed.add(Segment.AIR)
    for seg in needed:
        if len(pools[seg]) < 2:
            raise GenerationError(f"{seg.value} segment has fewer than 2 nodes; cannot draw src != dst")

    ids = [v.id for v in cfg.catalog]
    lo, hi = cfg.chain_length_range
    rng = np.random.default_rng(seed)
    missions = []
    for i in range(cfg.mission_count):
        origin = Segment.GROUND if rng.random() < cfg.origin_mix else Segment.AIR
        mclass = MissionClass.DELAY_SENSITIVE if rng.random() < cfg.class_mix else MissionClass.COMPUTATION_INTENSIVE
        src, dst = (int(x) for x in rng.choice(pools[origin], size=2, replace=False))
        length = int(rng.integers(lo, hi + 1))
        chain = _draw_chain(rng, ids, length)
        prof = cfg.profiles[mclass]
        bw = float(rng.uniform(*prof.bandwidth_range))
        compute = tuple(float(x) for x in rng.uniform(*prof.compute_range, size=length))
        budget = float(rng.uniform(*prof.delay_budget_range))
        missions.append(Mission(i, origin, mclass, src, dst, chain, bw, compute, budget))
    return missions


def validate_mission(
    m: Mission,
    net: Network,
    catalog: Iterable[VnfType] = DEFAULT_CATALOG,
    chain_length_range: tuple[int, int] = (3, 6),
) -> list[str]:
    """Every invariant the mission violates; empty when well-formed."""
    problems = []
    known = {v.id for v in catalog}
    lo, hi = chain_length_range
    if not lo <= len(m.chain) <= hi:
        problems.append(f"chain length {len(m.chain)} outside [{lo}, {hi}]")
    for vid in m.chain:
        if vid not in known:
            problems.append(f"unknown VNF id {vid!r}")
    if len(m.compute_demands) != len(m.chain):
        problems.append("compute demands must match chain length")
    if any(c <= 0 for c in m.compute_demands):
        problems.append("compute demands must be positive")
    if m.bandwidth_demand <= 0:
        problems.append("bandwidth demand must be positive")
    if m.delay_budget <= 0:
        problems.append("delay budget must be positive")
    if m.src == m.dst:
        problems.append("src equals dst")
    for role, nid in (("src", m.src), ("dst", m.dst)):
        if not 0 <= nid < len(net.nodes):
            problems.append(f"{role} {nid} is not a node")
        elif net.nodes[nid].segment is not m.origin:
            problems.append(
                f"origin segment: {role} {nid} is {net.nodes[nid].segment.value}, mission origin is {m.origin.value}"
            )
    return problems


# ---------------------------------------------------------------------------
# CSV

MISSION_COLUMNS = (
    "id", "origin", "class", "src", "dst", "chain",
    "bandwidth_mbps", "compute_gflops", "delay_budget_ms",
)


def missions_to_csv(missions: Sequence[Mission]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MISSION_COLUMNS)
    for m in missions:
        w.writerow([
            m.id, m.origin.value, m.mclass.value, m.src, m.dst, "-".join(m.chain),
            repr(m.bandwidth_demand), ";".join(repr(c) for c in m.compute_demands),
            repr(m.delay_budget),
        ])
    return buf.getvalue()


def missions_from_csv(text: str) -> list[Mission]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != MISSION_COLUMNS:
        raise LoadError("mission CSV: unexpected header")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            mid, origin, mclass, src, dst, chain, bw, comp, budget = row
            out.append(Mission(
                int(mid), Segment(origin), MissionClass(mclass), int(src), int(dst),
                tuple(chain.split("-")), float(bw),
                tuple(float(c) for c in comp.split(";")), float(budget),
            ))
        except ValueError as exc:
            raise LoadError(f"mission CSV line {lineno}: {exc}") from None
    return out


def write_missions(missions: Sequence[Mission], path: str | Path) -> None:
    Path(path).write_text(missions_to_csv(missions))


def mission_digest(missions: Sequence[Mission]) -> str:
    return hashlib.sha256(missions_to_csv(missions).encode()).hexdigest()[:16]
