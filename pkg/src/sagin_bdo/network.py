"""SAGIN substrate graph: air/ground nodes, capacitated links, simple-path enumeration."""
from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError, LoadError

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class Segment(str, enum.Enum):
    AIR = "air"
    GROUND = "ground"


class LinkKind(str, enum.Enum):
    A2G = "A2G"
    G2G = "G2G"
    A2A = "A2A"


@dataclass(frozen=True)
class Node:
    id: int
    segment: Segment
    compute_capacity: float  # GFLOPS
    battery: Optional[float] = None  # Wh, air nodes only

    def __post_init__(self):
        if self.compute_capacity <= 0:
            raise ConfigError(f"node {self.id}: compute capacity must be positive")
        if self.segment is Segment.AIR:
            if self.battery is None or self.battery <= 0:
                raise ConfigError(f"node {self.id}: air node needs a positive battery")
        elif self.battery is not None:
            raise ConfigError(f"node {self.id}: ground node cannot carry a battery")

    @property
    def is_air(self) -> bool:
        return self.segment is Segment.AIR


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    bandwidth_capacity: float  # Mbps
    hop_delay: float  # ms
    kind: LinkKind

    def other(self, node: int) -> int:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class Route:
    """A simple path, stored both as node sequence and as link indices."""

    nodes: tuple[int, ...]
    links: tuple[int, ...]
    total_delay: float

    @property
    def hop_count(self) -> int:
        return len(self.links)

    @property
    def src(self) -> int:
        return self.nodes[0]

    @property
    def dst(self) -> int:
        return self.nodes[-1]

    def sort_key(self):
        return (self.hop_count, self.total_delay, self.nodes)


def _link_kind(sa: Segment, sb: Segment) -> LinkKind:
    if sa is sb:
        return LinkKind.A2A if sa is Segment.AIR else LinkKind.G2G
    return LinkKind.A2G


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    adjacency: tuple[tuple[tuple[int, int], ...], ...] = field(
        default=(), compare=False, repr=False
    )
    _pair_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.nodes)
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise ConfigError(f"node ids must be dense 0..{n - 1}; got {node.id} at position {i}")
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        pairs = {}
        for li, link in enumerate(self.links):
            if link.a == link.b:
                raise ConfigError(f"link {li}: self-loop at node {link.a}")
            if not (0 <= link.a < n and 0 <= link.b < n):
                raise ConfigError(f"link {li}: unknown endpoint ({link.a}, {link.b})")
            if link.bandwidth_capacity <= 0 or link.hop_delay <= 0:
                raise ConfigError(f"link {li}: bandwidth and delay must be positive")
            key = (min(link.a, link.b), max(link.a, link.b))
            if key in pairs:
                raise ConfigError(f"link {li}: duplicate link between nodes {key[0]} and {key[1]}")
            expected = _link_kind(self.nodes[link.a].segment, self.nodes[link.b].segment)
            if link.kind is not expected:
                raise ConfigError(f"link {li}: kind {link.kind.value} inconsistent with endpoints")
            pairs[key] = li
            adj[link.a].append((link.b, li))
            adj[link.b].append((link.a, li))
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))
        object.__setattr__(self, "_pair_index", pairs)
        if n and not self.is_connected():
            raise ConfigError("network graph is not connected")

    def __len__(self) -> int:
        return len(self.nodes)

    def link_between(self, u: int, v: int) -> Optional[int]:
        return self._pair_index.get((min(u, v), max(u, v)))

    def segment_nodes(self, segment: Segment) -> list[int]:
        return [nd.id for nd in self.nodes if nd.segment is segment]

    @property
    def air_nodes(self) -> list[int]:
        return self.segment_nodes(Segment.AIR)

    @property
    def ground_nodes(self) -> list[int]:
        return self.segment_nodes(Segment.GROUND)

    def is_connected(self) -> bool:
        seen = {0}
        todo = [0]
        while todo:
            u = todo.pop()
            for v, _ in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return len(seen) == len(self.nodes)

    def route_from_nodes(self, nodes: Sequence[int]) -> Route:
        links = []
        for u, v in zip(nodes, nodes[1:]):
            li = self.link_between(u, v)
            if li is None:
                raise ValueError(f"no link between {u} and {v}")
            links.append(li)
        delay = sum(self.links[li].hop_delay for li in links)
        return Route(tuple(nodes), tuple(links), delay)


# ---------------------------------------------------------------------------
# case-study construction


def _ring_with_chords(n: int) -> tuple[tuple[int, int], ...]:
    ring = [(i, (i + 1) % n) for i in range(n)]
    # chords N1-N4 and N3-N6
    return tuple(ring + [(0, 3), (2, 5)])


@dataclass(frozen=True)
class TopologyConfig:
    n_air: int = 2
    n_ground: int = 7
    ground_edges: tuple[tuple[int, int], ...] = _ring_with_chords(7)
    air_air_link: bool = True
    bandwidth_range: tuple[float, float] = (80.0, 100.0)
    compute_range: tuple[float, float] = (500.0, 600.0)
    delay_range: tuple[float, float] = (10.0, 15.0)
    battery_wh: float = 100.0

    def validate(self) -> None:
        if self.n_air < 0 or self.n_ground < 1:
            raise ConfigError("need at least one ground node and a non-negative air count")
        for name in ("bandwidth_range", "compute_range", "delay_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"{name} must satisfy 0 < low <= high, got ({lo}, {hi})")
        if self.battery_wh <= 0:
            raise ConfigError("battery_wh must be positive")
        seen = set()
        for a, b in self.ground_edges:
            if not (0 <= a < self.n_ground and 0 <= b < self.n_ground) or a == b:
                raise ConfigError(f"bad ground edge ({a}, {b})")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ConfigError(f"duplicate ground edge ({a}, {b})")
            seen.add(key)
        # ground graph must be connected on its own
        adj = {i: set() for i in range(self.n_ground)}
        for a, b in self.ground_edges:
            adj[a].add(b)
            adj[b].add(a)
        reach = {0}
        todo = [0]
        while todo:
            u = todo.pop()
            for v in adj[u] - reach:
                reach.add(v)
                todo.append(v)
        if len(reach) != self.n_ground:
            raise ConfigError("ground adjacency is disconnected")


def build_case_study_network(seed: int, config: TopologyConfig | None = None) -> Network:
    """Air/ground network with full air-ground connectivity.

    Ground nodes take ids ``0..n_ground-1`` (N1..N7 by default), air nodes
    follow. Compute capacities are drawn in node-id order, then bandwidth and
    delay per link in link order, all from one ``numpy`` generator.
    """
    cfg = config or TopologyConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    n = cfg.n_ground + cfg.n_air
    compute = rng.uniform(*cfg.compute_range, size=n)
    nodes = []
    for i in range(n):
        if i < cfg.n_ground:
            nodes.append(Node(i, Segment.GROUND, float(compute[i])))
        else:
            nodes.append(Node(i, Segment.AIR, float(compute[i]), cfg.battery_wh))

    pairs = [(min(a, b), max(a, b)) for a, b in cfg.ground_edges]
    air = range(cfg.n_ground, n)
    pairs += [(g, a) for a in air for g in range(cfg.n_ground)]
    if cfg.air_air_link:
        pairs += [(a, b) for a in air for b in air if a < b]

    bw = rng.uniform(*cfg.bandwidth_range, size=len(pairs))
    delay = rng.uniform(*cfg.delay_range, size=len(pairs))
    links = tuple(
        Link(a, b, float(bw[i]), float(delay[i]), _link_kind(nodes[a].segment, nodes[b].segment))
        for i, (a, b) in enumerate(pairs)
    )
    return Network(tuple(nodes), links)


# ---------------------------------------------------------------------------
# topology files (TOML arrays of tables [[node]] and [[link]])


def dumps_network(net: Network) -> str:
    out = ["# sagin-bdo topology", ""]
    for nd in net.nodes:
        out.append("[[node]]")
        out.append(f"id = {nd.id}")
        out.append(f'segment = "{nd.segment.value}"')
        out.append(f"compute_gflops = {nd.compute_capacity!r}")
        if nd.battery is not None:
            out.append(f"battery_wh = {nd.battery!r}")
        out.append("")
    for ln in net.links:
        out.append("[[link]]")
        out.append(f"a = {ln.a}")
        out.append(f"b = {ln.b}")
        out.append(f"bandwidth_mbps = {ln.bandwidth_capacity!r}")
        out.append(f"delay_ms = {ln.hop_delay!r}")
        out.append("")
    return "\n".join(out)


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(dumps_network(net))


def _header_lines(text: str, name: str) -> list[int]:
    pat = re.compile(rf"^\s*\[\[\s*{name}\s*\]\]")
    return [i + 1 for i, line in enumerate(text.splitlines()) if pat.match(line)]


def loads_network(text: str, source: str = "<string>") -> Network:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise LoadError(f"{source}: parse error: {exc}") from None
    unknown = set(doc) - {"node", "link"}
    if unknown:
        raise LoadError(f"{source}: unknown section(s) {sorted(unknown)}")
    node_lines = _header_lines(text, "node")
    link_lines = _header_lines(text, "link")

    def where(kind, i, lines):
        return f"{source}:{lines[i]}" if i < len(lines) else source

    def number(tbl, key, ctx):
        if key not in tbl:
            raise LoadError(f"{ctx}: missing field '{key}'")
        val = tbl[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise LoadError(f"{ctx}: field '{key}' must be a number")
        return val

    raw_nodes = doc.get("node", [])
    if not raw_nodes:
        raise LoadError(f"{source}: no [[node]] entries")
    nodes: dict[int, Node] = {}
    for i, tbl in enumerate(raw_nodes):
        ctx = where("node", i, node_lines)
        nid = number(tbl, "id", ctx)
        if not isinstance(nid, int) or nid < 0:
            raise LoadError(f"{ctx}: field 'id' must be a non-negative integer")
        if nid in nodes:
            raise LoadError(f"{ctx}: duplicate node id {nid}")
        seg_raw = tbl.get("segment")
        try:
            seg = Segment(str(seg_raw).lower())
        except ValueError:
            raise LoadError(f"{ctx}: field 'segment' must be 'air' or 'ground', got {seg_raw!r}") from None
        compute = float(number(tbl, "compute_gflops", ctx))
        battery = float(number(tbl, "battery_wh", ctx)) if "battery_wh" in tbl else None
        try:
            nodes[nid] = Node(nid, seg, compute, battery)
        except ConfigError as exc:
            raise LoadError(f"{ctx}: {exc}") from None
    if sorted(nodes) != list(range(len(nodes))):
        raise LoadError(f"{source}: node ids must be dense 0..{len(nodes) - 1}")
    node_seq = tuple(nodes[i] for i in range(len(nodes)))

    links = []
    seen = set()
    for i, tbl in enumerate(doc.get("link", [])):
        ctx = where("link", i, link_lines)
        a = number(tbl, "a", ctx)
        b = number(tbl, "b", ctx)
        if a not in nodes or b not in nodes:
            raise LoadError(f"{ctx}: link endpoint references unknown node ({a}, {b})")
        if a == b:
            raise LoadError(f"{ctx}: self-loop at node {a}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise LoadError(f"{ctx}: duplicate link between nodes {key[0]} and {key[1]}")
        seen.add(key)
        bw = float(number(tbl, "bandwidth_mbps", ctx))
        delay = float(number(tbl, "delay_ms", ctx))
        if bw <= 0:
            raise LoadError(f"{ctx}: field 'bandwidth_mbps' must be positive")
        if delay <= 0:
            raise LoadError(f"{ctx}: field 'delay_ms' must be positive")
        links.append(Link(a, b, bw, delay, _link_kind(nodes[a].segment, nodes[b].segment)))
    try:
        return Network(node_seq, tuple(links))
    except ConfigError as exc:
        raise LoadError(f"{source}: {exc}") from None


def load_network(path: str | Path) -> Network:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LoadError(f"{path}: {exc.strerror}") from None
    return loads_network(text, str(path))


# ---------------------------------------------------------------------------
# path enumeration


def _hop_distance_to(net: Network, dst: int) -> list[float]:
    dist = [float("inf")] * len(net.nodes)
    dist[dst] = 0
    q = deque([dst])
    while q:
        u = q.popleft()
        for v, _ in net.adjacency[u]:
            if dist[v] == float("inf"):
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def _paths_with_hops(net, src, dst, hops, dist) -> Iterator[tuple[int, ...]]:
    path = [src]
    on_path = {src}

    def extend(u, left):
        if left == 0:
            if u == dst:
                yield tuple(path)
            return
        for v, _ in net.adjacency[u]:
            if v in on_path or dist[v] > left - 1:
                continue
            if v == dst and left > 1:
                continue
            path.append(v)
            on_path.add(v)
            yield from extend(v, left - 1)
            path.pop()
            on_path.discard(v)

    yield from extend(src, hops)


def k_simple_paths(net: Network, src: int, dst: int, max_hops: int, k: int) -> list[Route]:
    """Up to ``k`` loop-free routes of at most ``max_hops`` links.

    Ordered by (hop count, total delay, node sequence). Paths are generated
    one hop-count level at a time, so the search stops as soon as ``k``
    routes of the shortest levels are known.
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    if max_hops < 1 or k < 1:
        raise ValueError("max_hops and k must be >= 1")
    dist = _hop_distance_to(net, dst)
    found: list[Route] = []
    for hops in range(1, max_hops + 1):
        if dist[src] > hops:
            continue
        level = [net.route_from_nodes(p) for p in _paths_with_hops(net, src, dst, hops, dist)]
        level.sort(key=Route.sort_key)
        found.extend(level)
        if len(found) >= k:
            break
    return found[:k]
