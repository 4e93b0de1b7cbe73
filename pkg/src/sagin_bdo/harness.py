"""Scenario orchestration: seeded runs, BDO/NoBDO pairing, CSV and plot data."""
from __future__ import annotations

import csv
import io
import math
import os
import shutil
import statistics
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .embedding import CostParams, Limits
from .errors import ConfigError
from .metrics import METRIC_COLUMNS, EnergyModel, MetricsReport, aggregate_metrics, fmt_number, metric_value, report_row
from .missions import ClassProfile, GeneratorConfig, Mission, MissionClass, VnfType, generate_missions, mission_digest
from .network import Network, TopologyConfig, build_case_study_network, load_network
from .solvers import OffloadPolicy, SolveOutcome, improve_local_search, solve_exact_batch, solve_greedy_sequential

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

SCHEMA = "sagin-bdo/metrics/v1"
SOLVERS = ("greedy", "greedy-ls", "exact")


@dataclass(frozen=True)
class Scenario:
    topology_file: Optional[str] = None  # None: built-in case-study network
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    policy: OffloadPolicy = OffloadPolicy.BDO
    solver: str = "greedy"
    params: CostParams = field(default_factory=CostParams)
    limits: Limits = field(default_factory=Limits)
    energy: EnergyModel = field(default_factory=EnergyModel)
    seeds: tuple[int, ...] = tuple(range(20))
    mission_counts: tuple[int, ...] = tuple(range(10, 41, 5))
    workers: int = 1
    ls_budget: int = 10
    exact_max_expansions: int = 2_000_000
    exact_objective: str = "lexicographic"
    exact_block_penalty: float = 1e4

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if not self.mission_counts:
            raise ConfigError("mission-count sweep is empty")
        if any(c <= 0 for c in self.mission_counts):
            raise ConfigError("mission counts must be positive")
        if any(a >= b for a, b in zip(self.mission_counts, self.mission_counts[1:])):
            raise ConfigError("mission counts must be strictly ascending")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.limits.max_hops < 1 or self.limits.k_paths < 1:
            raise ConfigError("limits.max_hops and limits.k_paths must be >= 1")
        if self.exact_objective not in ("lexicographic", "weighted"):
            raise ConfigError("exact.objective must be 'lexicographic' or 'weighted'")
        if self.topology_file is None:
            self.topology.validate()
        elif not Path(self.topology_file).is_file():
            raise ConfigError(f"topology file not found: {self.topology_file}")
        self.generator.validate()


def parse_sweep(text: str) -> tuple[int, ...]:
    """``"A:B:S"`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, s = (int(x) for x in text.split(":"))
            if s <= 0 or a <= 0 or b < a:
                raise ConfigError(f"bad sweep {text!r}: need 0 < A <= B and S > 0")
            return tuple(range(a, b + 1, s))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"bad sweep {text!r}; expected A:B:S or a comma list") from None


# ---------------------------------------------------------------------------
# config files

_SECTIONS = {
    "scenario": {"seeds", "seed_count", "missions", "policy", "solver", "workers"},
    "topology": {"file", "n_air", "n_ground", "ground_edges", "air_air_link",
                 "bandwidth_range", "compute_range", "delay_range", "battery_wh"},
    "generator": {"class_mix", "origin_mix", "chain_length", "catalog",
                  "delay_sensitive", "computation_intensive"},
    "cost": {"w_bandwidth", "w_compute", "air_multiplier", "ground_multiplier"},
    "limits": {"max_hops", "k_paths", "max_candidates"},
    "energy": {"battery_wh", "power_per_vnf_mission_w"},
    "exact": {"max_expansions", "objective", "block_penalty"},
    "local_search": {"budget"},
}
_PROFILE_KEYS = {"bandwidth", "compute", "delay_budget"}


def _pair(val, name):
    if not (isinstance(val, list) and len(val) == 2 and all(isinstance(x, (int, float)) for x in val)):
        raise ConfigError(f"{name} must be a two-element numeric list")
    return (float(val[0]), float(val[1]))


def scenario_from_dict(doc: dict, base_dir: Path = Path(".")) -> Scenario:
    for sec, body in doc.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table")
        extra = set(body) - _SECTIONS[sec]
        if extra:
            raise ConfigError(f"[{sec}]: unknown key(s) {sorted(extra)}")
    s = Scenario()
    sc = doc.get("scenario", {})
    kw = {}
    if "seeds" in sc and "seed_count" in sc:
        raise ConfigError("[scenario]: give either 'seeds' or 'seed_count', not both")
    if "seeds" in sc:
        kw["seeds"] = tuple(int(x) for x in sc["seeds"])
    if "seed_count" in sc:
        kw["seeds"] = tuple(range(int(sc["seed_count"])))
    if "missions" in sc:
        m = sc["missions"]
        kw["mission_counts"] = parse_sweep(m) if isinstance(m, str) else tuple(int(x) for x in (m if isinstance(m, list) else [m]))
    if "policy" in sc:
        try:
            kw["policy"] = OffloadPolicy(str(sc["policy"]).lower())
        except ValueError:
            raise ConfigError(f"[scenario].policy must be 'bdo' or 'nobdo', got {sc['policy']!r}") from None
    for key in ("solver", "workers"):
        if key in sc:
            kw[key] = sc[key]

    tp = dict(doc.get("topology", {}))
    if "file" in tp:
        path = Path(tp.pop("file"))
        kw["topology_file"] = str(path if path.is_absolute() else base_dir / path)
    tkw = {}
    for key in ("n_air", "n_ground", "air_air_link", "battery_wh"):
        if key in tp:
            tkw[key] = tp[key]
    for key in ("bandwidth_range", "compute_range", "delay_range"):
        if key in tp:
            tkw[key] = _pair(tp[key], f"topology.{key}")
    if "ground_edges" in tp:
        tkw["ground_edges"] = tuple((int(a), int(b)) for a, b in tp["ground_edges"])
    if tkw:
        kw["topology"] = replace(s.topology, **tkw)

    gn = doc.get("generator", {})
    gkw = {}
    for key in ("class_mix", "origin_mix"):
        if key in gn:
            gkw[key] = float(gn[key])
    if "chain_length" in gn:
        lo, hi = _pair(gn["chain_length"], "generator.chain_length")
        gkw["chain_length_range"] = (int(lo), int(hi))
    if "catalog" in gn:
        gkw["catalog"] = tuple(VnfType(str(k), float(v)) for k, v in gn["catalog"].items())
    profiles = dict(s.generator.profiles)
    for mc in MissionClass:
        if mc.value in gn:
            body = gn[mc.value]
            extra = set(body) - _PROFILE_KEYS
            if extra:
                raise ConfigError(f"[generator.{mc.value}]: unknown key(s) {sorted(extra)}")
            old = profiles[mc]
            profiles[mc] = ClassProfile(
                _pair(body["bandwidth"], "bandwidth") if "bandwidth" in body else old.bandwidth_range,
                _pair(body["compute"], "compute") if "compute" in body else old.compute_range,
                _pair(body["delay_budget"], "delay_budget") if "delay_budget" in body else old.delay_budget_range,
            )
    gkw["profiles"] = profiles
    kw["generator"] = replace(s.generator, **gkw)

    if "cost" in doc:
        kw["params"] = replace(s.params, **{k: float(v) for k, v in doc["cost"].items()})
    if "limits" in doc:
        kw["limits"] = replace(s.limits, **{k: int(v) for k, v in doc["limits"].items()})
    if "energy" in doc:
        kw["energy"] = replace(s.energy, **{k: float(v) for k, v in doc["energy"].items()})
    ex = doc.get("exact", {})
    if "max_expansions" in ex:
        kw["exact_max_expansions"] = int(ex["max_expansions"])
    if "objective" in ex:
        kw["exact_objective"] = str(ex["objective"])
    if "block_penalty" in ex:
        kw["exact_block_penalty"] = float(ex["block_penalty"])
    if "budget" in doc.get("local_search", {}):
        kw["ls_budget"] = int(doc["local_search"]["budget"])
    try:
        scenario = replace(s, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    scenario.validate()
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(doc, path.parent)


# ---------------------------------------------------------------------------
# running


def derive_seeds(seed: int) -> tuple[int, int]:
    """Independent (network, missions) seeds from one scenario seed."""
    a, b = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(b)


def scenario_network(s: Scenario, seed: int) -> Network:
    if s.topology_file is not None:
        return load_network(s.topology_file)
    return build_case_study_network(derive_seeds(seed)[0], s.topology)


def scenario_missions(s: Scenario, net: Network, seed: int, count: int) -> list[Mission]:
    return generate_missions(derive_seeds(seed)[1], net, replace(s.generator, mission_count=count))


def solve(s: Scenario, missions: Sequence[Mission], net: Network, policy: OffloadPolicy) -> SolveOutcome:
    costs = s.generator.install_costs()
    if s.solver == "exact":
        return solve_exact_batch(missions, net, policy, s.limits, s.params, costs,
                                 objective=s.exact_objective, block_penalty=s.exact_block_penalty,
                                 max_expansions=s.exact_max_expansions)
    out = solve_greedy_sequential(missions, net, policy, s.limits, s.params, costs)
    if s.solver == "greedy-ls":
        out = improve_local_search(out, missions, net, policy, s.limits, s.params, costs, s.ls_budget)
    return out


@dataclass(frozen=True)
class RunRecord:
    seed: int
    mission_count: int
    policy: OffloadPolicy
    solver: str
    digest: str
    optimal: Optional[bool]
    report: MetricsReport


def make_record(s: Scenario, seed: int, policy: OffloadPolicy, missions, net, out: SolveOutcome) -> RunRecord:
    report = aggregate_metrics(out, missions, net, s.energy)
    return RunRecord(seed, len(missions), policy, s.solver, mission_digest(missions), out.optimal, report)


def run_cell(s: Scenario, seed: int, count: int, policy: OffloadPolicy) -> RunRecord:
    net = scenario_network(s, seed)
    missions = scenario_missions(s, net, seed, count)
    return make_record(s, seed, policy, missions, net, solve(s, missions, net, policy))


def _run_cell_args(args):
    return run_cell(*args)


def _execute(s: Scenario, cells: list[tuple]) -> list[RunRecord]:
    jobs = [(s, *c) for c in cells]
    if s.workers == 1 or len(jobs) <= 1:
        return [_run_cell_args(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=s.workers) as pool:
        # map preserves submission order, so collection order is canonical
        return list(pool.map(_run_cell_args, jobs, chunksize=1))


def run_scenario(s: Scenario) -> list[RunRecord]:
    s.validate()
    cells = [(seed, count, s.policy) for seed in s.seeds for count in s.mission_counts]
    return _execute(s, cells)


ROW_PREFIX = ("seed", "mission_count_cell", "policy", "solver", "mission_digest", "optimal")


def _record_cells(r: RunRecord) -> list[str]:
    cells, flags = report_row(r.report)
    opt = "" if r.optimal is None else str(r.optimal).lower()
    return [str(r.seed), str(r.mission_count), r.policy.value, r.solver, r.digest, opt, *cells, "|".join(flags)]


def records_to_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*ROW_PREFIX, *METRIC_COLUMNS, "flags"])
    for r in records:
        w.writerow(_record_cells(r))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# BDO vs NoBDO

SUMMARY_METRICS = (
    "blocking_rate", "computation_cost_per_completed", "bandwidth_cost_total",
    "a2g_bandwidth_cost", "total_cost", "duty_endurance_min", "air_service_pairs",
    "offload_ratio_air", "offload_ratio_ground",
    "offload_ratio_air_ds", "offload_ratio_air_ci", "offload_ratio_ground_ds", "offload_ratio_ground_ci",
)


@dataclass(frozen=True)
class CellStat:
    """Mean/stddev over the finite values of one metric in one (count, policy) cell."""

    mean: Optional[float]
    std: Optional[float]
    n: int
    n_undefined: int = 0
    n_unlimited: int = 0

    @property
    def mean_with_unlimited(self) -> Optional[float]:
        """Mean where unlimited values count as +inf."""
        if self.n_unlimited:
            return math.inf
        return self.mean

    @classmethod
    def of(cls, values: Sequence) -> "CellStat":
        undefined = sum(v is None for v in values)
        unlimited = sum(v is not None and math.isinf(v) for v in values)
        finite = [float(v) for v in values if v is not None and not math.isinf(v)]
        if not finite:
            return cls(None, None, 0, undefined, unlimited)
        std = statistics.stdev(finite) if len(finite) > 1 else 0.0
        return cls(statistics.fmean(finite), std, len(finite), undefined, unlimited)


@dataclass(frozen=True)
class PairedRun:
    seed: int
    mission_count: int
    digest: str
    bdo: RunRecord
    nobdo: RunRecord

    def delta(self, metric: str) -> Optional[float]:
        a = metric_value(self.bdo.report, metric)
        b = metric_value(self.nobdo.report, metric)
        if a is None or b is None or math.isinf(a) or math.isinf(b):
            return None
        return a - b


@dataclass(frozen=True)
class ComparisonReport:
    pairs: tuple[PairedRun, ...]
    counts: tuple[int, ...]
    stats: dict  # (count, policy, metric) -> CellStat

    def stat(self, count: int, policy: OffloadPolicy, metric: str) -> CellStat:
        return self.stats[(count, policy, metric)]

    def pooled_offload_ratio(self, policy: OffloadPolicy, origin: str, tag: str) -> Optional[float]:
        """Offloaded / accepted over every run of the sweep for one (origin, class)."""
        off = acc = 0
        for p in self.pairs:
            rec = p.bdo if policy is OffloadPolicy.BDO else p.nobdo
            o, a = rec.report.offload_counts[(origin, tag)]
            off += o
            acc += a
        return off / acc if acc else None


def compare_bdo(s: Scenario) -> ComparisonReport:
    """Run every (seed, count) cell under BDO and NoBDO on identical missions."""
    s.validate()
    cells = [
        (seed, count, policy)
        for seed in s.seeds for count in s.mission_counts for policy in (OffloadPolicy.BDO, OffloadPolicy.NOBDO)
    ]
    records = _execute(s, cells)
    pairs = []
    for i in range(0, len(records), 2):
        b, n = records[i], records[i + 1]
        if b.digest != n.digest:
            raise RuntimeError(f"mission lists differ between policies for seed {b.seed}, count {b.mission_count}")
        pairs.append(PairedRun(b.seed, b.mission_count, b.digest, b, n))
    stats = {}
    for count in s.mission_counts:
        cell = [p for p in pairs if p.mission_count == count]
        for policy in OffloadPolicy:
            for metric in SUMMARY_METRICS:
                vals = [metric_value((p.bdo if policy is OffloadPolicy.BDO else p.nobdo).report, metric) for p in cell]
                stats[(count, policy, metric)] = CellStat.of(vals)
    return ComparisonReport(tuple(pairs), tuple(s.mission_counts), stats)


def comparison_rows_csv(report: ComparisonReport) -> str:
    records = [r for p in report.pairs for r in (p.bdo, p.nobdo)]
    return records_to_csv(records)


def comparison_deltas_csv(report: ComparisonReport) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}/deltas\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "mission_count", "mission_digest", *(f"delta_{m}" for m in SUMMARY_METRICS)])
    for p in report.pairs:
        w.writerow([p.seed, p.mission_count, p.digest, *(fmt_number(p.delta(m)) for m in SUMMARY_METRICS)])
    return buf.getvalue()


def _stat_flags(tag: str, st: CellStat) -> list[str]:
    flags = []
    if st.n_undefined:
        flags.append(f"{tag}:undefined={st.n_undefined}")
    if st.n_unlimited:
        flags.append(f"{tag}:unlimited={st.n_unlimited}")
    return flags


def comparison_summary_csv(report: ComparisonReport) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}/summary\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mission_count", "metric", "bdo_mean", "bdo_std", "bdo_n",
                "nobdo_mean", "nobdo_std", "nobdo_n", "delta_mean", "flags"])
    for count in report.counts:
        for metric in SUMMARY_METRICS:
            b = report.stat(count, OffloadPolicy.BDO, metric)
            n = report.stat(count, OffloadPolicy.NOBDO, metric)
            deltas = [p.delta(metric) for p in report.pairs if p.mission_count == count]
            deltas = [d for d in deltas if d is not None]
            flags = _stat_flags("bdo", b) + _stat_flags("nobdo", n)
            w.writerow([count, metric, fmt_number(b.mean), fmt_number(b.std), b.n,
                        fmt_number(n.mean), fmt_number(n.std), n.n,
                        fmt_number(statistics.fmean(deltas)) if deltas else "", "|".join(flags)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# atomic file emission

PLOT_FILES = {
    "duty_endurance.dat": ("duty_endurance_min", "min air-node duty endurance (h)"),
    "blocking_rate.dat": ("blocking_rate", "blocking rate"),
    "cost_per_completed.dat": ("computation_cost_per_completed", "computation cost per completed mission"),
    "a2g_bandwidth_cost.dat": ("a2g_bandwidth_cost", "A2G bandwidth cost (Mbps*hop)"),
}
MISSING = "-"

_GNUPLOT = """\
# gnuplot -c plots.gp   (run inside this directory)
set terminal pngcairo size 800,560
set datafile missing "{missing}"
set key top left
set xlabel "number of missions"
{plots}
"""


def plot_data(report: ComparisonReport, metric: str, title: str) -> str:
    lines = [f"# {title}", "# missions bdo_mean bdo_std nobdo_mean nobdo_std flags"]
    for count in report.counts:
        b = report.stat(count, OffloadPolicy.BDO, metric)
        n = report.stat(count, OffloadPolicy.NOBDO, metric)
        flags = "|".join(_stat_flags("bdo", b) + _stat_flags("nobdo", n)) or MISSING
        cells = [fmt_number(v) or MISSING for v in (b.mean, b.std, n.mean, n.std)]
        lines.append(" ".join([str(count), *cells, flags]))
    return "\n".join(lines) + "\n"


def gnuplot_script() -> str:
    plots = []
    for fname, (_, title) in PLOT_FILES.items():
        stem = fname[:-4]
        plots.append(
            f'set output "{stem}.png"\nset ylabel "{title}"\n'
            f'plot "{fname}" using 1:2:3 with yerrorlines title "BDO", '
            f'"" using 1:4:5 with yerrorlines title "no BDO"'
        )
    return _GNUPLOT.format(missing=MISSING, plots="\n".join(plots))


def write_atomic(files: dict[str, str], out_dir: str | Path) -> list[Path]:
    """Write every file or none: stage in a temp dir, then rename into place."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    except OSError as exc:
        raise OSError(f"cannot write to {out}: {exc.strerror}") from None
    try:
        for name, text in files.items():
            (stage / name).write_text(text)
        written = []
        for name in files:
            os.replace(stage / name, out / name)
            written.append(out / name)
        return written
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def emit_plot_data(report: ComparisonReport, out_dir: str | Path) -> list[Path]:
    if not report.pairs:
        raise ValueError("comparison report is empty")
    files = {name: plot_data(report, metric, title) for name, (metric, title) in PLOT_FILES.items()}
    files["plots.gp"] = gnuplot_script()
    return write_atomic(files, out_dir)


def emit_comparison(report: ComparisonReport, out_dir: str | Path) -> list[Path]:
    """Paired rows, per-pair deltas, per-count summary, and the plot data."""
    if not report.pairs:
        raise ValueError("comparison report is empty")
    files = {
        "comparison.csv": comparison_rows_csv(report),
        "deltas.csv": comparison_deltas_csv(report),
        "summary.csv": comparison_summary_csv(report),
    }
    files.update({name: plot_data(report, metric, title) for name, (metric, title) in PLOT_FILES.items()})
    files["plots.gp"] = gnuplot_script()
    return write_atomic(files, out_dir)
