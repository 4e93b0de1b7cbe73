"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 exact solver stopped at its expansion budget.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError
from .harness import (
    Scenario,
    compare_bdo,
    emit_comparison,
    load_scenario,
    parse_sweep,
    records_to_csv,
    make_record,
    run_scenario,
    scenario_missions,
    scenario_network,
    solve,
    write_atomic,
)
from .missions import missions_to_csv
from .network import load_network, save_network
from .solvers import OffloadPolicy

log = logging.getLogger("sagin_bdo")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_BUDGET = 0, 1, 2, 3


def _scenario(args) -> Scenario:
    return load_scenario(args.config) if getattr(args, "config", None) else Scenario()


def cmd_topology_validate(args) -> int:
    net = load_network(args.file)
    kinds = {}
    for ln in net.links:
        kinds[ln.kind.value] = kinds.get(ln.kind.value, 0) + 1
    print(f"ok: {len(net.nodes)} nodes ({len(net.air_nodes)} air, {len(net.ground_nodes)} ground), "
          f"{len(net.links)} links {dict(sorted(kinds.items()))}")
    return EXIT_OK


def cmd_topology_export(args) -> int:
    s = _scenario(args)
    save_network(scenario_network(s, args.seed), args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    s = _scenario(args)
    net = scenario_network(s, args.seed)
    missions = scenario_missions(s, net, args.seed, args.missions)
    text = missions_to_csv(missions)
    if args.out:
        write_atomic({Path(args.out).name: text}, Path(args.out).parent)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_solve(args) -> int:
    s = _scenario(args)
    s = replace(s, policy=OffloadPolicy(args.policy), solver=args.solver,
                seeds=(args.seed,), mission_counts=(args.missions,))
    s.validate()
    net = scenario_network(s, args.seed)
    missions = scenario_missions(s, net, args.seed, args.missions)
    out = solve(s, missions, net, s.policy)
    for r in out.results:
        if r.accepted:
            e = r.embedding
            print(f"mission {r.mission_id}: accepted route={'-'.join(map(str, e.route.nodes))} "
                  f"placement={','.join(map(str, e.placement))} cost={e.cost.total:.3f}")
        else:
            print(f"mission {r.mission_id}: blocked ({r.reason})")
    record = make_record(s, args.seed, s.policy, missions, net, out)
    sys.stdout.write(records_to_csv([record]))
    if out.budget_exhausted:
        log.error("exact solver hit its expansion budget; result is the incumbent, not proven optimal")
        return EXIT_BUDGET
    return EXIT_OK


def cmd_run(args) -> int:
    s = _scenario(args)
    if args.workers:
        s = replace(s, workers=args.workers)
    text = records_to_csv(run_scenario(s))
    if args.out:
        write_atomic({Path(args.out).name: text}, Path(args.out).parent)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    s = load_scenario(args.scenario)
    if args.workers:
        s = replace(s, workers=args.workers)
    report = compare_bdo(s)
    for p in emit_comparison(report, args.out_dir):
        log.info("wrote %s", p)
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _scenario(args)
    s = replace(s, mission_counts=parse_sweep(args.missions), seeds=tuple(range(args.seeds)),
                solver=args.solver)
    if args.workers:
        s = replace(s, workers=args.workers)
    report = compare_bdo(s)
    for p in emit_comparison(report, args.out_dir):
        log.info("wrote %s", p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sagin-bdo", description="Bi-directional mission offloading simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    topo = sub.add_parser("topology", help="topology file utilities")
    tsub = topo.add_subparsers(dest="topology_command", required=True)
    tv = tsub.add_parser("validate", help="check a topology file")
    tv.add_argument("file")
    tv.set_defaults(func=cmd_topology_validate)
    te = tsub.add_parser("export", help="write the built-in network for a seed as a topology file")
    te.add_argument("--seed", type=int, default=0)
    te.add_argument("--config")
    te.add_argument("--out", required=True)
    te.set_defaults(func=cmd_topology_export)

    g = sub.add_parser("generate", help="generate a mission list as CSV")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--missions", type=int, required=True)
    g.add_argument("--config")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one (seed, mission count) cell")
    s.add_argument("--policy", choices=[x.value for x in OffloadPolicy], default="bdo")
    s.add_argument("--solver", choices=["greedy", "greedy-ls", "exact"], default="greedy")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--missions", type=int, required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("run", help="run a scenario under its configured policy")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="BDO vs NoBDO for a scenario file")
    c.add_argument("--scenario", required=True)
    c.add_argument("--out-dir", required=True)
    c.add_argument("--workers", type=int)
    c.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="BDO vs NoBDO over a mission-count sweep")
    sw.add_argument("--missions", default="10:40:5", help="A:B:S, inclusive")
    sw.add_argument("--seeds", type=int, default=20)
    sw.add_argument("--solver", choices=["greedy", "greedy-ls", "exact"], default="greedy")
    sw.add_argument("--config")
    sw.add_argument("--out-dir", required=True)
    sw.add_argument("--workers", type=int)
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
