"""Command line front end.

Exit codes: 0 on success, 2 on configuration problems (bad flags,
unreadable files, invalid models), 3 when a simulation batch finishes
with zero successful trials.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import graph as graphmod
from .graph import build_graph, enumerate_paths, optimal_path
from .model import ModelError, generate_palletization, parse_model
from .sim import (
    ConfigError,
    EngineError,
    SimConfig,
    Simulator,
    build_policy,
    export_results,
    load_scenario,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _load_model(path: str):
    try:
        with open(path) as fh:
            return parse_model(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read model {path}: {e}") from e
    except ModelError as e:
        raise ConfigError(f"invalid model {path}: {e}") from e


def _compile(spec):
    try:
        g = build_graph(spec)
        enumerate_paths(g)
        return g
    except graphmod.GraphError as e:
        raise ConfigError(f"cannot build graph: {e}") from e


def cmd_enumerate(args) -> int:
    g = _compile(_load_model(args.model))
    paths = g.paths or []
    print(f"{len(paths)} paths")
    limit = args.limit if args.limit else len(paths)
    for p in paths[:limit]:
        print(f"{p.cost!r}\t{','.join(p.path_arcs)}")
    if limit < len(paths):
        print(f"... {len(paths) - limit} more")
    return EXIT_OK


def cmd_optimal(args) -> int:
    g = _compile(_load_model(args.model))
    try:
        sel = optimal_path(g)
    except graphmod.NoViablePathError as e:
        raise ConfigError(str(e)) from e
    print(f"cost {sel.path.cost!r}")
    print("arcs " + ",".join(sel.path.path_arcs))
    for arc, action in sel.pending:
        print(f"  {arc}\t{action.name}\t{action.agent}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.scenario:
        config = load_scenario(args.scenario)
        if args.trials is not None:
            config.trials = args.trials
        if args.seed is not None:
            config.seed = args.seed
        if args.timeout is not None:
            config.timeout_s = args.timeout
        if args.policy is not None:
            config.policy = build_policy(args.policy)
    else:
        if bool(args.model) == bool(args.palletize):
            raise ConfigError("pass exactly one of --model or --palletize")
        if args.model:
            spec = _load_model(args.model)
        else:
            try:
                spec = generate_palletization(args.palletize)
            except ModelError as e:
                raise ConfigError(str(e)) from e
        config = SimConfig(
            model=spec,
            policy=build_policy(args.policy or "compliant"),
            trials=args.trials if args.trials is not None else 1,
            seed=args.seed if args.seed is not None else 0,
            timeout_s=args.timeout if args.timeout is not None else 120.0,
        )
    summary = Simulator(config).run_batch()
    if args.out:
        export_results(summary, args.out)

    n = len(summary.results)
    ok = len(summary.successes)
    print(f"trials {n} succeeded {ok} success-rate {summary.success_rate:.3f}")
    if summary.failure_counts:
        reasons = ", ".join(f"{k}={v}" for k, v in sorted(summary.failure_counts.items()))
        print(f"failures: {reasons}")
    if ok:
        print(f"T_m mean {summary.t_m.mean:.6f} s")
        print(f"T_h mean {summary.t_h.mean:.6f} s")
        print(f"T_r mean {summary.t_r.mean:.6f} s")
        print(f"T_c mean {summary.t_c.mean:.6f} s")
        print(
            "split m/h/r "
            f"{100 * summary.share_m:.2f}/{100 * summary.share_h:.2f}/{100 * summary.share_r:.2f} %"
        )
    return EXIT_OK if ok else EXIT_ALL_FAILED


def cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import create_app

    port = args.port
    if port is None:
        port = int(os.environ.get("COPLAN_PORT", "8000"))
    uvicorn.run(create_app(), host=args.host, port=port, log_level="warning")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="coplan",
        description="cooperation planning: enumerate paths, pick optima, simulate, serve",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="list every cooperation path of a model")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--limit", type=int, default=0, help="print at most N paths (0 = all)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("optimal", help="show the current optimal path of a model")
    p.add_argument("--model", required=True, help="model file")
    p.set_defaults(func=cmd_optimal)

    p = sub.add_parser("simulate", help="run simulated cooperation trials")
    p.add_argument("--scenario", help="scenario file (full configuration)")
    p.add_argument("--model", help="model file")
    p.add_argument("--palletize", type=int, metavar="K", help="generate a K-part palletization model")
    p.add_argument("--policy", help="compliant | intervene:P | script:FILE")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--timeout", type=float, help="human response timeout in seconds")
    p.add_argument("--out", help="write per-trial results (.csv or .jsonl)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="serve live cooperation sessions")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EngineError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
