"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or usage, 3 a checked bound failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis
from .errors import InvalidArgument, ParseError, ReinforceError
from .faults import FaultModel, check, precondition_holds, run_simulation, sample_faults
from .graph import GridSpec, load_network, make_grid, make_path
from .partition import load_partition, validate_partition
from .reinforcement import load_reinforced, metrics
from .routing import make_scheme

log = logging.getLogger("reinforce")

EXIT_INVALID = 2
EXIT_ASSERTION = 3


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _load_config(args) -> analysis.ExperimentConfig:
    if not args.config:
        raise InvalidArgument(f"'{args.command}' needs --config")
    path = Path(args.config)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc.strerror}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data and os.environ.get("REINFORCE_SEED"):
        try:
            data["seed"] = int(os.environ["REINFORCE_SEED"])
        except ValueError:
            raise InvalidArgument("REINFORCE_SEED must be an integer") from None
    return analysis.config_from_dict(data, path.parent)


def cmd_generate(args) -> int:
    if args.config:
        net = _load_config(args).build_network()
    elif args.topology == "path":
        net = make_path(args.n)
    elif args.topology == "grid":
        net = make_grid(GridSpec(args.q, args.d, args.wrap))
    else:
        raise InvalidArgument("generate needs --config or --topology")
    _emit(json.dumps(net.to_dict()) + "\n", args.out)
    return 0


def cmd_partition(args) -> int:
    if args.network:
        net = load_network(args.network)
        if not args.partition:
            raise InvalidArgument("--network needs --partition FILE to validate")
        part = load_partition(args.partition)
    else:
        cfg = _load_config(args)
        net = cfg.build_network()
        part = cfg.build_partition(net)
        if part is None:
            raise InvalidArgument("config has no 'partition' entry")
    stats = validate_partition(net, part)
    if args.out:
        Path(args.out).write_text(json.dumps(part.to_dict()) + "\n")
    sys.stdout.write(_dump(stats.to_dict()))
    return 0


def cmd_reinforce(args) -> int:
    rn = _load_config(args).build_reinforced()
    _emit(json.dumps(rn.to_dict()) + "\n", args.out)
    return 0


def cmd_metrics(args) -> int:
    rn = load_reinforced(args.file)
    m = metrics(rn)
    row = {"mode": rn.mode.value, "f": rn.f, "ell": rn.ell, **m.to_dict()}
    row["eta_exact"] = None if m.eta is None else str(m.eta)
    if args.format == "csv":
        keys = ["mode", "f", "ell", "nu", "eta", "eps_hat"]
        text = ",".join(keys) + "\n" + ",".join("" if row[k] is None else str(row[k]) for k in keys) + "\n"
    else:
        text = _dump(row)
    _emit(text, args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    runner = analysis.TrialRunner(cfg)
    p = args.p if args.p is not None else cfg.p_grid[0]
    rn = runner.rn
    faults = sample_faults(rn, FaultModel(rn.mode.kind, p), analysis.derive_rng(cfg.seed, "faults", "single", args.trial))
    adv = runner.adv.create(analysis.derive_rng(cfg.seed, "adv", "single", args.trial))
    sim = run_simulation(rn, runner.scheme, runner.env, cfg.seed, faults, adv, record=True)
    verdict = check(sim, runner.ref, rn)
    trace = {
        "p": p,
        "trial": args.trial,
        "mode": rn.mode.value,
        "f": rn.f,
        "faulty": [list(c) for c in faults],
        "precond": precondition_holds(rn, faults),
        "verdict": verdict.to_dict(),
        "reference": [[repr(s) for s in states] for states in runner.ref.states],
        "rounds": [
            {
                "round": r,
                "states": [repr(s) for s in states],
                "know": list(sim.know[r]) if sim.know is not None else None,
            }
            for r, states in enumerate(sim.states)
        ],
        "decodes": [
            {
                "round": d.round,
                "copy": list(rn.copy_id(d.copy)),
                "from": d.sender,
                "received": [repr(m) for m in d.received],
                "decoded": repr(d.decoded),
                "failure": d.failure,
            }
            for d in sim.decodes
        ],
    }
    _emit(_dump(trace), args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    records: list[dict] = []
    rows = analysis.monte_carlo(cfg, threads=args.threads, records=records)
    out = args.out or cfg.outputs.get("rows")
    if out and not args.out:
        out = str(cfg.path(out))
    if args.format == "json":
        text = _dump([r.to_dict() for r in rows])
    else:
        text = analysis.rows_to_csv(rows)
    trials_out = args.trials_out or cfg.outputs.get("trials")
    if trials_out:
        path = Path(trials_out) if args.trials_out else cfg.path(trials_out)
        path.write_text("".join(json.dumps(r) + "\n" for r in records))
    _emit(text, out)
    return 0


def cmd_enumerate(args) -> int:
    cfg = _load_config(args)
    rn = cfg.build_reinforced()
    scheme = make_scheme(cfg.scheme, cfg.grid_spec())
    env = cfg.build_env(rn.original)
    counts = analysis.ok_counts_by_size(rn, scheme, env, cfg.adversary_spec(), seed=cfg.seed)
    rows = [
        {
            "p": p,
            "ok_exact": analysis.probability_from_counts(counts, p),
            "precond_exact": analysis.exact_precondition_probability(rn, p),
        }
        for p in cfg.p_grid
    ]
    if args.format == "json":
        text = _dump(rows)
    else:
        text = "p,ok_exact,precond_exact\n" + "".join(
            f"{r['p']!r},{r['ok_exact']!r},{r['precond_exact']!r}\n" for r in rows
        )
    _emit(text, args.out)
    return 0


def cmd_toy(args) -> int:
    seed = args.seed if args.seed is not None else int(os.environ.get("REINFORCE_SEED", 0))
    report = analysis.toy_bound_experiment(args.n, args.h, args.p, args.trials, seed)
    result = report.to_dict()
    if args.baseline:
        baseline = analysis.toy_delivery(args.n, None, args.p, args.trials, seed)
        result["baseline_rate"] = baseline / args.trials if args.trials else 1.0
    _emit(_dump(result), args.out)
    if not report.passes:
        log.error("empirical delivery rate %.6f is below a lower bound by more than 3 sigma", report.rate)
        return EXIT_ASSERTION
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int, help="master seed (overrides config and REINFORCE_SEED)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes; results do not depend on it")

    parser = argparse.ArgumentParser(prog="reinforce", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a path or grid network")
    p.add_argument("--topology", choices=("path", "grid"))
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--wrap", action="store_true", help="torus instead of grid")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("partition", parents=[common], help="build or validate a partition")
    p.add_argument("--network", help="graph JSON to validate an external partition against")
    p.add_argument("--partition", help="partition JSON to validate")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("reinforce", parents=[common], help="build the reinforced network")
    p.set_defaults(func=cmd_reinforce)

    p = sub.add_parser("metrics", parents=[common], help="print nu and eta of a reinforced network")
    p.add_argument("file")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", parents=[common], help="one trial with a full trace dump")
    p.add_argument("--p", type=float)
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep over the p grid")
    p.add_argument("--trials-out", help="JSON-lines per-trial log")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("enumerate", parents=[common], help="exact probabilities by enumerating fault sets")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("toy", parents=[common], help="segmented-path delivery experiment")
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--p", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--baseline", action="store_true", help="also run two disjoint path copies")
    p.set_defaults(func=cmd_toy)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except ReinforceError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except (KeyError, TypeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    except OSError as exc:
        log.error("%s: %s", exc.filename or "", exc.strerror)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
