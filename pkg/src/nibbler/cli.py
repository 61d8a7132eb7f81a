"""Command-line front end.

Subcommands:
  run      one experiment (algorithm x environment x seeds), logs to --outdir
  sweep    cartesian grid of runs, summary JSON/CSV
  metrics  time-to-threshold and doubling ratios from saved run logs
  oracle   brute-force single-board validator (exact vs simulated reward)
  dump     trajectory dump of an environment for golden tests

Flags mirror the experiment config fields; a JSON --config file, when given,
overrides flags. Exit codes: 0 success, 2 validation error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    AlgorithmSpec,
    DivergenceError,
    EnvSpec,
    ExperimentConfig,
    run_experiment,
    run_single,
    run_sweep,
    save_sweep_summary,
)
from .metrics import load_run_log, scaling_summary
from .multicatch import BoardConfig, dump_trajectory, env_from_config, load_env_config
from .oracle import simulate_average_reward, stationary_analysis

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3

ENV_OVERRIDE_KEYS = ("p_arrival", "p_reward", "paddle_noise", "num_rows", "num_cols", "p_hot")
ALGO_OVERRIDE_KEYS = ("h", "g", "d", "kappa", "alpha", "hidden_dim")


def _add_env_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--num-parallel", type=int, default=2, help="number of catch boards")
    parser.add_argument("--heterogeneous", action="store_true")
    parser.add_argument("--p-arrival", type=float, default=None)
    parser.add_argument("--p-reward", type=float, default=None)
    parser.add_argument("--paddle-noise", type=float, default=None)
    parser.add_argument("--num-rows", type=int, default=None)
    parser.add_argument("--num-cols", type=int, default=None)
    parser.add_argument("--p-hot", type=float, default=None)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    _add_env_flags(parser)
    parser.add_argument("--algorithm", choices=("nibbler", "q", "qv"), default="nibbler")
    parser.add_argument("--steps", type=int, default=1_000_000)
    parser.add_argument("--seeds", type=str, default="0", help="comma-separated seed list")
    parser.add_argument("--window", type=int, default=100_000)
    parser.add_argument("--interval", type=int, default=10_000)
    parser.add_argument("--r-thresh", type=float, default=0.0)
    parser.add_argument("--outdir", type=str, default=None)
    parser.add_argument("--checkpoint-every", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--stop-threshold", type=float, default=None)
    parser.add_argument("--sustain-margin", type=int, default=500_000)
    parser.add_argument("--no-selection-log", action="store_true")
    for key in ALGO_OVERRIDE_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", type=float, default=None,
                            dest=f"algo_{key}")
    parser.add_argument("--config", type=str, default=None,
                        help="JSON experiment config; overrides the flags above")


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    env_overrides = {}
    for key in ENV_OVERRIDE_KEYS:
        value = getattr(args, key.replace("-", "_"))
        if value is not None:
            env_overrides[key] = int(value) if key.startswith("num_") else value
    algo_overrides = {}
    for key in ALGO_OVERRIDE_KEYS:
        value = getattr(args, f"algo_{key}")
        if value is not None:
            algo_overrides[key] = int(value) if key in ("h", "g", "d", "hidden_dim") else value
    cfg = ExperimentConfig(
        env=EnvSpec(
            num_parallel=args.num_parallel,
            heterogeneous=args.heterogeneous,
            overrides=env_overrides,
        ),
        algorithm=AlgorithmSpec(name=args.algorithm, overrides=algo_overrides),
        total_steps=args.steps,
        seeds=tuple(int(s) for s in args.seeds.split(",") if s != ""),
        window=args.window,
        interval=args.interval,
        r_thresh=args.r_thresh,
        outdir=args.outdir,
        checkpoint_every=args.checkpoint_every,
        log_selection=not args.no_selection_log,
        stop_threshold=args.stop_threshold,
        sustain_margin=args.sustain_margin,
    )
    if args.config is not None:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = _merge_config_file(cfg, raw)
    return cfg


def _merge_config_file(cfg: ExperimentConfig, raw: dict) -> ExperimentConfig:
    from dataclasses import replace

    env_raw = dict(raw.get("env", {}))
    if env_raw:
        n = int(env_raw.pop("num_parallel", cfg.env.num_parallel))
        het = bool(env_raw.pop("heterogeneous", cfg.env.heterogeneous))
        overrides = {**cfg.env.overrides, **env_raw.pop("overrides", {}), **env_raw}
        cfg = replace(cfg, env=EnvSpec(num_parallel=n, heterogeneous=het, overrides=overrides))
    algo_raw = dict(raw.get("algorithm", {}))
    if algo_raw:
        name = algo_raw.pop("name", cfg.algorithm.name)
        overrides = {**cfg.algorithm.overrides, **algo_raw.pop("overrides", {}), **algo_raw}
        cfg = replace(cfg, algorithm=AlgorithmSpec(name=name, overrides=overrides))
    scalar_keys = (
        "total_steps", "window", "interval", "r_thresh", "outdir",
        "checkpoint_every", "log_selection", "stop_threshold", "sustain_margin",
    )
    updates = {k: raw[k] for k in scalar_keys if k in raw}
    if "seeds" in raw:
        updates["seeds"] = tuple(int(s) for s in raw["seeds"])
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.resume is not None:
        try:
            log = run_single(cfg, cfg.seeds[0], resume_from=args.resume)
            logs = [log]
        except DivergenceError as exc:
            logs = [exc.log]
    else:
        logs = run_experiment(cfg, max_workers=args.workers)
    diverged = False
    for log in logs:
        meta = log.meta
        final = log.final_value()
        print(f"seed {meta['seed']}: {len(log.eval_points)} eval points, final {final}, "
              f"diverged {meta['diverged']}")
        diverged = diverged or meta["diverged"]
    return EXIT_DIVERGENCE if diverged else EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    with open(args.grid) as fh:
        grid = json.load(fh)
    try:
        cfg.validate()
        results = run_sweep(cfg, grid, max_workers=args.workers)
    except ValueError as exc:
        print(f"invalid sweep: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.outdir is not None:
        save_sweep_summary(results, args.outdir)
    print(json.dumps(results, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    logs = []
    for directory in args.logs:
        try:
            logs.append(load_run_log(directory))
        except (OSError, ValueError) as exc:
            print(f"cannot load {directory}: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
    summary = scaling_summary(logs, args.r_thresh)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _board_config_from_args(args: argparse.Namespace) -> BoardConfig:
    fields = {}
    for key in ("p_arrival", "p_reward", "paddle_noise", "num_rows", "num_cols", "p_hot"):
        value = getattr(args, key)
        if value is not None:
            fields[key] = int(value) if key.startswith("num_") else value
    return BoardConfig(**fields)


def _cmd_oracle(args: argparse.Namespace) -> int:
    try:
        config = _board_config_from_args(args)
    except ValueError as exc:
        print(f"invalid board config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    analysis = stationary_analysis(config)
    simulated, se = simulate_average_reward(config, args.steps, args.seed)
    gap = abs(simulated - analysis.average_reward)
    print(f"exact average reward     {analysis.average_reward:+.6f}")
    print(f"simulated ({args.steps} steps) {simulated:+.6f}  (batch-means se {se:.6f})")
    print(f"|gap| = {gap:.6f} = {gap / se if se > 0 else float('inf'):.2f} se")
    return EXIT_OK


def _cmd_dump(args: argparse.Namespace) -> int:
    try:
        if args.env_config is not None:
            config = load_env_config(args.env_config)
            env = env_from_config(config, seed=args.seed)
        else:
            config = {"num_parallel": args.num_parallel, "heterogeneous": args.heterogeneous}
            for key in ENV_OVERRIDE_KEYS:
                value = getattr(args, key.replace("-", "_"))
                if value is not None:
                    config[key] = int(value) if key.startswith("num_") else value
            env = env_from_config(config, seed=args.seed)
    except ValueError as exc:
        print(f"invalid environment config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = sys.stdout if args.out == "-" else open(args.out, "w")
    try:
        dump_trajectory(env, args.steps, out, policy_seed=args.policy_seed)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nibbler", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment across seeds")
    _add_run_flags(p_run)
    p_run.add_argument("--resume", type=str, default=None, help="checkpoint file to resume")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--grid", type=str, required=True,
                         help="JSON file mapping sweep keys to value lists")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_metrics = sub.add_parser("metrics", help="compute scaling metrics from run logs")
    p_metrics.add_argument("logs", nargs="+", help="run directories (log.csv + meta.json)")
    p_metrics.add_argument("--r-thresh", type=float, default=0.0)
    p_metrics.set_defaults(func=_cmd_metrics)

    p_oracle = sub.add_parser("oracle", help="validate one board against the exact chain")
    _add_env_flags(p_oracle)
    p_oracle.add_argument("--steps", type=int, default=1_000_000)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_dump = sub.add_parser("dump", help="dump a trajectory as (t, action, reward, bits) lines")
    _add_env_flags(p_dump)
    p_dump.add_argument("--env-config", type=str, default=None, help="JSON environment config")
    p_dump.add_argument("--steps", type=int, default=100)
    p_dump.add_argument("--seed", type=int, default=0)
    p_dump.add_argument("--policy-seed", type=int, default=0)
    p_dump.add_argument("--out", type=str, default="-")
    p_dump.set_defaults(func=_cmd_dump)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
