"""Experiment driver: seed fan-out, sweeps, logging, checkpointing.

A run is a pure function of (config, seed): the master seed splits into an
environment seed and an agent seed, the agent-environment loop executes
total_steps, and the smoothed average reward is recorded every `interval`
steps into a RunLog written atomically as log.csv + meta.json under a
directory named by the config hash and seed. Runs whose weights go non-finite
abort with a divergence marker in the metadata. Independent seeds can run on
a bounded process pool; within a run execution is serial.

Checkpoints are pickle files of a documented dict ({"version", "step",
"reward", "observation", "env", "agent", "tracker", "eval_points",
"selection_history"}); resuming from one reproduces the uninterrupted run
bit for bit because all randomness lives in the pickled generator states.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .agent import NibblerAgent, default_config
from .baselines import BaselineAgent, BaselineConfig
from .metrics import (
    DEFAULT_INTERVAL,
    DEFAULT_WINDOW,
    RewardTracker,
    RunLog,
    aggregate_thresholds,
    save_run_log,
    timesteps_to_threshold,
)
from .multicatch import env_from_config, make_heterogeneous, make_multicatch
from .seeding import derive_seed

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
ALGORITHMS = ("nibbler", "q", "qv")


@dataclass(frozen=True)
class EnvSpec:
    num_parallel: int = 2
    heterogeneous: bool = False
    overrides: dict = field(default_factory=dict)  # per-board BoardConfig fields

    def validate(self):
        if self.num_parallel < 1:
            raise ValueError(f"env.num_parallel must be >= 1, got {self.num_parallel}")
        if self.heterogeneous and self.overrides:
            raise ValueError("env.overrides cannot be combined with heterogeneous=True")


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str = "nibbler"
    overrides: dict = field(default_factory=dict)  # NibblerConfig / BaselineConfig fields

    def validate(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"algorithm.name must be one of {ALGORITHMS}, got {self.name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    algorithm: AlgorithmSpec = field(default_factory=AlgorithmSpec)
    total_steps: int = 1_000_000
    seeds: tuple = (0,)
    window: int = DEFAULT_WINDOW
    interval: int = DEFAULT_INTERVAL
    r_thresh: float = 0.0
    outdir: str | None = None
    checkpoint_every: int = 0
    log_selection: bool = True
    # optional early stop: end the run sustain_margin steps after the smoothed
    # reward first reaches stop_threshold, once it has stayed there throughout
    # the margin (truncates the log; off by default)
    stop_threshold: float | None = None
    sustain_margin: int = 500_000

    def validate(self):
        self.env.validate()
        self.algorithm.validate()
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.total_steps < self.window:
            raise ValueError(
                f"total_steps ({self.total_steps}) must be >= window ({self.window})"
            )
        if self.interval < 1 or self.window < 1:
            raise ValueError("window and interval must be >= 1")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of everything that shapes a run except the seed list and output paths."""
    payload = asdict(cfg)
    payload.pop("seeds")
    payload.pop("outdir")
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def run_directory(cfg: ExperimentConfig, seed: int) -> str | None:
    if cfg.outdir is None:
        return None
    return os.path.join(cfg.outdir, f"{config_hash(cfg)}_seed{seed}")


def build_env(cfg: ExperimentConfig, seed: int):
    env_seed = derive_seed(seed, "env")
    if cfg.env.heterogeneous:
        return make_heterogeneous(cfg.env.num_parallel, seed=env_seed)
    return make_multicatch(cfg.env.num_parallel, seed=env_seed, **cfg.env.overrides)


def build_agent(cfg: ExperimentConfig, seed: int, env):
    agent_seed = derive_seed(seed, "agent")
    name = cfg.algorithm.name
    if name == "nibbler":
        agent_config = default_config(
            cfg.env.num_parallel, env.num_bits, **cfg.algorithm.overrides
        )
        return NibblerAgent(env.num_bits, env.num_actions, agent_config, seed=agent_seed)
    baseline_config = BaselineConfig(variant=name, **cfg.algorithm.overrides)
    return BaselineAgent(env.num_bits, env.num_actions, baseline_config, seed=agent_seed)


class DivergenceError(RuntimeError):
    """A run produced non-finite weights; carries the partial (marked) log."""

    def __init__(self, message: str, log: RunLog | None = None):
        super().__init__(message)
        self.log = log


def _base_meta(cfg: ExperimentConfig, seed: int) -> dict:
    return {
        "n": cfg.env.num_parallel,
        "algorithm": cfg.algorithm.name,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "window": cfg.window,
        "interval": cfg.interval,
        "total_steps": cfg.total_steps,
        "heterogeneous": cfg.env.heterogeneous,
        "env_overrides": dict(cfg.env.overrides),
        "algorithm_overrides": dict(cfg.algorithm.overrides),
        "diverged": False,
        "stopped_early_at": None,
    }


def save_checkpoint(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        pickle.dump(payload, fh, protocol=pickle.HIGHEST_PROTOCOL)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> dict:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('version')}")
    return payload


def run_single(cfg: ExperimentConfig, seed: int, resume_from: str | None = None) -> RunLog:
    """One seeded run; raises DivergenceError (after writing the log) on blow-up."""
    cfg.validate()
    rundir = run_directory(cfg, seed)
    if rundir is not None:
        os.makedirs(rundir, exist_ok=True)

    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        step = payload["step"]
        reward = payload["reward"]
        observation = payload["observation"]
        env = payload["env"]
        agent = payload["agent"]
        tracker = payload["tracker"]
        eval_points = payload["eval_points"]
        selection_history = payload["selection_history"]
    else:
        env = build_env(cfg, seed)
        agent = build_agent(cfg, seed, env)
        step = 0
        reward = 0.0
        observation = env.observe()
        tracker = RewardTracker(cfg.window, cfg.interval)
        eval_points: list[tuple[int, float]] = []
        selection_history: list[dict] = []

    meta = _base_meta(cfg, seed)
    diverged = False
    sustained_since: int | None = None
    if resume_from is not None and cfg.stop_threshold is not None:
        # rebuild the early-stop state from the trailing run of eval points
        for t, v in reversed(eval_points):
            if v >= cfg.stop_threshold:
                sustained_since = t
            else:
                break

    while step < cfg.total_steps:
        action = agent.step(reward, observation)
        reward, observation = env.step(action)
        step += 1
        value = tracker.add(reward)
        if value is not None:
            eval_points.append((step, value))
            if not agent.weights_finite():
                diverged = True
                break
            if cfg.log_selection and isinstance(agent, NibblerAgent):
                entry = {"t": step, "C_L": agent.cumulant_state.indices.tolist()}
                entry["K_L"] = agent.input_indices.tolist()
                selection_history.append(entry)
            if cfg.stop_threshold is not None:
                if value >= cfg.stop_threshold:
                    if sustained_since is None:
                        sustained_since = step
                    elif step - sustained_since >= cfg.sustain_margin:
                        meta["stopped_early_at"] = step
                        break
                else:
                    sustained_since = None
        if (
            cfg.checkpoint_every
            and rundir is not None
            and step % cfg.checkpoint_every == 0
            and step < cfg.total_steps
        ):
            save_checkpoint(
                os.path.join(rundir, "checkpoint.pkl"),
                {
                    "version": CHECKPOINT_VERSION,
                    "step": step,
                    "reward": reward,
                    "observation": observation,
                    "env": env,
                    "agent": agent,
                    "tracker": tracker,
                    "eval_points": eval_points,
                    "selection_history": selection_history,
                },
            )

    meta["diverged"] = diverged
    if cfg.log_selection and isinstance(agent, NibblerAgent):
        meta["selection_history"] = selection_history
    log = RunLog(meta=meta, eval_points=eval_points)
    if rundir is not None:
        save_run_log(log, rundir)
    if diverged:
        raise DivergenceError(
            f"seed {seed} produced non-finite weights at step {step}", log=log
        )
    return log


def _run_single_entry(args) -> RunLog:
    cfg, seed = args
    try:
        return run_single(cfg, seed)
    except DivergenceError as exc:
        return exc.log


def run_experiment(cfg: ExperimentConfig, max_workers: int = 1) -> list[RunLog]:
    """All seeds of one config; divergent seeds yield their (marked) partial log."""
    cfg.validate()
    jobs = [(cfg, seed) for seed in cfg.seeds]
    if max_workers <= 1 or len(jobs) == 1:
        logs = [_run_single_entry(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            logs = list(pool.map(_run_single_entry, jobs))
    return logs


SWEEP_KEYS = {
    "n": ("env", "num_parallel"),
    "h": ("algorithm", "h"),
    "g": ("algorithm", "g"),
    "d": ("algorithm", "d"),
    "hidden_dim": ("algorithm", "hidden_dim"),
    "alpha": ("algorithm", "alpha"),
    "kappa": ("algorithm", "kappa"),
}


def apply_cell(cfg: ExperimentConfig, cell: dict) -> ExperimentConfig:
    """Derive the config of one sweep cell from a base config."""
    env_spec, algo_spec = cfg.env, cfg.algorithm
    for key, value in cell.items():
        if key not in SWEEP_KEYS:
            raise ValueError(f"unknown sweep key {key!r}; known: {sorted(SWEEP_KEYS)}")
        target, fieldname = SWEEP_KEYS[key]
        if target == "env":
            env_spec = replace(env_spec, **{fieldname: value})
        else:
            algo_spec = replace(
                algo_spec, overrides={**algo_spec.overrides, fieldname: value}
            )
    return replace(cfg, env=env_spec, algorithm=algo_spec)


def summarize_cell(logs: list[RunLog], r_thresh: float) -> dict:
    agg = aggregate_thresholds(logs, r_thresh)
    finals = [log.final_value() for log in logs]
    return {
        "t_threshold": agg,
        "per_seed_t": agg["per_seed"],
        "final_reward": finals,
        "diverged": [bool(log.meta.get("diverged")) for log in logs],
    }


def run_sweep(cfg: ExperimentConfig, grid: dict[str, list], max_workers: int = 1) -> list[dict]:
    """Cartesian sweep over the grid; each cell records thresholds and finals.

    Failed cells are marked and the sweep continues. The summary is fully
    reconstructible from the per-run logs via `summarize_cell`.
    """
    if not grid:
        raise ValueError("sweep grid must be nonempty")
    keys = sorted(grid)
    cells = [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]
    results = []
    for cell in cells:
        cell_cfg = apply_cell(cfg, cell)
        entry = {"cell": cell, "config_hash": config_hash(cell_cfg)}
        try:
            logs = run_experiment(cell_cfg, max_workers=max_workers)
            entry.update(summarize_cell(logs, cell_cfg.r_thresh))
            entry["error"] = None
        except Exception as exc:  # cell failures must not kill the sweep
            logger.exception("sweep cell %s failed", cell)
            entry["error"] = f"{type(exc).__name__}: {exc}"
        results.append(entry)
    return results


def save_sweep_summary(results: list[dict], outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "sweep.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    csv_path = os.path.join(outdir, "sweep.csv")
    tmp = csv_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("cell,median_t_threshold,final_reward,error\n")
        for entry in results:
            cell = json.dumps(entry["cell"], sort_keys=True).replace(",", ";")
            med = entry.get("t_threshold", {}).get("median")
            finals = entry.get("final_reward")
            fh.write(f"{cell},{med},{json.dumps(finals).replace(',', ';')},{entry['error']}\n")
    os.replace(tmp, csv_path)
