"""Average-reward tracking and the scaling metrics.

A run produces a `RunLog`: a series of (timestep, smoothed average reward)
evaluation points plus metadata. The time-to-threshold metric is the earliest
evaluation timestep whose smoothed reward meets the threshold and keeps
meeting it at every later point of the log; the doubling ratio compares that
time across a doubling of the problem size. Per-seed thresholds aggregate by
median, reported with min/max.

Smoothing is a trailing-window arithmetic mean of the per-step rewards,
emitted every `interval` steps (defaults: window 100000, interval 10000); an
exponentially weighted variant is available as an option.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

DEFAULT_WINDOW = 100_000
DEFAULT_INTERVAL = 10_000


def smoothed_average(
    rewards,
    window: int = DEFAULT_WINDOW,
    interval: int = DEFAULT_INTERVAL,
) -> list[tuple[int, float]]:
    """Trailing-window means of a full reward sequence at every interval-th step."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if interval < 1:
        raise ValueError(f"interval must be >= 1, got {interval}")
    rewards = np.asarray(rewards, dtype=np.float64)
    cumulative = np.concatenate([[0.0], np.cumsum(rewards)])
    points = []
    for t in range(interval, len(rewards) + 1, interval):
        lo = max(t - window, 0)
        points.append((t, float((cumulative[t] - cumulative[lo]) / (t - lo))))
    return points


def ewma_average(rewards, decay: float, interval: int = DEFAULT_INTERVAL) -> list[tuple[int, float]]:
    """Exponentially weighted alternative to the trailing window."""
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must be in (0, 1), got {decay}")
    points = []
    value = 0.0
    for t, r in enumerate(rewards, start=1):
        value = decay * value + (1.0 - decay) * r
        if t % interval == 0:
            points.append((t, value))
    return points


class RewardTracker:
    """Streaming trailing-window mean over per-step rewards.

    `add` returns the smoothed value at evaluation points (every `interval`
    steps, averaging the most recent min(t, window) rewards) and None
    otherwise. The buffer is part of run state and survives checkpointing.
    """

    def __init__(self, window: int = DEFAULT_WINDOW, interval: int = DEFAULT_INTERVAL):
        if window < 1 or interval < 1:
            raise ValueError("window and interval must be >= 1")
        self.window = window
        self.interval = interval
        self._buffer = np.zeros(window)
        self._total = 0.0
        self.step = 0

    def add(self, reward: float) -> float | None:
        slot = self.step % self.window
        if self.step >= self.window:
            self._total -= self._buffer[slot]
        self._buffer[slot] = reward
        self._total += reward
        self.step += 1
        if self.step % self.interval == 0:
            return self._total / min(self.step, self.window)
        return None


@dataclass
class RunLog:
    """Evaluation series of one run plus its metadata."""

    meta: dict
    eval_points: list[tuple[int, float]] = field(default_factory=list)

    @property
    def timesteps(self) -> np.ndarray:
        return np.array([t for t, _ in self.eval_points], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.eval_points], dtype=np.float64)

    def final_value(self) -> float | None:
        return self.eval_points[-1][1] if self.eval_points else None


def timesteps_to_threshold(log: RunLog, r_thresh: float) -> int | None:
    """Earliest eval timestep at which the smoothed reward reaches r_thresh and
    stays at or above it for the rest of the log; None if never sustained."""
    points = log.eval_points
    if not points:
        return None
    first = None
    for t, v in reversed(points):
        if v >= r_thresh:
            first = t
        else:
            break
    return first


def doubling_ratio(t_double: int | None, t_base: int | None) -> float | None:
    """t(2n) / t(n); None (divergent) when either threshold was never reached."""
    if t_double is None or t_base is None:
        return None
    if t_base <= 0:
        raise ValueError(f"base time must be positive, got {t_base}")
    return t_double / t_base


def aggregate_thresholds(logs: list[RunLog], r_thresh: float) -> dict:
    """Median/min/max of per-seed times to threshold; unreached seeds count as inf."""
    per_seed = [timesteps_to_threshold(log, r_thresh) for log in logs]
    as_float = [math.inf if t is None else float(t) for t in per_seed]
    med = float(np.median(as_float)) if as_float else math.inf
    return {
        "per_seed": per_seed,
        "median": None if math.isinf(med) else med,
        "min": None if math.isinf(min(as_float)) else min(as_float),
        "max": None if math.isinf(max(as_float)) else max(as_float),
    }


def save_run_log(log: RunLog, directory) -> None:
    """Write log.csv (timestep,avg_reward) and meta.json atomically."""
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, "log.csv")
    meta_path = os.path.join(directory, "meta.json")
    tmp = csv_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("timestep,avg_reward\n")
        for t, v in log.eval_points:
            fh.write(f"{t},{v!r}\n")
    os.replace(tmp, csv_path)
    tmp = meta_path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(log.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, meta_path)


def load_run_log(directory) -> RunLog:
    with open(os.path.join(directory, "meta.json")) as fh:
        meta = json.load(fh)
    points = []
    with open(os.path.join(directory, "log.csv")) as fh:
        header = fh.readline()
        if header.strip() != "timestep,avg_reward":
            raise ValueError(f"unexpected log header: {header!r}")
        for line in fh:
            t, v = line.strip().split(",")
            points.append((int(t), float(v)))
    return RunLog(meta=meta, eval_points=points)


def scaling_summary(logs: list[RunLog], r_thresh: float) -> list[dict]:
    """Group logs by (algorithm, n); report thresholds and doubling ratios.

    The ratio at n compares against the group at n/2 for the same algorithm,
    using median aggregation across seeds.
    """
    groups: dict[tuple[str, int], list[RunLog]] = {}
    for log in logs:
        key = (str(log.meta.get("algorithm")), int(log.meta.get("n")))
        groups.setdefault(key, []).append(log)
    summary = []
    for (algorithm, n), group in sorted(groups.items()):
        agg = aggregate_thresholds(group, r_thresh)
        entry = {
            "algorithm": algorithm,
            "n": n,
            "r_thresh": r_thresh,
            "seeds": [log.meta.get("seed") for log in group],
            "t_threshold": agg,
            "doubling_ratio": None,
        }
        half = groups.get((algorithm, n // 2))
        if n % 2 == 0 and half:
            base = aggregate_thresholds(half, r_thresh)
            if agg["median"] is not None and base["median"] is not None:
                entry["doubling_ratio"] = doubling_ratio(agg["median"], base["median"])
        summary.append(entry)
    return summary
