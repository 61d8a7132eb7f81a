"""Brute-force validators for a single catch board.

Enumerates the explicit latent state space of one board, builds the exact
transition matrix under a fixed (default uniform) action distribution, and
computes the stationary average reward by power iteration. This is an
independent derivation from the sampled state machine in `multicatch` and is
used to validate it: `simulate_average_reward` runs the real machine under a
uniform-random policy and reports a batch-means standard error for the
comparison.

Under a state-independent random policy the paddle's move is distributed as
paddle_noise/3 + (1-paddle_noise)*pi over {left, stay, right}, clipped at the
edges; for the uniform policy this is uniform over the three moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .multicatch import BoardConfig, Phase, board_step, initial_board_state
from .seeding import derive_rng


def enumerate_states(config: BoardConfig) -> list[tuple]:
    """All (phase, row, ball_col, paddle_col, hot) tuples, reachable or not."""
    rows, cols = config.num_rows, config.num_cols
    states: list[tuple] = []
    for paddle in range(cols):
        for hot in (False, True):
            states.append((Phase.RESET, -1, -1, paddle, hot))
            for r in range(rows):
                for c in range(cols):
                    states.append((Phase.FALLING, r, c, paddle, hot))
            states.append((Phase.CATCH, -1, -1, paddle, hot))
            states.append((Phase.MISS, -1, -1, paddle, hot))
        states.append((Phase.PLUS_HOLD, -1, -1, paddle, True))
        states.append((Phase.MINUS_HOLD, -1, -1, paddle, True))
    return states


def _paddle_distribution(
    config: BoardConfig, paddle: int, policy: np.ndarray
) -> list[tuple[int, float]]:
    move_probs = config.paddle_noise / 3.0 + (1.0 - config.paddle_noise) * policy
    dist: dict[int, float] = {}
    for delta, prob in zip((-1, 0, 1), move_probs):
        new = min(max(paddle + delta, 0), config.num_cols - 1)
        dist[new] = dist.get(new, 0.0) + prob
    return list(dist.items())


@dataclass
class StationaryAnalysis:
    states: list[tuple]
    transition: np.ndarray
    expected_reward: np.ndarray
    stationary: np.ndarray
    average_reward: float


def stationary_analysis(
    config: BoardConfig,
    policy: np.ndarray | None = None,
    tol: float = 1e-13,
    max_iterations: int = 1_000_000,
) -> StationaryAnalysis:
    """Exact stationary average reward of one board under a fixed action policy.

    Power iteration runs on the half-lazy kernel (P + I)/2, which has the same
    stationary distribution but is aperiodic even for degenerate configs.
    """
    if policy is None:
        policy = np.full(3, 1.0 / 3.0)
    states = enumerate_states(config)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    r = np.zeros(n)
    rows, cols = config.num_rows, config.num_cols

    for i, (phase, row, col, paddle, hot) in enumerate(states):
        paddle_dist = _paddle_distribution(config, paddle, policy)
        if phase == Phase.PLUS_HOLD:
            r[i] = config.p_reward
        elif phase == Phase.MINUS_HOLD:
            r[i] = -config.p_reward

        for new_paddle, pp in paddle_dist:
            if phase == Phase.RESET:
                P[i, index[(Phase.RESET, -1, -1, new_paddle, hot)]] += pp * (1.0 - config.p_arrival)
                arrive = pp * config.p_arrival / cols
                for c in range(cols):
                    if hot:
                        P[i, index[(Phase.FALLING, 0, c, new_paddle, True)]] += arrive
                    else:
                        P[i, index[(Phase.FALLING, 0, c, new_paddle, True)]] += arrive * config.p_hot
                        P[i, index[(Phase.FALLING, 0, c, new_paddle, False)]] += arrive * (
                            1.0 - config.p_hot
                        )
            elif phase == Phase.FALLING:
                if row == rows - 1:
                    outcome = Phase.CATCH if col == paddle else Phase.MISS
                    P[i, index[(outcome, -1, -1, new_paddle, hot)]] += pp
                else:
                    c = min(max(col + config.wind, 0), cols - 1)
                    P[i, index[(Phase.FALLING, row + 1, c, new_paddle, hot)]] += pp
            elif phase == Phase.CATCH:
                target = (Phase.PLUS_HOLD, -1, -1, new_paddle, True) if hot else (
                    Phase.RESET, -1, -1, new_paddle, False)
                P[i, index[target]] += pp
            elif phase == Phase.MISS:
                target = (Phase.MINUS_HOLD, -1, -1, new_paddle, True) if hot else (
                    Phase.RESET, -1, -1, new_paddle, False)
                P[i, index[target]] += pp
            elif phase == Phase.PLUS_HOLD:
                P[i, index[(Phase.RESET, -1, -1, new_paddle, False)]] += pp * config.p_reward
                P[i, index[(Phase.PLUS_HOLD, -1, -1, new_paddle, True)]] += pp * (
                    1.0 - config.p_reward
                )
            elif phase == Phase.MINUS_HOLD:
                P[i, index[(Phase.RESET, -1, -1, new_paddle, False)]] += pp * config.p_reward
                P[i, index[(Phase.MINUS_HOLD, -1, -1, new_paddle, True)]] += pp * (
                    1.0 - config.p_reward
                )

    lazy = 0.5 * (P + np.eye(n))
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iterations):
        nxt = pi @ lazy
        if np.abs(nxt - pi).sum() < tol:
            pi = nxt
            break
        pi = nxt
    pi = pi / pi.sum()
    return StationaryAnalysis(
        states=states,
        transition=P,
        expected_reward=r,
        stationary=pi,
        average_reward=float(pi @ r),
    )


def simulate_average_reward(
    config: BoardConfig,
    num_steps: int,
    seed: int,
    num_batches: int = 100,
) -> tuple[float, float]:
    """(mean reward, batch-means standard error) of a uniform-random policy run."""
    dyn_rng = derive_rng(seed, "board", 0)
    act_rng = derive_rng(seed, "sim-policy")
    state = initial_board_state(config, dyn_rng)
    rewards = np.zeros(num_steps)
    for t in range(num_steps):
        action = int(act_rng.integers(3))
        state, reward = board_step(state, config, action, dyn_rng)
        rewards[t] = reward
    batches = np.array_split(rewards, num_batches)
    means = np.array([b.mean() for b in batches])
    se = float(means.std(ddof=1) / np.sqrt(len(means)))
    return float(rewards.mean()), se
