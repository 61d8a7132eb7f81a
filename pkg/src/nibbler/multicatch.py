"""Continuing catch boards and the composite multi-catch environment.

A single board runs a continuing variant of catch. The ball waits on a reset
bit and re-enters the board at the top row with probability p_arrival per
step; while falling it drops one row per step (drifting sideways by `wind`,
clipped at the edges). When the ball occupies the bottom row, that state
decides the outcome: a catch if the ball column matches the paddle column,
otherwise a miss. The catch/miss bit is active for exactly the following
timestep. Each time the ball enters the board the board becomes hot with
probability p_hot; while hot, a catch (miss) is followed by a plus (minus)
bit that stays active for a geometric duration, exiting with probability
p_reward per step and emitting the reward +1 (-1) as the ball returns to
reset. Cold catches and misses emit no reward. The paddle moves every step by
the requested action, except with probability paddle_noise it moves in a
uniformly random direction instead; movement is clipped at the board edges.

Observation layout per board block (the ball bit is hidden outside the
falling phase):

    [cells row-major (num_rows x num_cols)][reset][hot][catch][miss][plus][minus]

so each block has num_rows*num_cols + 6 bits. The paddle occupies its
bottom-row cell every step (the ball may share that cell on the outcome
step). The composite environment steps n boards with one broadcast action,
sums their rewards, concatenates their blocks in board order, and applies a
fixed random bit permutation sampled once at construction.

Randomness: board i draws from its own named stream, consuming exactly five
uniforms per step ([noise gate, noise direction, phase event, arrival column,
hot entry]; unused draws are discarded), so a board's dynamics depend only on
its stream and the incoming action sequence. The permutation has its own
stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import IO, Iterable

import numpy as np

from .seeding import derive_rng

NUM_ACTIONS = 3

# offsets of the status bits within a block, after the cell grid
RESET_BIT = 0
HOT_BIT = 1
CATCH_BIT = 2
MISS_BIT = 3
PLUS_BIT = 4
MINUS_BIT = 5
NUM_STATUS_BITS = 6


class Action(IntEnum):
    LEFT = 0
    STAY = 1
    RIGHT = 2


class Phase(IntEnum):
    RESET = 0
    FALLING = 1
    CATCH = 2
    MISS = 3
    PLUS_HOLD = 4
    MINUS_HOLD = 5


@dataclass(frozen=True)
class BoardConfig:
    num_rows: int = 10
    num_cols: int = 5
    p_arrival: float = 0.2
    p_reward: float = 0.2
    p_hot: float = 1.0
    paddle_noise: float = 0.2
    wind: int = 0

    def __post_init__(self):
        if self.num_rows < 2:
            raise ValueError(f"num_rows must be >= 2, got {self.num_rows}")
        if self.num_cols < 1:
            raise ValueError(f"num_cols must be >= 1, got {self.num_cols}")
        for name in ("p_arrival", "p_reward", "p_hot", "paddle_noise"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.wind not in (-1, 0, 1):
            raise ValueError(f"wind must be -1, 0 or +1, got {self.wind}")

    @property
    def num_bits(self) -> int:
        return self.num_rows * self.num_cols + NUM_STATUS_BITS


@dataclass
class BoardState:
    """Latent state of one board; row/ball_col are -1 outside the falling phase."""

    phase: Phase
    row: int
    ball_col: int
    paddle_col: int
    hot: bool


def initial_board_state(config: BoardConfig, rng: np.random.Generator) -> BoardState:
    return BoardState(
        phase=Phase.RESET,
        row=-1,
        ball_col=-1,
        paddle_col=int(rng.integers(config.num_cols)),
        hot=False,
    )


def board_step(
    state: BoardState,
    config: BoardConfig,
    action: int,
    rng: np.random.Generator,
) -> tuple[BoardState, int]:
    """One board transition; the reward is nonzero only on plus/minus exits."""
    u = rng.random(5)
    if u[0] < config.paddle_noise:
        delta = int(u[1] * 3) - 1
    else:
        delta = int(action) - 1
    paddle = min(max(state.paddle_col + delta, 0), config.num_cols - 1)

    phase = state.phase
    if phase == Phase.RESET:
        if u[2] < config.p_arrival:
            hot = state.hot or u[4] < config.p_hot
            col = int(u[3] * config.num_cols)
            return BoardState(Phase.FALLING, 0, col, paddle, hot), 0
        return BoardState(Phase.RESET, -1, -1, paddle, state.hot), 0

    if phase == Phase.FALLING:
        if state.row == config.num_rows - 1:
            # outcome decided by alignment in the bottom-row state, before the
            # paddle's move this step
            caught = state.ball_col == state.paddle_col
            outcome = Phase.CATCH if caught else Phase.MISS
            return BoardState(outcome, -1, -1, paddle, state.hot), 0
        col = min(max(state.ball_col + config.wind, 0), config.num_cols - 1)
        return BoardState(Phase.FALLING, state.row + 1, col, paddle, state.hot), 0

    if phase == Phase.CATCH:
        if state.hot:
            return BoardState(Phase.PLUS_HOLD, -1, -1, paddle, True), 0
        return BoardState(Phase.RESET, -1, -1, paddle, False), 0

    if phase == Phase.MISS:
        if state.hot:
            return BoardState(Phase.MINUS_HOLD, -1, -1, paddle, True), 0
        return BoardState(Phase.RESET, -1, -1, paddle, False), 0

    if phase == Phase.PLUS_HOLD:
        if u[2] < config.p_reward:
            return BoardState(Phase.RESET, -1, -1, paddle, False), 1
        return BoardState(Phase.PLUS_HOLD, -1, -1, paddle, True), 0

    if phase == Phase.MINUS_HOLD:
        if u[2] < config.p_reward:
            return BoardState(Phase.RESET, -1, -1, paddle, False), -1
        return BoardState(Phase.MINUS_HOLD, -1, -1, paddle, True), 0

    raise ValueError(f"unknown phase: {phase}")


_PHASE_STATUS_BIT = {
    Phase.RESET: RESET_BIT,
    Phase.CATCH: CATCH_BIT,
    Phase.MISS: MISS_BIT,
    Phase.PLUS_HOLD: PLUS_BIT,
    Phase.MINUS_HOLD: MINUS_BIT,
}


def board_observe(state: BoardState, config: BoardConfig) -> np.ndarray:
    """The board's bit block in the documented layout."""
    obs = np.zeros(config.num_bits, dtype=np.uint8)
    grid = config.num_rows * config.num_cols
    obs[(config.num_rows - 1) * config.num_cols + state.paddle_col] = 1
    if state.phase == Phase.FALLING:
        obs[state.row * config.num_cols + state.ball_col] = 1
    else:
        obs[grid + _PHASE_STATUS_BIT[state.phase]] = 1
    if state.hot:
        obs[grid + HOT_BIT] = 1
    return obs


class MultiCatchEnv:
    """n independent boards driven by one broadcast action, rewards summed.

    Single-writer: `step` mutates internal state and must be externally
    serialized; distinct instances share nothing.
    """

    def __init__(
        self,
        configs: list[BoardConfig],
        seed: int,
        permute: bool = True,
    ):
        if not configs:
            raise ValueError("need at least one board")
        self.configs = list(configs)
        self.seed = int(seed)
        self.num_actions = NUM_ACTIONS
        self._rngs = [derive_rng(seed, "board", i) for i in range(len(configs))]
        self.states = [initial_board_state(c, r) for c, r in zip(self.configs, self._rngs)]

        self.block_offsets = np.cumsum([0] + [c.num_bits for c in self.configs])
        self.num_bits = int(self.block_offsets[-1])
        if permute:
            self.permutation = derive_rng(seed, "permutation").permutation(self.num_bits)
        else:
            self.permutation = np.arange(self.num_bits)
        self._inverse_permutation = np.argsort(self.permutation)
        self.last_component_rewards = np.zeros(len(configs), dtype=np.int64)

    @property
    def num_boards(self) -> int:
        return len(self.configs)

    def base_observe(self) -> np.ndarray:
        """Concatenated board blocks, before permutation."""
        out = np.zeros(self.num_bits, dtype=np.uint8)
        for i, (state, config) in enumerate(zip(self.states, self.configs)):
            off = int(self.block_offsets[i])
            grid = config.num_rows * config.num_cols
            out[off + (config.num_rows - 1) * config.num_cols + state.paddle_col] = 1
            if state.phase == Phase.FALLING:
                out[off + state.row * config.num_cols + state.ball_col] = 1
            else:
                out[off + grid + _PHASE_STATUS_BIT[state.phase]] = 1
            if state.hot:
                out[off + grid + HOT_BIT] = 1
        return out

    def observe(self) -> np.ndarray:
        """Current observation: permuted[i] = base[permutation[i]]."""
        return self.base_observe()[self.permutation]

    def step(self, action: int) -> tuple[int, np.ndarray]:
        """Broadcast the action to every board; return (summed reward, observation)."""
        total = 0
        for i, (state, config, rng) in enumerate(zip(self.states, self.configs, self._rngs)):
            self.states[i], r = board_step(state, config, action, rng)
            self.last_component_rewards[i] = r
            total += r
        return total, self.observe()

    def permuted_index(self, base_index: int) -> int:
        """Position of an unpermuted bit in the presented observation."""
        return int(self._inverse_permutation[base_index])

    def status_bit_index(self, board: int, status_bit: int) -> int:
        """Unpermuted index of one of a board's status bits."""
        config = self.configs[board]
        return int(self.block_offsets[board]) + config.num_rows * config.num_cols + status_bit

    def plus_bit_indices(self) -> np.ndarray:
        return np.array([self.status_bit_index(i, PLUS_BIT) for i in range(self.num_boards)])

    def minus_bit_indices(self) -> np.ndarray:
        return np.array([self.status_bit_index(i, MINUS_BIT) for i in range(self.num_boards)])


def default_p_hot(n: int) -> float:
    return min(1.0, 2.0 / n)


def make_multicatch(n: int, seed: int, permute: bool = True, **overrides) -> MultiCatchEnv:
    """n default boards; p_hot defaults to min(1, 2/n) unless overridden."""
    if n < 1:
        raise ValueError(f"need at least one board, got n={n}")
    config = BoardConfig(p_hot=default_p_hot(n))
    if overrides:
        config = replace(config, **overrides)
    return MultiCatchEnv([config] * n, seed=seed, permute=permute)


def make_heterogeneous(n: int, seed: int, permute: bool = True) -> MultiCatchEnv:
    """n boards with per-board rows in {5..10}, wind in {-1,+1}, and
    p_arrival, p_reward ~ Uniform[0.05, 1]."""
    if n < 1:
        raise ValueError(f"need at least one board, got n={n}")
    configs = []
    for i in range(n):
        rng = derive_rng(seed, "board-config", i)
        configs.append(
            BoardConfig(
                num_rows=int(rng.integers(5, 11)),
                num_cols=5,
                p_arrival=float(rng.uniform(0.05, 1.0)),
                p_reward=float(rng.uniform(0.05, 1.0)),
                p_hot=default_p_hot(n),
                paddle_noise=0.2,
                wind=int(rng.choice([-1, 1])),
            )
        )
    return MultiCatchEnv(configs, seed=seed, permute=permute)


CONFIG_KEYS = ("num_parallel", "p_arrival", "p_reward", "paddle_noise", "num_rows", "num_cols")


def env_from_config(config: dict, seed: int | None = None, permute: bool = True) -> MultiCatchEnv:
    """Build an environment from a plain config mapping.

    Recognized keys: num_parallel plus the per-board settings (p_arrival,
    p_reward, paddle_noise, num_rows, num_cols), optional p_hot and wind
    overrides, optional heterogeneous flag, and seed (overridden by the
    argument when given).
    """
    cfg = dict(config)
    if seed is None:
        seed = cfg.pop("seed", None)
        if seed is None:
            raise ValueError("config needs a 'seed' (or pass one explicitly)")
    else:
        cfg.pop("seed", None)
    n = int(cfg.pop("num_parallel", 1))
    heterogeneous = bool(cfg.pop("heterogeneous", False))
    allowed = set(CONFIG_KEYS) | {"p_hot", "wind"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ValueError(f"unknown environment config keys: {sorted(unknown)}")
    if heterogeneous:
        if cfg:
            raise ValueError("heterogeneous environments take no per-board overrides")
        return make_heterogeneous(n, seed=int(seed), permute=permute)
    return make_multicatch(n, seed=int(seed), permute=permute, **cfg)


def load_env_config(path) -> dict:
    with open(path) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError(f"environment config must be a JSON object, got {type(config).__name__}")
    return config


def dump_trajectory(
    env: MultiCatchEnv,
    num_steps: int,
    fh: IO[str],
    actions: Iterable[int] | None = None,
    policy_seed: int = 0,
) -> None:
    """Write (t, action, reward, observation bits) lines for golden tests.

    Without an explicit action sequence, actions are drawn uniformly from a
    stream derived from the environment seed and `policy_seed`.
    """
    if actions is None:
        rng = derive_rng(env.seed, "dump-policy", policy_seed)
        actions = (int(rng.integers(NUM_ACTIONS)) for _ in range(num_steps))
    for t, action in zip(range(1, num_steps + 1), actions):
        reward, obs = env.step(action)
        bits = "".join("1" if b else "0" for b in obs)
        fh.write(f"{t}\t{action}\t{reward}\t{bits}\n")
