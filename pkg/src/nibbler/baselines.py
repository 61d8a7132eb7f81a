"""Fully incremental deep Q-learning and QV-learning baselines.

One fully connected rectifier hidden layer over all base features, linear
heads on top. No target network and no experience replay: each step performs
a single-gradient update from the current transition only. The Q variant
bootstraps from max-action values, Y = R + gamma * max_a Q(x', a); the QV
variant carries an extra state-value head and bootstraps from it,
Y = R + gamma * V(x'), training V and Q toward the same frozen target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gvf import epsilon_greedy
from .nets import co_opt, init_dense
from .seeding import derive_rng

VARIANTS = ("q", "qv")


@dataclass(frozen=True)
class BaselineConfig:
    variant: str = "q"
    hidden_dim: int = 256
    alpha: float = 0.001
    nu: float = 0.99
    epsilon: float = 0.1
    gamma: float = 0.99

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be >= 1, got {self.hidden_dim}")


def baseline_gradients(
    agent: "BaselineAgent", x_t: np.ndarray, x_next: np.ndarray, reward: float, action: int
) -> dict[str, np.ndarray]:
    """Exact gradients of the baseline loss at the current weights.

    Keys: q_row (taken action's head row), trunk_w, trunk_b, and v for the QV
    variant. Y is computed from the current weights and frozen.
    """
    cfg = agent.config
    hidden_next = agent.trunk.forward(x_next)
    if cfg.variant == "q":
        y = reward + cfg.gamma * float(np.max(agent.q_head @ hidden_next))
    else:
        y = reward + cfg.gamma * float(agent.v_head @ hidden_next)

    pre_t = agent.trunk.input_weights @ x_t + agent.trunk.input_bias
    hidden_t = np.maximum(pre_t, 0.0)
    e_q = y - agent.q_head[action] @ hidden_t
    grads = {"q_row": -e_q * hidden_t}
    dhid = -e_q * agent.q_head[action]
    if cfg.variant == "qv":
        e_v = y - agent.v_head @ hidden_t
        grads["v"] = -e_v * hidden_t
        dhid = dhid - e_v * agent.v_head
    dpre = np.where(pre_t > 0.0, dhid, 0.0)
    grads["trunk_w"] = np.outer(dpre, x_t)
    grads["trunk_b"] = dpre
    return grads


class BaselineAgent:
    """Incremental deep Q/QV agent over a binary observation vector."""

    def __init__(
        self, num_base_features: int, num_actions: int, config: BaselineConfig, seed: int
    ):
        self.config = config
        self.num_base_features = num_base_features
        self.num_actions = num_actions
        self.seed = int(seed)
        rng_init = derive_rng(seed, "agent-init")
        self._rng_explore = derive_rng(seed, "exploration")
        self.trunk, self.trunk_momentum = init_dense(num_base_features, config.hidden_dim, rng_init)
        self.q_head = np.zeros((num_actions, config.hidden_dim))
        self.q_vel = np.zeros((num_actions, config.hidden_dim))
        if config.variant == "qv":
            self.v_head = np.zeros(config.hidden_dim)
            self.v_vel = np.zeros(config.hidden_dim)
        else:
            self.v_head = None
            self.v_vel = None

        self.step_count = 0
        self._x_prev: np.ndarray | None = None
        self._action_prev: int | None = None

    def num_parameters(self) -> int:
        count = self.trunk.input_weights.size + self.trunk.input_bias.size + self.q_head.size
        if self.v_head is not None:
            count += self.v_head.size
        return int(count)

    def weights_finite(self) -> bool:
        arrays = [self.trunk.input_weights, self.trunk.input_bias, self.q_head]
        if self.v_head is not None:
            arrays.append(self.v_head)
        return all(np.isfinite(a).all() for a in arrays)

    def step(self, reward: float, observation: np.ndarray) -> int:
        cfg = self.config
        if observation.shape != (self.num_base_features,):
            raise ValueError(
                f"expected observation of shape ({self.num_base_features},), "
                f"got {observation.shape}"
            )
        x = observation.astype(np.float64)
        hidden = self.trunk.forward(x)
        q_values = self.q_head @ hidden
        action = epsilon_greedy(q_values, cfg.epsilon, self._rng_explore)

        if self._x_prev is not None:
            grads = baseline_gradients(self, self._x_prev, x, reward, self._action_prev)
            a = self._action_prev
            co_opt(self.q_head[a], cfg.alpha, grads["q_row"], self.q_vel[a], cfg.nu)
            if cfg.variant == "qv":
                co_opt(self.v_head, cfg.alpha, grads["v"], self.v_vel, cfg.nu)
            co_opt(
                self.trunk.input_weights, cfg.alpha, grads["trunk_w"],
                self.trunk_momentum.weights, cfg.nu,
            )
            co_opt(
                self.trunk.input_bias, cfg.alpha, grads["trunk_b"],
                self.trunk_momentum.bias, cfg.nu,
            )

        self._x_prev = x
        self._action_prev = action
        self.step_count += 1
        return action
