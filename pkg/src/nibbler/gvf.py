"""General value function questions and their answer machinery.

A GVF question is a (cumulant, discount, policy) triple; here cumulants are
single base-feature activations and the policy is always the behaviour policy
(strictly on-policy learning). Answers are learned in QV form: state values
and action values regress toward the same bootstrapped target
Y = C' + gamma * V(x'), with Y held fixed (no gradient flows through it).

The module provides the linear learners (TD(0) state values and a one-step
reward model), the QV update for the main linear control learner, and the QV
update for a question's deep answer, where gradients also flow into the
answer's feature network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .nets import DenseMomentum, DenseNet, co_opt, init_scale

if TYPE_CHECKING:
    from .selection import SelectionState


def discounted_return(trajectory) -> float:
    """Monte Carlo return of a finite (cumulant, discount) trajectory.

    Computes C_1 + g_1*(C_2 + g_2*(...)); a test-only oracle for value
    estimates, accurate once the discount product has decayed to negligible.
    """
    g = 0.0
    for cumulant, discount in reversed(list(trajectory)):
        g = cumulant + discount * g
    return g


def linear_td0(
    w: np.ndarray,
    x_t: np.ndarray,
    x_next: np.ndarray,
    cumulant: float,
    discount: float,
    alpha: float,
) -> np.ndarray:
    """One TD(0) step, in place: w += alpha * (C' + g*w.x' - w.x) * x."""
    delta = cumulant + discount * (w @ x_next) - (w @ x_t)
    w += (alpha * delta) * x_t
    return w


def linear_reward_model_update(
    w: np.ndarray, x_t: np.ndarray, reward: float, alpha: float
) -> np.ndarray:
    """One LMS step of the one-step reward model: w += alpha * (R' - w.x) * x."""
    delta = reward - (w @ x_t)
    w += (alpha * delta) * x_t
    return w


def epsilon_greedy(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Greedy action with uniform-random ties; uniform action w.p. epsilon."""
    n = len(q_values)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(n))
    top = np.flatnonzero(q_values == q_values.max())
    if len(top) == 0:
        # non-finite q-values (diverged weights); the harness aborts the run
        # at its next divergence check
        return 0
    if len(top) == 1:
        return int(top[0])
    return int(top[rng.integers(len(top))])


@dataclass
class GvfQuestion:
    """One constructed prediction question: cumulant feature, discount, on-policy."""

    cumulant_index: int
    discount: float
    policy: str = "behavior"


class LinearVQ:
    """Linear state-value and per-action action-value heads over one feature vector.

    Weights start at zero. Each weight vector carries its own momentum state;
    per-action velocities are only touched when that action's row updates.
    """

    def __init__(self, feature_dim: int, num_actions: int):
        self.w_v = np.zeros(feature_dim)
        self.w_q = np.zeros((num_actions, feature_dim))
        self.vel_v = np.zeros(feature_dim)
        self.vel_q = np.zeros((num_actions, feature_dim))

    @classmethod
    def from_arrays(cls, w_v, w_q, vel_v, vel_q) -> "LinearVQ":
        obj = cls.__new__(cls)
        obj.w_v, obj.w_q, obj.vel_v, obj.vel_q = w_v, w_q, vel_v, vel_q
        return obj

    @property
    def feature_dim(self) -> int:
        return self.w_v.shape[0]

    @property
    def num_actions(self) -> int:
        return self.w_q.shape[0]

    def value(self, x: np.ndarray) -> float:
        return float(self.w_v @ x)

    def action_values(self, x: np.ndarray) -> np.ndarray:
        return self.w_q @ x


def main_qv_gradients(
    main: LinearVQ,
    x_t: np.ndarray,
    x_next: np.ndarray,
    reward: float,
    action: int,
    discount: float,
) -> tuple[np.ndarray, np.ndarray]:
    """(dL/dw_v, dL/dw_{q,action}) for L = 0.5*[(Y-V)^2 + (Y-Q_a)^2], Y frozen."""
    y = reward + discount * (main.w_v @ x_next)
    e_v = y - main.w_v @ x_t
    e_q = y - main.w_q[action] @ x_t
    return -e_v * x_t, -e_q * x_t


def main_qv_update(
    main: LinearVQ,
    x_t: np.ndarray,
    x_next: np.ndarray,
    reward: float,
    action: int,
    discount: float,
    alpha: float,
    nu: float,
) -> None:
    """QV update of the main learner: V and the taken action's Q move toward Y."""
    grad_v, grad_q = main_qv_gradients(main, x_t, x_next, reward, action, discount)
    co_opt(main.w_v, alpha, grad_v, main.vel_v, nu)
    co_opt(main.w_q[action], alpha, grad_q, main.vel_q[action], nu)


@dataclass
class QuestionSlot:
    """One GVF question plus its complete answer machinery.

    `selection` holds the g base-feature indices feeding `net`; `heads` are the
    V/Q estimates over the net's hidden features; `support` is the full-width
    linear state-value answer whose weight magnitudes rank candidate inputs.
    """

    question: GvfQuestion
    selection: "SelectionState"
    net: DenseNet
    net_momentum: DenseMomentum
    heads: LinearVQ
    support: np.ndarray = field(default=None)  # type: ignore[assignment]


def answer_gradients(
    slot: QuestionSlot,
    x_base_t: np.ndarray,
    x_base_next: np.ndarray,
    action: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(dL/dw_v, dL/dw_{q,a}, dL/dW, dL/db) of the slot's QV loss.

    The cumulant is the slot's feature of x_base_next; inputs at both timesteps
    pass through the current selection and net; Y is frozen, so gradients reach
    the net only through the time-t features.
    """
    gamma = slot.question.discount
    u_t = x_base_t[slot.selection.indices]
    u_next = x_base_next[slot.selection.indices]
    pre_t = slot.net.input_weights @ u_t + slot.net.input_bias
    hid_t = np.maximum(pre_t, 0.0)
    hid_next = slot.net.forward(u_next)

    cumulant = x_base_next[slot.question.cumulant_index]
    y = cumulant + gamma * (slot.heads.w_v @ hid_next)
    e_v = y - slot.heads.w_v @ hid_t
    e_q = y - slot.heads.w_q[action] @ hid_t

    grad_v = -e_v * hid_t
    grad_q = -e_q * hid_t
    dhid = -(e_v * slot.heads.w_v + e_q * slot.heads.w_q[action])
    dpre = np.where(pre_t > 0.0, dhid, 0.0)
    grad_w = np.outer(dpre, u_t)
    return grad_v, grad_q, grad_w, dpre


def answer_update(
    slot: QuestionSlot,
    x_base_t: np.ndarray,
    x_base_next: np.ndarray,
    action: int,
    alpha: float,
    nu: float,
) -> None:
    """QV update of one question's deep answer (heads and net weights)."""
    grad_v, grad_q, grad_w, grad_b = answer_gradients(slot, x_base_t, x_base_next, action)
    co_opt(slot.heads.w_v, alpha, grad_v, slot.heads.vel_v, nu)
    co_opt(slot.heads.w_q[action], alpha, grad_q, slot.heads.vel_q[action], nu)
    co_opt(slot.net.input_weights, alpha, grad_w, slot.net_momentum.weights, nu)
    co_opt(slot.net.input_bias, alpha, grad_b, slot.net_momentum.bias, nu)


def reset_slot(
    slot: QuestionSlot, rng: np.random.Generator, scope: str = "full"
) -> None:
    """Reset a slot's answer machinery after its cumulant was reassigned.

    scope="net_only" redraws the feature network and zeroes its velocity (the
    minimal reset); scope="full" additionally zeroes the V/Q heads and support
    weights and redraws the input selection, discarding state that belonged to
    the previous cumulant's prediction problem.
    """
    if scope not in ("full", "net_only"):
        raise ValueError(f"unknown reset scope: {scope!r}")
    g = slot.net.input_dim
    s = init_scale(g)
    slot.net.input_weights[:] = rng.uniform(-s, s, size=slot.net.input_weights.shape)
    slot.net.input_bias[:] = 0.0
    slot.net_momentum.weights[:] = 0.0
    slot.net_momentum.bias[:] = 0.0
    if scope == "full":
        slot.heads.w_v[:] = 0.0
        slot.heads.w_q[:] = 0.0
        slot.heads.vel_v[:] = 0.0
        slot.heads.vel_q[:] = 0.0
        if slot.support is not None:
            slot.support[:] = 0.0
        m = slot.selection.mask.shape[0]
        fresh = rng.choice(m, size=g, replace=False)
        slot.selection.indices[:] = np.sort(fresh)
        slot.selection.mask[:] = False
        slot.selection.mask[slot.selection.indices] = True
