"""The Nibbler agent: online GVF question discovery and answer construction.

Each step, in order: the observation becomes the base feature vector; every
question's feature network maps its selected inputs to hidden features; base
and hidden features concatenate into the full feature vector; an
epsilon-greedy action is chosen from the main linear action values; then the
main QV update, every question's answer update, every question's input
selection, and finally the cumulant selection run on the cached previous
transition. The first step performs no updates because no transition exists
yet.

Per-question state is stored stacked across questions, shape (h, ...), so the
per-step math runs as a few batched array operations; `slot(i)` materializes
a view-backed `QuestionSlot` over the same memory for inspection and for the
occasional per-slot operations. Batched updates are semantically identical to
applying the per-slot operations in slot order (slots share nothing but the
read-only base features).

Because base features are binary and sparse, the (h, d, g) network weights
update lazily: a column's gradient is nonzero only while its input bit is
active, and pure momentum decay over k inactive rounds has the closed form
velocity *= nu^k, weights -= alpha * nu*(1-nu^k)/(1-nu) * velocity, applied
when the column is next read or written. `materialize()` settles all pending
decay; it runs automatically before any external read of the network arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .gvf import (
    GvfQuestion,
    LinearVQ,
    QuestionSlot,
    epsilon_greedy,
    linear_reward_model_update,
    main_qv_update,
    reset_slot,
)
from .nets import DenseMomentum, DenseNet, init_scale, reinit_input_column
from .seeding import derive_rng
from .selection import SelectionState, incremental_top

DEFAULT_STEPSIZE_FACTOR = 0.001 * math.sqrt(2.0)


@dataclass(frozen=True)
class NibblerConfig:
    h: int  # number of GVF questions
    g: int = 82  # base features per answer
    d: int = 256  # hidden features per answer
    kappa: float = DEFAULT_STEPSIZE_FACTOR
    alpha: float | None = None  # main/answer stepsize; kappa/sqrt(h) when None
    alpha_b: float | None = None  # linear-learner stepsize; kappa/sqrt(h) when None
    tau: float = 0.0
    gamma: float = 0.99
    epsilon: float = 0.1
    nu: float = 0.99
    cumulant_swap_reset: str = "full"  # or "net_only": the minimal reset

    def __post_init__(self):
        if self.h < 1 or self.g < 1 or self.d < 1:
            raise ValueError("h, g and d must all be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError(f"nu must be in [0, 1), got {self.nu}")
        if self.cumulant_swap_reset not in ("full", "net_only"):
            raise ValueError(f"unknown reset scope: {self.cumulant_swap_reset!r}")

    @property
    def derived_alpha(self) -> float:
        return self.kappa / math.sqrt(self.h) if self.alpha is None else self.alpha

    @property
    def derived_alpha_b(self) -> float:
        return self.kappa / math.sqrt(self.h) if self.alpha_b is None else self.alpha_b


def default_config(n: int, m: int, **overrides) -> NibblerConfig:
    """Default hyperparameters for an n-board problem with m base features:
    h = 2n questions, g = 82 inputs each (clamped to m), d = 256 hidden
    features per question, stepsizes kappa/sqrt(h) with kappa = 0.001*sqrt(2)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    cfg = NibblerConfig(h=2 * n, g=min(82, m))
    if overrides:
        cfg = replace(cfg, **overrides)
    if cfg.g > m:
        cfg = replace(cfg, g=m)
    if cfg.h > m:
        raise ValueError(f"h={cfg.h} exceeds the number of base features {m}")
    return cfg


class NibblerAgent:
    """Online agent; `step(reward, observation) -> action` drives everything."""

    def __init__(
        self,
        num_base_features: int,
        num_actions: int,
        config: NibblerConfig,
        seed: int,
        initial_cumulant_indices: np.ndarray | None = None,
        initial_input_indices: np.ndarray | None = None,
    ):
        if config.g > num_base_features or config.h > num_base_features:
            raise ValueError(
                f"config (h={config.h}, g={config.g}) does not fit "
                f"m={num_base_features} base features"
            )
        self.config = config
        self.num_base_features = num_base_features
        self.num_actions = num_actions
        self.seed = int(seed)
        m, h, g, d, z = num_base_features, config.h, config.g, config.d, num_actions
        self.feature_dim = m + h * d

        self._rng_init = derive_rng(seed, "agent-init")
        self._rng_explore = derive_rng(seed, "exploration")

        # cumulant discovery: one-step reward model plus the question selection
        self.w_discovery = np.zeros(m)
        if initial_cumulant_indices is None:
            initial_cumulant_indices = np.sort(
                self._rng_init.choice(m, size=h, replace=False)
            )
        c_idx = np.asarray(initial_cumulant_indices, dtype=np.int64).copy()
        c_mask = np.zeros(m, dtype=bool)
        c_mask[c_idx] = True
        self.cumulant_state = SelectionState(indices=c_idx, mask=c_mask, tau=config.tau)

        # per-question state, stacked on axis 0
        if initial_input_indices is None:
            initial_input_indices = np.stack(
                [np.sort(self._rng_init.choice(m, size=g, replace=False)) for _ in range(h)]
            )
        self.input_indices = np.asarray(initial_input_indices, dtype=np.int64).copy()
        self.input_mask = np.zeros((h, m), dtype=bool)
        for i in range(h):
            self.input_mask[i, self.input_indices[i]] = True

        # network weights are stored (question, input column, hidden) so that
        # the per-column lazy updates touch contiguous memory; slot views
        # expose the conventional (hidden, input) orientation via transposes
        s = init_scale(g)
        self.net_w = self._rng_init.uniform(-s, s, size=(h, g, d))
        self.net_b = np.zeros((h, d))
        self.net_vel_w = np.zeros((h, g, d))
        self.net_vel_b = np.zeros((h, d))
        self.head_v = np.zeros((h, d))
        self.head_q = np.zeros((h, z, d))
        self.head_vel_v = np.zeros((h, d))
        self.head_vel_q = np.zeros((h, z, d))
        self.w_support = np.zeros((h, m))

        self.main = LinearVQ(self.feature_dim, z)

        # lazy column bookkeeping for net_w / net_vel_w
        self._net_last = np.zeros((h, g), dtype=np.int64)
        self._update_rounds = 0

        self.step_count = 0
        self._x_base_prev: np.ndarray | None = None
        self._x_full_prev: np.ndarray | None = None
        self._action_prev: int | None = None
        self._ties_seen = 0  # swaps whose argmin/argmax was tied

    # -- lazy-momentum bookkeeping -------------------------------------------

    def materialize(self) -> None:
        """Apply all pending lazy decay so the arrays hold current values."""
        _kernels.materialize_all(
            self.net_w, self.net_vel_w, self._net_last,
            self.config.derived_alpha, self.config.nu, self._update_rounds,
        )

    def _forward_all(self, x_base: np.ndarray) -> np.ndarray:
        """Pre-activations of all questions' hidden layers (lazy state untouched)."""
        return _kernels.forward_pre(
            self.net_w, self.net_vel_w, self._net_last, self.net_b,
            self.config.derived_alpha, self.config.nu, self._update_rounds,
            self.input_indices, x_base,
        )

    # -- per-slot views -------------------------------------------------------

    def slot(self, i: int, settle: bool = True) -> QuestionSlot:
        """View-backed question i; mutations through it hit the stacked arrays."""
        if settle:
            self.materialize()
        return QuestionSlot(
            question=GvfQuestion(
                cumulant_index=int(self.cumulant_state.indices[i]),
                discount=self.config.gamma,
            ),
            selection=SelectionState(
                indices=self.input_indices[i],
                mask=self.input_mask[i],
                tau=self.config.tau,
            ),
            net=DenseNet(input_weights=self.net_w[i].T, input_bias=self.net_b[i]),
            net_momentum=DenseMomentum(weights=self.net_vel_w[i].T, bias=self.net_vel_b[i]),
            heads=LinearVQ.from_arrays(
                self.head_v[i], self.head_q[i], self.head_vel_v[i], self.head_vel_q[i]
            ),
            support=self.w_support[i],
        )

    def num_parameters(self) -> int:
        """Live weight count (excluding velocities)."""
        arrays = (
            self.w_discovery,
            self.net_w,
            self.net_b,
            self.head_v,
            self.head_q,
            self.w_support,
            self.main.w_v,
            self.main.w_q,
        )
        return int(sum(a.size for a in arrays))

    def weights_finite(self) -> bool:
        self.materialize()
        arrays = (
            self.w_discovery,
            self.net_w,
            self.net_b,
            self.head_v,
            self.head_q,
            self.w_support,
            self.main.w_v,
            self.main.w_q,
        )
        return all(np.isfinite(a).all() for a in arrays)

    def __getstate__(self):
        self.materialize()
        return dict(self.__dict__)

    def __setstate__(self, state):
        self.__dict__.update(state)

    # -- the step --------------------------------------------------------------

    def step(self, reward: float, observation: np.ndarray) -> int:
        cfg = self.config
        m = self.num_base_features
        if observation.shape != (m,):
            raise ValueError(f"expected observation of shape ({m},), got {observation.shape}")
        x_base = observation.astype(np.float64)

        pre_next = self._forward_all(x_base)
        hidden_next = np.maximum(pre_next, 0.0)

        x_full = np.empty(self.feature_dim)
        x_full[:m] = x_base
        x_full[m:] = hidden_next.ravel()

        q_values = self.main.action_values(x_full)
        action = epsilon_greedy(q_values, cfg.epsilon, self._rng_explore)

        if self._x_base_prev is not None:
            main_qv_update(
                self.main,
                self._x_full_prev,
                x_full,
                reward,
                self._action_prev,
                cfg.gamma,
                cfg.derived_alpha,
                cfg.nu,
            )
            self._update_answers(x_base, hidden_next)
            self._update_answer_selections(x_base)
            self._update_cumulant_selection(reward)

        self._x_base_prev = x_base
        self._x_full_prev = x_full
        self._action_prev = action
        self.step_count += 1
        return action

    def _update_answers(self, x_base_next: np.ndarray, hidden_next: np.ndarray) -> None:
        """One QV update round of every question's answer (heads and net).

        Time-t features are recomputed through the current nets so the update
        stays exact after column reinits and slot resets.
        """
        cfg = self.config
        _kernels.answer_update_all(
            self.net_w, self.net_vel_w, self._net_last, self.net_b, self.net_vel_b,
            self.head_v, self.head_vel_v, self.head_q, self.head_vel_q,
            self._x_base_prev, x_base_next, self.input_indices,
            self.cumulant_state.indices,
            self._action_prev, cfg.derived_alpha, cfg.nu, cfg.gamma,
            self._update_rounds, hidden_next,
        )
        self._update_rounds += 1

    def _update_answer_selections(self, x_base_next: np.ndarray) -> None:
        """Per-question input swap + column reinit, then batched support TD."""
        cfg = self.config
        if cfg.g < self.num_base_features:
            util = np.abs(self.w_support)  # (h, m)
            sel_util = np.where(self.input_mask, util, np.inf)
            low = np.argmin(sel_util, axis=1)
            unsel_util = np.where(self.input_mask, -np.inf, util)
            high = np.argmax(unsel_util, axis=1)
            hh = np.arange(cfg.h)
            fire = util[hh, low] + cfg.tau < util[hh, high]
            for i in np.nonzero(fire)[0]:
                i = int(i)
                lo, hi = int(low[i]), int(high[i])
                self._ties_seen += int(
                    (sel_util[i] == util[i, lo]).sum() > 1
                    or (unsel_util[i] == util[i, hi]).sum() > 1
                )
                self.input_mask[i, lo] = False
                self.input_mask[i, hi] = True
                pos = int(np.nonzero(self.input_indices[i] == lo)[0][0])
                self.input_indices[i, pos] = hi
                self._reinit_column(i, pos)

        x_t = self._x_base_prev
        cumulants = x_base_next[self.cumulant_state.indices]
        delta = (
            cumulants
            + cfg.gamma * (self.w_support @ x_base_next)
            - (self.w_support @ x_t)
        )
        self.w_support += cfg.derived_alpha_b * delta[:, None] * x_t[None, :]

    def _reinit_column(self, i: int, pos: int) -> None:
        """Same draws and effect as reinit_input_column on the slot view."""
        slot = self.slot(i, settle=False)
        reinit_input_column(slot.net, slot.net_momentum, pos, self._rng_init)
        self._net_last[i, pos] = self._update_rounds

    def _update_cumulant_selection(self, reward: float) -> None:
        cfg = self.config
        if cfg.h < self.num_base_features:
            changed, pos, tied = incremental_top(
                self.cumulant_state.indices,
                self.cumulant_state.mask,
                cfg.tau,
                np.abs(self.w_discovery),
                report_ties=True,
            )
            self._ties_seen += int(tied)
            if changed:
                reset_slot(self.slot(pos, settle=False), self._rng_init,
                           scope=cfg.cumulant_swap_reset)
                self._net_last[pos, :] = self._update_rounds
        linear_reward_model_update(
            self.w_discovery, self._x_base_prev, reward, cfg.derived_alpha_b
        )
