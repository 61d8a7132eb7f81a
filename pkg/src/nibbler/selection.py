"""Incremental top-k selection and the two per-step selection loops.

`incremental_top` maintains a k-subset of feature indices under a utility
vector, swapping at most one index per call: the weakest selected feature is
replaced by the strongest unselected one when the latter's utility exceeds the
former's by more than the threshold tau. Ties in both argmin and argmax break
toward the lowest index, so repeated calls are deterministic.

On top of it sit the two selection loops: ranking a question's candidate
inputs by the magnitudes of its support weights, and ranking base features as
cumulant candidates by the magnitudes of the one-step reward-model weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gvf import QuestionSlot, linear_reward_model_update, linear_td0, reset_slot
from .nets import reinit_input_column


def incremental_top(
    indices: np.ndarray,
    mask: np.ndarray,
    tau: float,
    utilities: np.ndarray,
    report_ties: bool = False,
):
    """One lazy top-k maintenance step, mutating (indices, mask) in place.

    Returns (changed, pos) where pos is the list position of the replaced
    entry. At most one index changes per call; a swap requires
    U[weakest selected] + tau < U[strongest unselected], strictly. Ties in
    argmin/argmax break toward the lowest index.

    With report_ties=True the return gains a third flag: whether a swap fired
    while its argmin or argmax was tied (the one situation where the
    lowest-index rule, rather than the utilities, picked the swap).
    """
    changed, pos, tied = False, None, False
    if not mask.all():
        selected = np.where(mask, utilities, np.inf)
        unselected = np.where(mask, -np.inf, utilities)
        low = int(np.argmin(selected))
        high = int(np.argmax(unselected))
        if utilities[low] + tau < utilities[high]:
            changed = True
            if report_ties:
                tied = (
                    int((selected == utilities[low]).sum()) > 1
                    or int((unselected == utilities[high]).sum()) > 1
                )
            mask[low] = False
            mask[high] = True
            pos = int(np.nonzero(indices == low)[0][0])
            indices[pos] = high
    if report_ties:
        return changed, pos, tied
    return changed, pos


@dataclass
class SelectionState:
    """An ordered index list of size k over m features plus its membership mask."""

    indices: np.ndarray  # (k,) int64, distinct values in [0, m)
    mask: np.ndarray  # (m,) bool, mask[j] iff j in indices
    tau: float = 0.0

    @classmethod
    def random_subset(
        cls, m: int, k: int, rng: np.random.Generator, tau: float = 0.0
    ) -> "SelectionState":
        if not 1 <= k <= m:
            raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
        indices = np.sort(rng.choice(m, size=k, replace=False)).astype(np.int64)
        mask = np.zeros(m, dtype=bool)
        mask[indices] = True
        return cls(indices=indices, mask=mask, tau=tau)

    @property
    def k(self) -> int:
        return self.indices.shape[0]

    def update(self, utilities: np.ndarray) -> tuple[bool, int | None]:
        return incremental_top(self.indices, self.mask, self.tau, utilities)


def update_answer_selection(
    slot: QuestionSlot,
    x_base_t: np.ndarray,
    x_base_next: np.ndarray,
    alpha_b: float,
    rng: np.random.Generator,
) -> tuple[bool, int | None]:
    """Refresh one question's input selection, then TD-update its support weights.

    Order matters: swap first, reinitialize the net column that now feeds from
    a new base feature, and only then apply the support TD(0) step.
    """
    changed, pos = slot.selection.update(np.abs(slot.support))
    if changed:
        reinit_input_column(slot.net, slot.net_momentum, pos, rng)
    cumulant = x_base_next[slot.question.cumulant_index]
    linear_td0(slot.support, x_base_t, x_base_next, cumulant, slot.question.discount, alpha_b)
    return changed, pos


def update_cumulant_selection(
    w_discovery: np.ndarray,
    state: SelectionState,
    slots,
    x_base_t: np.ndarray,
    reward: float,
    alpha_b: float,
    rng: np.random.Generator,
    reset_scope: str = "full",
) -> tuple[bool, int | None]:
    """Refresh the cumulant selection, then LMS-update the reward model.

    When the selection swaps at list position pos, the question at that slot is
    reassigned to the incoming feature and its answer machinery is reset.
    """
    changed, pos = state.update(np.abs(w_discovery))
    if changed:
        slot = slots[pos]
        slot.question.cumulant_index = int(state.indices[pos])
        reset_slot(slot, rng, scope=reset_scope)
    linear_reward_model_update(w_discovery, x_base_t, reward, alpha_b)
    return changed, pos
