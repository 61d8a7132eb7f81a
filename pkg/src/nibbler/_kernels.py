"""Fused inner loops for the agent's per-question answer updates.

These kernels exploit two facts: base features are binary and sparse, so a
network column's gradient is nonzero only while its input bit is active; and
pure momentum decay over k gradient-free rounds has the closed form

    velocity *= nu^k
    weights  -= alpha * nu * (1 - nu^k) / (1 - nu) * velocity.

Each column therefore carries a last-updated round counter and settles lazily
when read or written. All decay arithmetic lives here (including
`materialize_all`, used before any external read of the arrays) so that every
code path computes bit-identical values.

Semantics are identical to applying `gvf.answer_update` slot by slot; the
test suite asserts parity against that reference.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _drift_coef(alpha: float, nu: float) -> float:
    return alpha * nu / (1.0 - nu) if nu > 0.0 else 0.0


@numba.njit(cache=True)
def materialize_all(net_w, net_vel_w, net_last, alpha, nu, rounds):
    """Settle pending decay on every column."""
    h, g, d = net_w.shape
    coef = _drift_coef(alpha, nu)
    for i in range(h):
        for j in range(g):
            k = rounds - net_last[i, j]
            if k > 0:
                decay = nu ** k
                drift = coef * (1.0 - decay)
                for t in range(d):
                    net_w[i, j, t] -= drift * net_vel_w[i, j, t]
                    net_vel_w[i, j, t] *= decay
                net_last[i, j] = rounds


@numba.njit(cache=True)
def forward_pre(net_w, net_vel_w, net_last, net_b, alpha, nu, rounds, indices, x_base):
    """Pre-activations of every question's hidden layer (read-only).

    Sums the settled values of the active input columns without writing the
    settlement back; the lazy state stays untouched.
    """
    h, g, d = net_w.shape
    coef = _drift_coef(alpha, nu)
    pre = net_b.copy()
    for i in range(h):
        for j in range(g):
            if x_base[indices[i, j]] != 0.0:
                k = rounds - net_last[i, j]
                if k > 0:
                    drift = coef * (1.0 - nu ** k)
                    for t in range(d):
                        pre[i, t] += net_w[i, j, t] - drift * net_vel_w[i, j, t]
                else:
                    for t in range(d):
                        pre[i, t] += net_w[i, j, t]
    return pre


@numba.njit(cache=True)
def answer_update_all(
    net_w, net_vel_w, net_last, net_b, net_vel_b,
    head_v, head_vel_v, head_q, head_vel_q,
    x_prev, x_next, indices, cumulant_indices,
    action, alpha, nu, gamma, rounds, hidden_next,
):
    """One QV update round of every question's answer (heads and net).

    Time-t features are recomputed through the current nets (with lazy
    settlement); gradients are all evaluated before any weight moves; active
    columns absorb their settlement and this round's gradient in one pass.
    Callers increment their round counter after this returns.
    """
    h, g, d = net_w.shape
    coef = _drift_coef(alpha, nu)
    one_minus_nu = 1.0 - nu
    pre_t = np.empty(d)
    hid_t = np.empty(d)
    dpre = np.empty(d)

    for i in range(h):
        for t in range(d):
            pre_t[t] = net_b[i, t]
        for j in range(g):
            if x_prev[indices[i, j]] != 0.0:
                k = rounds - net_last[i, j]
                if k > 0:
                    decay = nu ** k
                    drift = coef * (1.0 - decay)
                    for t in range(d):
                        net_w[i, j, t] -= drift * net_vel_w[i, j, t]
                        net_vel_w[i, j, t] *= decay
                net_last[i, j] = rounds
                for t in range(d):
                    pre_t[t] += net_w[i, j, t]
        for t in range(d):
            hid_t[t] = pre_t[t] if pre_t[t] > 0.0 else 0.0

        cumulant = x_next[cumulant_indices[i]]
        v_next = 0.0
        v_t = 0.0
        q_t = 0.0
        for t in range(d):
            v_next += head_v[i, t] * hidden_next[i, t]
            v_t += head_v[i, t] * hid_t[t]
            q_t += head_q[i, action, t] * hid_t[t]
        y = cumulant + gamma * v_next
        e_v = y - v_t
        e_q = y - q_t

        for t in range(d):
            if pre_t[t] > 0.0:
                dpre[t] = -(e_v * head_v[i, t] + e_q * head_q[i, action, t])
            else:
                dpre[t] = 0.0

        for t in range(d):
            head_vel_v[i, t] = nu * head_vel_v[i, t] + one_minus_nu * (-e_v * hid_t[t])
            head_v[i, t] -= alpha * head_vel_v[i, t]
            head_vel_q[i, action, t] = (
                nu * head_vel_q[i, action, t] + one_minus_nu * (-e_q * hid_t[t])
            )
            head_q[i, action, t] -= alpha * head_vel_q[i, action, t]
            net_vel_b[i, t] = nu * net_vel_b[i, t] + one_minus_nu * dpre[t]
            net_b[i, t] -= alpha * net_vel_b[i, t]

        for j in range(g):
            if x_prev[indices[i, j]] != 0.0:
                for t in range(d):
                    net_vel_w[i, j, t] = nu * net_vel_w[i, j, t] + one_minus_nu * dpre[t]
                    net_w[i, j, t] -= alpha * net_vel_w[i, j, t]
                net_last[i, j] = rounds + 1
