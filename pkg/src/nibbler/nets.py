"""Dense single-hidden-layer numerics shared by all learners.

Three primitives live here: a rectifier layer with exact hand-derived
gradients (`DenseNet`), the momentum co-optimizer (`co_opt`), and targeted
reinitialization of single input columns. Everything is float64.

Weight snapshots serialize to a flat float64 vector, laid out as
``[input_weights row-major, input_bias]`` (see `net_to_flat`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# co_opt applies the velocity in the descent direction: the caller passes
# dL/dw of a loss to be minimized and the weights move against it.
DESCENT_SIGN = -1.0


@dataclass
class DenseNet:
    """hidden = max(0, W x + b), with W of shape (hidden_dim, input_dim)."""

    input_weights: np.ndarray
    input_bias: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.input_weights.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.input_weights.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected input of shape ({self.input_dim},), got {x.shape}")
        return np.maximum(self.input_weights @ x + self.input_bias, 0.0)

    def backward(
        self, x: np.ndarray, upstream_grad: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gradients of upstream_grad.hidden(x) w.r.t. (W, b, x).

        The rectifier subgradient is 0 at exactly 0.
        """
        pre = self.input_weights @ x + self.input_bias
        dpre = np.where(pre > 0.0, upstream_grad, 0.0)
        return np.outer(dpre, x), dpre, self.input_weights.T @ dpre


@dataclass
class DenseMomentum:
    """Velocity state matching a DenseNet's parameter shapes."""

    weights: np.ndarray
    bias: np.ndarray


def init_scale(input_dim: int) -> float:
    return 1.0 / np.sqrt(input_dim)


def init_dense(
    input_dim: int, hidden_dim: int, rng: np.random.Generator
) -> tuple[DenseNet, DenseMomentum]:
    """Weights ~ Uniform(-1/sqrt(input_dim), +1/sqrt(input_dim)), bias and velocity 0."""
    if input_dim < 1 or hidden_dim < 1:
        raise ValueError("input_dim and hidden_dim must be >= 1")
    s = init_scale(input_dim)
    net = DenseNet(
        input_weights=rng.uniform(-s, s, size=(hidden_dim, input_dim)),
        input_bias=np.zeros(hidden_dim),
    )
    momentum = DenseMomentum(
        weights=np.zeros((hidden_dim, input_dim)),
        bias=np.zeros(hidden_dim),
    )
    return net, momentum


def co_opt(
    w: np.ndarray,
    alpha: float,
    grad: np.ndarray,
    velocity: np.ndarray,
    nu: float,
) -> tuple[np.ndarray, np.ndarray]:
    """velocity <- nu*velocity + (1-nu)*grad; w <- w + DESCENT_SIGN*alpha*velocity.

    Mutates w and velocity in place and returns them. With nu=0 this is plain
    SGD: w <- w - alpha*grad.
    """
    velocity *= nu
    velocity += (1.0 - nu) * grad
    w += (DESCENT_SIGN * alpha) * velocity
    return w, velocity


def reinit_input_column(
    net: DenseNet, momentum: DenseMomentum, pos: int, rng: np.random.Generator
) -> None:
    """Redraw input column `pos` from the init distribution; zero its velocity."""
    if not 0 <= pos < net.input_dim:
        raise IndexError(f"column {pos} out of range for input_dim {net.input_dim}")
    s = init_scale(net.input_dim)
    net.input_weights[:, pos] = rng.uniform(-s, s, size=net.hidden_dim)
    momentum.weights[:, pos] = 0.0


def net_to_flat(net: DenseNet) -> np.ndarray:
    """Flat float64 snapshot: [input_weights row-major, input_bias]."""
    return np.concatenate([net.input_weights.ravel(order="C"), net.input_bias])


def net_from_flat(flat: np.ndarray, input_dim: int, hidden_dim: int) -> DenseNet:
    expected = hidden_dim * input_dim + hidden_dim
    if flat.shape != (expected,):
        raise ValueError(f"expected flat vector of length {expected}, got {flat.shape}")
    w = flat[: hidden_dim * input_dim].reshape(hidden_dim, input_dim).copy()
    b = flat[hidden_dim * input_dim :].copy()
    return DenseNet(input_weights=w, input_bias=b)
