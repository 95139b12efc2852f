"""Linear policies factored into layer products, and their trainer.

A ``LayeredPolicy`` is an ordered list of matrices whose left-to-right
product is the end-to-end policy. Factoring changes nothing about what the
policy can express; it changes the gradient-descent dynamics, which is the
effect under study. Training is plain full-batch gradient descent with all
layers updated simultaneously from the chain-rule gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import TrainingDivergedError
from .linalg import as_matrix, sample_gaussian, sample_semi_orthogonal
from .rng import SeededRng

__all__ = ["LayeredPolicy", "TrainConfig", "init_policy", "compose",
           "layer_gradients", "train"]

# Objective contract: maps the composed policy matrix to (cost, gradient).
# The gradient may be None when the cost is non-finite.
Objective = Callable[[np.ndarray], tuple[float, np.ndarray | None]]

_INIT_KINDS = ("orthogonal", "gaussian", "zero")


@dataclass(frozen=True)
class LayeredPolicy:
    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        layers = tuple(as_matrix(m, f"layer {i}") for i, m in enumerate(self.layers))
        if not layers:
            raise ValueError("a policy needs at least one layer")
        for i in range(len(layers) - 1):
            if layers[i].shape[1] != layers[i + 1].shape[0]:
                raise ValueError(
                    f"layer {i} has {layers[i].shape[1]} columns but layer "
                    f"{i + 1} has {layers[i + 1].shape[0]} rows"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.layers[0].shape[0], self.layers[-1].shape[1])


@dataclass(frozen=True)
class TrainConfig:
    step_size: float
    max_steps: int
    grad_tol: float = 1e-8
    init_scale: float = 0.5
    init_kind: str = "orthogonal"

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")
        if self.init_kind not in _INIT_KINDS:
            raise ValueError(f"init_kind must be one of {_INIT_KINDS}")


def _init_layer(rows: int, cols: int, cfg: TrainConfig, rng: SeededRng) -> np.ndarray:
    if cfg.init_kind == "zero":
        return np.zeros((rows, cols))
    if cfg.init_kind == "gaussian":
        return sample_gaussian(rng, rows, cols, cfg.init_scale)
    # Orthogonal: wide layers are sampled transposed so the orthonormality
    # holds on the short side and all singular values equal init_scale.
    if rows >= cols:
        return sample_semi_orthogonal(rng, rows, cols, cfg.init_scale)
    return sample_semi_orthogonal(rng, cols, rows, cfg.init_scale).T


def init_policy(shapes: Sequence[tuple[int, int]], cfg: TrainConfig,
                rng: SeededRng) -> LayeredPolicy:
    """Sample a policy with the given layer shapes per the config's init rule."""
    return LayeredPolicy(tuple(_init_layer(r, c, cfg, rng) for r, c in shapes))


def compose(policy: LayeredPolicy) -> np.ndarray:
    """Left-to-right product of the layers: the end-to-end policy matrix."""
    out = policy.layers[0]
    for layer in policy.layers[1:]:
        out = out @ layer
    return out


def layer_gradients(policy: LayeredPolicy, end_to_end_grad) -> list[np.ndarray]:
    """Chain-rule gradients per layer from the gradient at the composed policy.

    For layer i the gradient is ``prefix^T G suffix^T`` where prefix and
    suffix are the products of the layers before and after i (identity when
    empty).
    """
    g = as_matrix(end_to_end_grad, "end_to_end_grad")
    if g.shape != policy.shape:
        raise ValueError(
            f"gradient shape {g.shape} does not match composed shape {policy.shape}"
        )
    layers = policy.layers
    d = len(layers)
    prefixes: list[np.ndarray | None] = [None] * d
    for i in range(1, d):
        prev = prefixes[i - 1]
        prefixes[i] = layers[i - 1] if prev is None else prev @ layers[i - 1]
    suffixes: list[np.ndarray | None] = [None] * d
    for i in range(d - 2, -1, -1):
        nxt = suffixes[i + 1]
        suffixes[i] = layers[i + 1] if nxt is None else layers[i + 1] @ nxt
    grads = []
    for i in range(d):
        gi = g if prefixes[i] is None else prefixes[i].T @ g
        gi = gi if suffixes[i] is None else gi @ suffixes[i].T
        grads.append(gi)
    return grads


def train(policy: LayeredPolicy, objective: Objective, cfg: TrainConfig,
          log_interval: int = 100) -> tuple[LayeredPolicy, list[tuple[int, float, float]]]:
    """Full-batch gradient descent on all layers simultaneously.

    Stops when the joint gradient norm (root-sum-square of the per-layer
    Frobenius norms) drops below ``cfg.grad_tol`` or after ``cfg.max_steps``
    updates. The trace records ``(step, cost, grad_norm)`` every
    ``log_interval`` evaluations and at the final point; the input policy is
    not mutated.

    Raises :class:`TrainingDivergedError`, carrying the trace collected so
    far, if the cost becomes non-finite.
    """
    layers = [m.copy() for m in policy.layers]
    trace: list[tuple[int, float, float]] = []
    for step in range(cfg.max_steps + 1):
        current = LayeredPolicy(tuple(layers))
        cost, grad = objective(compose(current))
        if not np.isfinite(cost):
            raise TrainingDivergedError(
                f"cost became non-finite at step {step}", trace=trace
            )
        grads = layer_gradients(current, grad)
        grad_norm = float(np.sqrt(sum(np.linalg.norm(g, "fro") ** 2 for g in grads)))
        if step % log_interval == 0 or step == cfg.max_steps or grad_norm < cfg.grad_tol:
            trace.append((step, cost, grad_norm))
        if grad_norm < cfg.grad_tol or step == cfg.max_steps:
            return current, trace
        for i in range(len(layers)):
            layers[i] = layers[i] - cfg.step_size * grads[i]
    raise AssertionError("unreachable")
