"""Observation-projected level families over a base regulator.

A family fixes the base problem and a shared signal projection ``W_c``
(square orthogonal, n x n). Each level, identified by an integer theta,
adds its own noise projection ``W_theta`` (d_noise x n, orthonormal
columns) regenerated deterministically from ``hash(family_seed, theta)``.
The observation is the vertical stack ``[W_c; W_theta] s``, so a policy
matrix K acting on observations is equivalent to the state-space gain
``K [W_c; W_theta]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import as_matrix, sample_semi_orthogonal
from .lqr import LqrEval, LqrProblem, lqr_cost, lqr_cost_and_gradient, lqr_gradient
from .rng import SeededRng, derive_seed

__all__ = [
    "LevelFamily",
    "Level",
    "GapResult",
    "make_family",
    "get_level",
    "effective_policy",
    "level_cost",
    "level_gradient",
    "level_cost_and_gradient",
    "generalization_gap",
]


@dataclass(frozen=True)
class LevelFamily:
    base: LqrProblem
    w_c: np.ndarray = field(repr=False)
    d_signal: int
    d_noise: int
    family_seed: int

    @property
    def obs_dim(self) -> int:
        return self.d_signal + self.d_noise


@dataclass(frozen=True)
class Level:
    theta: int
    w_theta: np.ndarray = field(repr=False)
    stacked: np.ndarray = field(repr=False)


def make_family(base: LqrProblem, d_noise: int, family_seed: int) -> LevelFamily:
    """Build a family: signal dimension equals the state dimension n.

    Requires ``d_noise >= n`` so the noise projections can have orthonormal
    columns.
    """
    n = base.n
    if d_noise < n:
        raise ValueError(f"d_noise={d_noise} must be >= state dimension n={n}")
    w_c = sample_semi_orthogonal(SeededRng(derive_seed(family_seed, "signal")), n, n)
    return LevelFamily(base=base, w_c=w_c, d_signal=n, d_noise=d_noise,
                       family_seed=family_seed)


def get_level(family: LevelFamily, theta: int) -> Level:
    """Mint the level ``theta``; the same theta always yields the same level."""
    rng = SeededRng(derive_seed(family.family_seed, "level", theta))
    w_theta = sample_semi_orthogonal(rng, family.d_noise, family.d_signal)
    stacked = np.vstack([family.w_c, w_theta])
    return Level(theta=theta, w_theta=w_theta, stacked=stacked)


def effective_policy(level: Level, policy) -> np.ndarray:
    """State-space gain equivalent to the observation policy: K [W_c; W_theta]."""
    policy = as_matrix(policy, "policy")
    if policy.shape[1] != level.stacked.shape[0]:
        raise ValueError(
            f"policy has {policy.shape[1]} columns, observation dim is "
            f"{level.stacked.shape[0]}"
        )
    return policy @ level.stacked


def level_cost(level: Level, base: LqrProblem, policy) -> LqrEval:
    return lqr_cost(base, effective_policy(level, policy))


def level_gradient(level: Level, base: LqrProblem, policy) -> np.ndarray:
    """Gradient in the observation policy: grad_P C at the effective gain,
    chained through the stacked projection."""
    grad_state = lqr_gradient(base, effective_policy(level, policy))
    return grad_state @ level.stacked.T


def level_cost_and_gradient(level: Level, base: LqrProblem, policy):
    """(cost evaluation, gradient in K) in one pass; gradient is None if unstable."""
    ev, grad_state = lqr_cost_and_gradient(base, effective_policy(level, policy))
    if grad_state is None:
        return ev, None
    return ev, grad_state @ level.stacked.T


@dataclass(frozen=True)
class GapResult:
    train_cost: float
    test_cost: float
    gap: float
    unstable_train: int
    unstable_test: int

    @property
    def clean(self) -> bool:
        """True when no level in either set was unstable."""
        return self.unstable_train == 0 and self.unstable_test == 0


def _mean_cost(family: LevelFamily, policy, thetas: Sequence[int]) -> tuple[float, int]:
    costs = []
    unstable = 0
    for theta in thetas:
        ev = level_cost(get_level(family, theta), family.base, policy)
        if not ev.stable:
            unstable += 1
        costs.append(ev.cost)
    return float(np.mean(costs)), unstable


def generalization_gap(family: LevelFamily, policy, train_thetas: Sequence[int],
                       test_thetas: Sequence[int]) -> GapResult:
    """Mean train cost, mean held-out cost, and their difference.

    ``gap = test_cost - train_cost``; in cost convention a positive gap
    means overfitting. An unstable level contributes ``+inf`` to its mean
    and is counted in the corresponding unstable field.
    """
    if len(train_thetas) == 0 or len(test_thetas) == 0:
        raise ValueError("train_thetas and test_thetas must both be nonempty")
    train_cost, unstable_train = _mean_cost(family, policy, train_thetas)
    test_cost, unstable_test = _mean_cost(family, policy, test_thetas)
    return GapResult(
        train_cost=train_cost,
        test_cost=test_cost,
        gap=test_cost - train_cost,
        unstable_train=unstable_train,
        unstable_test=unstable_test,
    )
