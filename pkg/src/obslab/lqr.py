"""Infinite-horizon discrete-time linear-quadratic regulator.

State evolves as ``x_{t+1} = A x_t + B u_t`` with action ``u_t = -P x_t``
and per-step cost ``x^T Q x + u^T R u``. For a stabilizing gain P, the cost
matrix ``P_K`` solves the discrete Lyapunov recursion

    P_K = Q + P^T R P + (A - B P)^T P_K (A - B P)

and the total expected cost is ``trace(P_K Sigma0)`` where ``Sigma0`` is the
second moment of the initial state. Both the cost and its exact gradient in
P are computed from two Lyapunov solves sharing one factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnstableSystemError
from .linalg import _DlyapFactor, as_matrix, sample_semi_orthogonal, spectral_radius
from .rng import SeededRng

__all__ = ["LqrProblem", "LqrEval", "default_problem", "make_problem", "lqr_cost",
           "lqr_gradient", "lqr_cost_and_gradient"]

_SYM_TOL = 1e-12


def _check_symmetric(m: np.ndarray, name: str) -> None:
    if np.abs(m - m.T).max() > _SYM_TOL * max(1.0, np.abs(m).max()):
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True)
class LqrProblem:
    """System matrices (A, B, Q, R) and initial-state covariance Sigma0.

    All five blocks are n x n; Q, R, Sigma0 must be symmetric and R must be
    positive definite.
    """

    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray
    sigma0: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError(f"A must be square, got {a.shape}")
        for name in ("b", "q", "r", "sigma0"):
            m = as_matrix(getattr(self, name), name.upper())
            if m.shape != (n, n):
                raise ValueError(f"{name.upper()} must be {n}x{n}, got {m.shape}")
            object.__setattr__(self, name, m)
        object.__setattr__(self, "a", a)
        for name in ("q", "r", "sigma0"):
            _check_symmetric(getattr(self, name), name.upper())
        if np.linalg.eigvalsh(self.r).min() <= 0:
            raise ValueError("R must be positive definite")

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class LqrEval:
    """Result of evaluating one policy on one problem.

    ``cost`` is ``trace(P_K Sigma0)`` when the closed loop is stable and
    ``+inf`` otherwise; the matrices are ``None`` for unstable policies.
    """

    cost: float
    stable: bool
    value_matrix: np.ndarray | None = field(repr=False, default=None)
    state_covariance: np.ndarray | None = field(repr=False, default=None)


_UNSTABLE = None  # sentinel placeholder, see lqr_cost


def make_problem(rng: SeededRng, n: int, a_scale: float) -> LqrProblem:
    """Random system: A is Haar-orthogonal scaled by ``a_scale``; B, Q, R,
    Sigma0 are the identity. Scales below 1 make the open loop stable."""
    a = sample_semi_orthogonal(rng, n, n, scale=a_scale)
    eye = np.eye(n)
    return LqrProblem(a=a, b=eye, q=eye, r=eye, sigma0=eye)


def default_problem(rng: SeededRng) -> LqrProblem:
    """The standard 10-dimensional test system (A scaled to 0.99)."""
    return make_problem(rng, n=10, a_scale=0.99)


def _evaluate(problem: LqrProblem, policy: np.ndarray, want_gradient: bool):
    n = problem.n
    policy = as_matrix(policy, "policy")
    if policy.shape != (n, n):
        raise ValueError(f"policy must be {n}x{n}, got {policy.shape}")
    acl = problem.a - problem.b @ policy
    if spectral_radius(acl) >= 1.0:
        return LqrEval(cost=np.inf, stable=False), None
    factor = _DlyapFactor(acl)
    pk = factor.solve(problem.q + policy.T @ problem.r @ policy)
    cost = float(np.trace(pk @ problem.sigma0))
    sigma = factor.solve_adjoint(problem.sigma0)
    ev = LqrEval(cost=cost, stable=True, value_matrix=pk, state_covariance=sigma)
    if not want_gradient:
        return ev, None
    bt_pk = problem.b.T @ pk
    grad = 2.0 * ((problem.r + bt_pk @ problem.b) @ policy - bt_pk @ problem.a) @ sigma
    return ev, grad


def lqr_cost(problem: LqrProblem, policy) -> LqrEval:
    """Exact infinite-horizon cost of the state-feedback gain ``policy``.

    Instability is a result state, not an error: the returned evaluation has
    ``stable=False`` and infinite cost, so sweeps can record divergent runs.
    """
    ev, _ = _evaluate(problem, policy, want_gradient=False)
    return ev


def lqr_gradient(problem: LqrProblem, policy) -> np.ndarray:
    """Exact cost gradient 2[(R + B^T P_K B) P - B^T P_K A] Sigma_P.

    Raises :class:`UnstableSystemError` for an unstable policy, where the
    cost (and hence its gradient) is undefined.
    """
    ev, grad = _evaluate(problem, policy, want_gradient=True)
    if not ev.stable:
        raise UnstableSystemError("policy does not stabilize the system")
    return grad


def lqr_cost_and_gradient(problem: LqrProblem, policy) -> tuple[LqrEval, np.ndarray | None]:
    """Cost and gradient in one pass, sharing the Lyapunov factorization.

    For an unstable policy returns the infinite-cost evaluation and ``None``.
    """
    return _evaluate(problem, policy, want_gradient=True)
