"""Norm-based complexity measures and normalized decision margins.

Operates on plain weight stacks (ordered layer matrices, optionally paired
with an initialization snapshot) so the same measures apply to trained
layered policies and to externally logged networks. The margin of a logged
decision is the gap between the taken action's logit and the best competing
logit, normalized by a Lipschitz-style capacity measure of the network times
the spectral norm of the state matrix over the record count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConsistencyError
from .linalg import as_matrix

__all__ = [
    "WeightStack",
    "DecisionRecord",
    "NormProducts",
    "MarginReport",
    "phi_frobenius_count",
    "phi_l1_count",
    "norm_products",
    "r_spectral_l1",
    "r_distance",
    "r_spectral_fro",
    "margin_distribution",
    "MARGIN_NORMALIZATIONS",
]

MARGIN_NORMALIZATIONS = ("spectral_l1", "distance", "spectral_fro", "identity")


@dataclass(frozen=True)
class WeightStack:
    """Ordered layer matrices W_1..W_d, optionally with their initial values."""

    layers: tuple[np.ndarray, ...]
    init: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        layers = tuple(as_matrix(m, f"layer {i}") for i, m in enumerate(self.layers))
        if not layers:
            raise ValueError("a weight stack needs at least one layer")
        for i in range(len(layers) - 1):
            if layers[i].shape[1] != layers[i + 1].shape[0]:
                raise ValueError(f"layers {i} and {i + 1} do not compose")
        object.__setattr__(self, "layers", layers)
        if self.init is not None:
            init = tuple(as_matrix(m, f"init {i}") for i, m in enumerate(self.init))
            if len(init) != len(layers):
                raise ValueError("init snapshot must have one matrix per layer")
            for i, (w, w0) in enumerate(zip(layers, init)):
                if w.shape != w0.shape:
                    raise ValueError(f"init {i} shape {w0.shape} != layer shape {w.shape}")
            object.__setattr__(self, "init", init)

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class DecisionRecord:
    """One logged decision: input state, action logits, index of the action taken."""

    state: np.ndarray = field(repr=False)
    logits: np.ndarray = field(repr=False)
    action: int

    def __post_init__(self):
        state = np.asarray(self.state, dtype=np.float64).ravel()
        logits = np.asarray(self.logits, dtype=np.float64).ravel()
        if state.size == 0:
            raise ValueError("state must be nonempty")
        if not (np.isfinite(state).all() and np.isfinite(logits).all()):
            raise ValueError("state and logits must be finite")
        if not 0 <= self.action < logits.size:
            raise ValueError(f"action {self.action} out of range for {logits.size} logits")
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "logits", logits)


def _spectral(m: np.ndarray) -> float:
    return float(np.linalg.svd(m, compute_uv=False)[0])


def _check_nonzero(stack: WeightStack) -> None:
    for i, w in enumerate(stack.layers):
        if not np.any(w):
            raise ValueError(f"layer {i} is the zero matrix; norm ratio undefined")


def phi_frobenius_count(stack: WeightStack) -> float:
    """Sum over layers of squared Frobenius over squared spectral norm.

    Each term is the layer's stable rank, between 1 and min(rows, cols).
    """
    _check_nonzero(stack)
    return float(sum(
        np.linalg.norm(w, "fro") ** 2 / _spectral(w) ** 2 for w in stack.layers
    ))


def phi_l1_count(stack: WeightStack, l1_kind: str = "entrywise") -> float:
    """Cube of the summed L1-to-spectral norm ratios.

    ``l1_kind`` selects the numerator: "entrywise" (sum of absolute entries)
    or "induced" (maximum absolute column sum).
    """
    _check_nonzero(stack)
    total = sum(_l1(w, l1_kind) / _spectral(w) for w in stack.layers)
    return float(total) ** 3


def _l1(w: np.ndarray, kind: str) -> float:
    if kind == "entrywise":
        return float(np.abs(w).sum())
    if kind == "induced":
        return float(np.abs(w).sum(axis=0).max())
    raise ValueError(f"unknown l1_kind {kind!r}")


class NormProducts(NamedTuple):
    spectral: float
    frobenius: float
    nuclear: float
    entrywise_l1: float


def norm_products(stack: WeightStack) -> NormProducts:
    """Per-norm products across layers.

    The spectral product upper-bounds the spectral norm of the composed
    product (submultiplicativity); that bound is verified and a violation
    beyond round-off raises :class:`ConsistencyError`.
    """
    spectral = frobenius = nuclear = l1 = 1.0
    composed = None
    for w in stack.layers:
        sv = np.linalg.svd(w, compute_uv=False)
        spectral *= float(sv[0])
        frobenius *= float(np.linalg.norm(w, "fro"))
        nuclear *= float(sv.sum())
        l1 *= float(np.abs(w).sum())
        composed = w if composed is None else composed @ w
    composed_spectral = _spectral(composed)
    if composed_spectral > spectral * (1.0 + 1e-9) + 1e-12:
        raise ConsistencyError(
            f"spectral product {spectral:.6e} below composed norm {composed_spectral:.6e}"
        )
    return NormProducts(spectral=spectral, frobenius=frobenius, nuclear=nuclear,
                        entrywise_l1=l1)


def r_spectral_l1(stack: WeightStack, l1_kind: str = "entrywise") -> float:
    """Spectral product times the 3/2-power of the summed (L1/spectral)^(2/3) ratios."""
    _check_nonzero(stack)
    prod = 1.0
    ratio_sum = 0.0
    for w in stack.layers:
        s = _spectral(w)
        prod *= s
        ratio_sum += (_l1(w, l1_kind) / s) ** (2.0 / 3.0)
    return prod * ratio_sum ** 1.5


def _require_init(stack: WeightStack, what: str) -> tuple[np.ndarray, ...]:
    if stack.init is None:
        raise ValueError(f"{what} requires the stack's initialization snapshot")
    return stack.init


def r_distance(stack: WeightStack) -> float:
    """Euclidean distance from initialization over the whole stack."""
    init = _require_init(stack, "distance measure")
    return float(np.sqrt(sum(
        np.linalg.norm(w - w0, "fro") ** 2 for w, w0 in zip(stack.layers, init)
    )))


def r_spectral_fro(stack: WeightStack) -> float:
    """sqrt(ln(d) * prod ||W_i||^2 * sum ||W_j - W_j0||_F^2 / ||W_j||^2).

    Zero for a single layer (ln 1 = 0).
    """
    init = _require_init(stack, "spectral-Frobenius measure")
    _check_nonzero(stack)
    d = stack.depth
    prod = 1.0
    ratio_sum = 0.0
    for w, w0 in zip(stack.layers, init):
        s = _spectral(w)
        prod *= s * s
        ratio_sum += np.linalg.norm(w - w0, "fro") ** 2 / (s * s)
    return float(np.sqrt(np.log(d) * prod * ratio_sum))


_R_MEASURES = {
    "spectral_l1": lambda stack: r_spectral_l1(stack),
    "distance": r_distance,
    "spectral_fro": r_spectral_fro,
}


@dataclass(frozen=True)
class MarginReport:
    margins: np.ndarray = field(repr=False)
    normalization: str
    capacity: float       # the R measure (1.0 for identity normalization)
    state_norm: float     # spectral norm of the stacked state matrix
    denominator: float    # capacity * state_norm / record count (1.0 for identity)
    mean: float
    q25: float
    median: float
    q75: float


def margin_distribution(records: Sequence[DecisionRecord], stack: WeightStack,
                        normalization: str = "spectral_l1") -> MarginReport:
    """Normalized margin of every logged decision, with summary statistics.

    The raw margin of a record is the taken action's logit minus the best
    other logit (negative when the taken action was outscored). For the
    named capacity measures the margins are divided by
    ``R * ||S||_2 / n`` where S stacks the states row-wise and n is the
    record count; the "identity" normalization leaves raw margins untouched.
    """
    if len(records) == 0:
        raise ValueError("at least one decision record is required")
    if normalization not in MARGIN_NORMALIZATIONS:
        raise ValueError(
            f"normalization must be one of {MARGIN_NORMALIZATIONS}, got {normalization!r}"
        )
    n_actions = records[0].logits.size
    if n_actions < 2:
        raise ValueError("margins need at least two actions")
    dim = records[0].state.size
    for i, rec in enumerate(records):
        if rec.logits.size != n_actions or rec.state.size != dim:
            raise ValueError(f"record {i} has inconsistent state/logit sizes")

    states = np.vstack([rec.state for rec in records])
    state_norm = float(np.linalg.svd(states, compute_uv=False)[0])
    if normalization == "identity":
        capacity = 1.0
        denom = 1.0
    else:
        capacity = float(_R_MEASURES[normalization](stack))
        denom = capacity * state_norm / len(records)
        if denom == 0:
            raise ValueError("margin denominator is zero; capacity measure vanished")

    raw = np.empty(len(records))
    for i, rec in enumerate(records):
        best_other = np.max(np.delete(rec.logits, rec.action))
        raw[i] = rec.logits[rec.action] - best_other
    margins = raw / denom
    q25, median, q75 = np.percentile(margins, [25.0, 50.0, 75.0])
    return MarginReport(
        margins=margins,
        normalization=normalization,
        capacity=capacity,
        state_norm=state_norm,
        denominator=float(denom),
        mean=float(margins.mean()),
        q25=float(q25),
        median=float(median),
        q75=float(q75),
    )
