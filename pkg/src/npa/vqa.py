"""Vector-quantized attention: codebook lookup and context estimation.

A unit holds a table of trainable combination-pattern vectors (the
codebook) and two attention stages. Stage one scores every item of a
basket prefix against the codebook and averages the per-item
distributions into a prefix-level pattern belief. Stage two turns an
extracted pattern vector into a query over the prefix items and mixes
their value vectors into a context vector: roughly, what the prefix is
still missing to complete the pattern.

The module exposes both the step-by-step operations on a single prefix
(used directly in tests and for attention inspection) and a vectorized
form that evaluates every causal prefix of a sequence in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

GREEDY = "greedy"
WEIGHTED_AVERAGE = "weighted_average"
SAMPLING = "sampling"
_KINDS = (GREEDY, WEIGHTED_AVERAGE, SAMPLING)

__all__ = [
    "Codebook",
    "ExtractionStrategy",
    "PatternBelief",
    "VqaParams",
    "UnitState",
    "aggregate_attention",
    "estimate_context",
    "extract_pattern",
    "init_vqa_params",
    "pattern_attention",
    "prefix_mean_matrix",
    "project_items",
    "sample_pattern_index",
    "unit_forward",
    "unit_forward_prefix",
]


@dataclass
class Codebook:
    """Trainable combination-pattern embeddings, one row per pattern."""

    entries: Tensor

    @property
    def num_patterns(self) -> int:
        return self.entries.shape[0]

    @property
    def pattern_dim(self) -> int:
        return self.entries.shape[1]


@dataclass
class ExtractionStrategy:
    """How a pattern vector is pulled out of the belief distribution.

    greedy takes the argmax codebook row (ties to the lowest index),
    weighted_average takes the belief-weighted mix of all rows, and
    sampling draws a row by Gumbel-max over the log belief at the given
    temperature (temperature 1 is exact categorical sampling).
    """

    kind: str = WEIGHTED_AVERAGE
    gumbel_temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown extraction kind {self.kind!r}")
        if self.gumbel_temperature <= 0:
            raise ValueError("gumbel_temperature must be positive")


@dataclass
class VqaParams:
    """Parameter group of one unit.

    w_query/w_key/w_value project item vectors; w_pattern_key projects
    codebook rows to the key space matched against item queries;
    w_context_query projects an extracted pattern to the query used to
    highlight prefix items.
    """

    w_query: Tensor
    w_key: Tensor
    w_value: Tensor
    w_pattern_key: Tensor
    w_context_query: Tensor
    codebook: Codebook

    def __post_init__(self):
        d_q = self.w_query.shape[0]
        if self.w_pattern_key.shape[0] != d_q:
            raise ValueError(
                f"query dim {d_q} != pattern-key dim {self.w_pattern_key.shape[0]}")
        if self.w_context_query.shape[0] != self.w_key.shape[0]:
            raise ValueError(
                f"context-query dim {self.w_context_query.shape[0]} != key dim {self.w_key.shape[0]}")
        p = self.codebook.pattern_dim
        if self.w_pattern_key.shape[1] != p or self.w_context_query.shape[1] != p:
            raise ValueError("pattern projections do not match codebook width")

    def named(self, prefix: str):
        yield f"{prefix}.w_query", self.w_query
        yield f"{prefix}.w_key", self.w_key
        yield f"{prefix}.w_value", self.w_value
        yield f"{prefix}.w_pattern_key", self.w_pattern_key
        yield f"{prefix}.w_context_query", self.w_context_query
        yield f"{prefix}.codebook", self.codebook.entries


@dataclass
class PatternBelief:
    """Per-item and aggregated pattern-attention distributions."""

    per_item_attention: Tensor
    basket_attention: Tensor


@dataclass
class UnitState:
    """Everything a unit produced for one sequence, one row per step.

    contexts[t] is the context of the prefix up to and including step t.
    prefix_attention[t] is the pattern belief of that prefix;
    item_attention holds the raw per-item distributions it was averaged
    from, and context_attention[t, :t+1] the in-prefix item weights.
    pattern_index/pattern_logprob are set only for index-based extraction
    (greedy records indices; sampling also records log belief values).
    """

    contexts: Tensor
    item_attention: Tensor
    prefix_attention: Tensor
    context_attention: Tensor
    pattern_index: np.ndarray | None = None
    pattern_logprob: Tensor | None = None


def init_vqa_params(rng: np.random.Generator, input_dim: int, attn_dim: int,
                    value_dim: int, num_patterns: int,
                    pattern_dim: int | None = None) -> VqaParams:
    """Fresh unit parameters; projections use std 1/sqrt(fan_in)."""
    if pattern_dim is None:
        pattern_dim = attn_dim

    def proj(rows, cols):
        return Tensor(rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols)),
                      requires_grad=True)

    codebook = Codebook(Tensor(
        rng.normal(0.0, 1.0 / np.sqrt(pattern_dim), size=(num_patterns, pattern_dim)),
        requires_grad=True))
    return VqaParams(
        w_query=proj(attn_dim, input_dim),
        w_key=proj(attn_dim, input_dim),
        w_value=proj(value_dim, input_dim),
        w_pattern_key=proj(attn_dim, pattern_dim),
        w_context_query=proj(attn_dim, pattern_dim),
        codebook=codebook,
    )


def project_items(item_vectors, params: VqaParams):
    """Per-item query, key, and value rows: X W_q^T, X W_k^T, X W_v^T."""
    x = item_vectors if isinstance(item_vectors, Tensor) else Tensor(item_vectors)
    if x.data.ndim != 2 or x.shape[0] == 0:
        raise T.ShapeError(f"project_items: expected non-empty item matrix, got {x.data.shape}")
    q = T.matmul(x, T.transpose(params.w_query))
    k = T.matmul(x, T.transpose(params.w_key))
    v = T.matmul(x, T.transpose(params.w_value))
    return q, k, v


def pattern_attention(q, params: VqaParams, keep_mask=None) -> Tensor:
    """Distribution over codebook entries for every item row of q.

    keep_mask, when given, drops codebook entries out of each row's
    softmax (the renormalizing form of attention dropout), so the output
    rows remain proper distributions.
    """
    if params.codebook.num_patterns == 0:
        raise T.ShapeError("pattern_attention: empty codebook")
    keys = T.matmul(params.codebook.entries, T.transpose(params.w_pattern_key))
    d = q.shape[1]
    logits = T.scale(T.matmul(q, T.transpose(keys)), 1.0 / np.sqrt(d))
    return T.softmax(logits, mask=keep_mask)


def aggregate_attention(per_item_attention, mask=None) -> Tensor:
    """Mean of the unmasked per-item distributions."""
    a = per_item_attention if isinstance(per_item_attention, Tensor) else Tensor(per_item_attention)
    n = a.shape[0]
    if mask is None:
        mask = np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise T.ShapeError(f"aggregate_attention: mask shape {mask.shape} for {n} items")
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("aggregate_attention: empty basket prefix")
    # Canonical summation: shuffling the rows leaves the mean bit-identical.
    return T.mean_rows_canonical(a, idx)


def sample_pattern_index(belief_values: np.ndarray, temperature: float,
                         rng: np.random.Generator) -> int:
    """Gumbel-max draw from a categorical belief; exact at temperature 1."""
    with np.errstate(divide="ignore"):
        logp = np.log(belief_values)
    g = -np.log(-np.log(rng.random(belief_values.shape)))
    return int(np.argmax(logp / temperature + g))


def extract_pattern(belief: PatternBelief, codebook: Codebook,
                    strategy: ExtractionStrategy,
                    rng: np.random.Generator | None = None) -> Tensor:
    """Pull one pattern vector out of the belief, per the strategy."""
    abar = belief.basket_attention
    if strategy.kind == WEIGHTED_AVERAGE:
        row = T.reshape(abar, (1, abar.shape[0]))
        return T.reshape(T.matmul(row, codebook.entries), (codebook.pattern_dim,))
    if strategy.kind == GREEDY:
        i = int(np.argmax(abar.data))
    else:
        if rng is None:
            raise ValueError("sampling extraction needs a random generator")
        i = sample_pattern_index(abar.data, strategy.gumbel_temperature, rng)
    return T.reshape(T.gather_rows(codebook.entries, np.array([i])), (codebook.pattern_dim,))


def estimate_context(z, keys, values, mask, params: VqaParams) -> Tensor:
    """Context vector of a prefix given an extracted pattern z.

    The pattern is projected to a query, scored against the unmasked item
    keys (scaled by sqrt of the query width), and the resulting weights
    mix the item value rows. Masked items get exactly zero weight.
    """
    n = keys.shape[0]
    if mask is None:
        mask = np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("estimate_context: empty basket prefix")
    z_row = T.reshape(z, (1, z.shape[0]))
    rho = T.matmul(z_row, T.transpose(params.w_context_query))
    d = rho.shape[1]
    logits = T.scale(T.matmul(rho, T.transpose(keys)), 1.0 / np.sqrt(d))
    weights = T.softmax(logits, mask=mask[None, :])
    ctx = T.matmul(weights, values)
    return T.reshape(ctx, (values.shape[1],))


def unit_forward_prefix(item_vectors, params: VqaParams,
                        strategy: ExtractionStrategy, mask=None,
                        rng: np.random.Generator | None = None):
    """Run one unit over a single prefix; returns (context, belief)."""
    q, k, v = project_items(item_vectors, params)
    a = pattern_attention(q, params)
    abar = aggregate_attention(a, mask)
    belief = PatternBelief(per_item_attention=a, basket_attention=abar)
    z = extract_pattern(belief, params.codebook, strategy, rng)
    return estimate_context(z, k, v, mask, params), belief


def prefix_mean_matrix(n: int) -> np.ndarray:
    """Lower-triangular matrix whose row t averages rows 0..t."""
    m = np.tril(np.ones((n, n)))
    return m / np.arange(1, n + 1)[:, None]


def unit_forward(inputs: Tensor, params: VqaParams, strategy: ExtractionStrategy,
                 rng: np.random.Generator | None = None,
                 attn_dropout: float = 0.0,
                 drop_rng: np.random.Generator | None = None) -> UnitState:
    """Evaluate the unit on every causal prefix of a sequence at once.

    Row t of every output concerns the prefix of steps 0..t. The prefix
    pattern belief is the running mean of the per-item distributions; the
    context attention row t is masked to items <= t. attn_dropout, when
    nonzero, randomly drops codebook entries out of each item's softmax
    (training only); the rows renormalize so beliefs stay distributions.
    """
    n = inputs.shape[0]
    q, k, v = project_items(inputs, params)
    keep = None
    if attn_dropout > 0:
        keep = drop_rng.random((n, params.codebook.num_patterns)) >= attn_dropout
        keep[~keep.any(axis=1)] = True  # never empty a row
    a = pattern_attention(q, params, keep_mask=keep)
    abar = T.matmul(Tensor(prefix_mean_matrix(n)), a)

    idx = None
    logprob = None
    if strategy.kind == WEIGHTED_AVERAGE:
        z = T.matmul(abar, params.codebook.entries)
    else:
        if strategy.kind == GREEDY:
            idx = np.argmax(abar.data, axis=1)
        else:
            if rng is None:
                raise ValueError("sampling extraction needs a random generator")
            with np.errstate(divide="ignore"):
                logp = np.log(abar.data)
            g = -np.log(-np.log(rng.random(abar.data.shape)))
            idx = np.argmax(logp / strategy.gumbel_temperature + g, axis=1)
            logprob = T.log(T.take_per_row(abar, idx))
        z = T.gather_rows(params.codebook.entries, idx)

    rho = T.matmul(z, T.transpose(params.w_context_query))
    d = rho.shape[1]
    logits = T.scale(T.matmul(rho, T.transpose(k)), 1.0 / np.sqrt(d))
    b = T.softmax(logits, mask=np.tril(np.ones((n, n), dtype=bool)))
    contexts = T.matmul(b, v)
    return UnitState(contexts=contexts, item_attention=a, prefix_attention=abar,
                     context_attention=b, pattern_index=idx, pattern_logprob=logprob)
