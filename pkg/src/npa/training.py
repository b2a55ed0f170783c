"""Training objectives and the training loop.

The autoregressive objective scores each item of a sequence given the
context of its predecessors; one forward pass with causal masks yields
every step at once. The per-step, per-context score is

    log p(item | context) + log p(context | prefix)

where the second term is exactly zero for deterministic extraction and
the log belief of the sampled codebook row for Gumbel-sampled contexts.
The single-context loss averages that score over steps; the multi-context
loss max-pools it over the sampled contexts first, so with one context
the two losses coincide identically.

Two data modes: temporal keeps the recorded add order and learned
positions; any_order samples fresh random permutations of each basket
every epoch and skips position encoding, so the model converges toward
order-invariant conditionals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import model as npa_model
from . import tensor as T
from .errors import ConfigError
from .optim import AdamW, clip_grad_norm
from .tensor import Tensor

TEMPORAL = "temporal"
ANY_ORDER = "any_order"

__all__ = [
    "ANY_ORDER",
    "LossReport",
    "TEMPORAL",
    "TrainConfig",
    "batch_loss",
    "loss_ar",
    "loss_mc",
    "sample_permutation",
    "sequence_scores",
    "train",
]


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 256
    learning_rate: float = 3e-4
    permutations_per_basket: int = 1
    mode: str = TEMPORAL
    seed: int = 0
    gradient_clip_norm: float | None = None
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.mode not in (TEMPORAL, ANY_ORDER):
            raise ConfigError(f"mode must be temporal or any_order, got {self.mode!r}")
        if self.mode == ANY_ORDER and self.permutations_per_basket < 1:
            raise ConfigError("permutations_per_basket must be >= 1 in any_order mode")
        if self.mode == TEMPORAL and self.permutations_per_basket != 1:
            raise ConfigError("temporal mode forbids permutation sampling")
        if self.gradient_clip_norm is not None and self.gradient_clip_norm <= 0:
            raise ConfigError("gradient_clip_norm must be positive when set")


@dataclass
class LossReport:
    epoch: int
    mean_nll: float
    per_length_nll: dict = field(default_factory=dict)
    seconds: float = 0.0
    num_sequences: int = 0
    num_steps: int = 0


def sample_permutation(basket_items, rng: np.random.Generator):
    """Uniform random order of a basket, or None for undersized baskets.

    Baskets shorter than two items carry no conditional to learn (the
    objective sums from the second step), so they signal a skip.
    """
    items = np.asarray(basket_items)
    if items.size < 2:
        return None
    return items[rng.permutation(items.size)]


def sequence_scores(seq, config, params, rng=None, training=False,
                    use_positions=None):
    """Per-step, per-context log scores for one sequence.

    Returns (scores, state) where scores is a list with one 1-d tensor of
    length len(seq)-1 per prediction context; entry t of each tensor
    scores item t+1 given the step-t context.
    """
    seq = [int(i) for i in seq]
    if len(seq) < 2:
        raise ConfigError("sequence_scores: need at least two items")
    state = npa_model.forward(seq, config, params, rng_seed=rng,
                              training=training, use_positions=use_positions)
    emb = npa_model.output_embeddings(params)
    targets = np.asarray(seq[1:], dtype=np.int64)
    n = len(seq) - 1
    prefix_rows = np.arange(n)
    scores = []
    for ctx, logprob in zip(state.contexts, state.pattern_logprobs):
        used = T.gather_rows(ctx, prefix_rows)
        logits = T.matmul(used, T.transpose(emb))
        nll = T.cross_entropy_with_logits(logits, targets)
        score = T.scale(nll, -1.0)
        if logprob is not None:
            lp = T.reshape(logprob, (logprob.shape[0], 1))
            lp = T.reshape(T.gather_rows(lp, prefix_rows), (n,))
            score = T.add(score, lp)
        scores.append(score)
    return scores, state


def _sequence_rows(batch, config, params, rng, training, use_positions,
                   max_pool: bool):
    """One score row per sequence; multi-context rows are max-pooled."""
    rows = []
    for seq in batch:
        scores, _ = sequence_scores(seq, config, params, rng=rng,
                                    training=training, use_positions=use_positions)
        if len(scores) == 1:
            rows.append(scores[0])
            continue
        if not max_pool:
            raise ConfigError(
                f"loss_ar expects a single context per step, model yields {len(scores)}")
        cols = [T.reshape(s, (s.shape[0], 1)) for s in scores]
        table = T.concat(cols, axis=1)  # (steps, contexts)
        best = np.argmax(table.data, axis=1)
        rows.append(T.take_per_row(table, best))
    return rows


def _neg_mean(rows) -> Tensor:
    parts = [T.reshape(r, (1, r.shape[0])) for r in rows]
    flat = parts[0] if len(parts) == 1 else T.concat(parts, axis=1)
    return T.scale(T.mean(flat), -1.0)


def loss_ar(batch, config, params, rng=None, training=False,
            use_positions=None) -> Tensor:
    """Mean negative per-step score over a batch, single-context models.

    Applies to any model that yields exactly one context per step (SC
    always, MC when it has a single head).
    """
    rows = _sequence_rows(batch, config, params, rng, training, use_positions,
                          max_pool=False)
    return _neg_mean(rows)


def loss_mc(batch, config, params, rng=None, training=False,
            use_positions=None) -> Tensor:
    """Multi-context loss: per step, keep only the best-scoring context."""
    rows = _sequence_rows(batch, config, params, rng, training, use_positions,
                          max_pool=True)
    return _neg_mean(rows)


def batch_loss(batch, config, params, rng=None, training=False,
               use_positions=None):
    """Variant dispatch; returns (loss, per-sequence mean NLL floats)."""
    rows = _sequence_rows(batch, config, params, rng, training, use_positions,
                          max_pool=config.variant == npa_model.VARIANT_MC)
    details = [-float(np.mean(r.data)) for r in rows]
    return _neg_mean(rows), details


def train(baskets, config, params, train_config: TrainConfig, log=None,
          optimizer: AdamW | None = None):
    """Seeded training loop; returns (params, list of LossReport).

    Baskets shorter than two items are dropped. In any_order mode each
    basket contributes permutations_per_basket fresh orderings per epoch
    and positions are skipped; temporal mode requires positions. An
    optimizer may be passed in (e.g. to persist its moments afterwards);
    by default a fresh AdamW over the model parameters is built.
    """
    if not baskets:
        raise ConfigError("train: empty dataset")
    if train_config.mode == TEMPORAL and not config.use_positions:
        raise ConfigError("temporal training requires use_positions=true")
    if train_config.mode == ANY_ORDER and config.use_positions:
        raise ConfigError("any_order training requires use_positions=false")

    rng = np.random.default_rng(train_config.seed)
    if optimizer is None:
        optimizer = AdamW(npa_model.trainable_parameters(params, config),
                          lr=train_config.learning_rate,
                          weight_decay=train_config.weight_decay)
    usable = [np.asarray(b.items if hasattr(b, "items") else b, dtype=np.int64)
              for b in baskets]
    usable = [b for b in usable if b.size >= 2]
    if not usable:
        raise ConfigError("train: every basket is shorter than two items")

    reports = []
    for epoch in range(1, train_config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(usable))
        total_nll = 0.0
        total_steps = 0
        total_seqs = 0
        by_length = {}
        for start in range(0, len(order), train_config.batch_size):
            chunk = order[start:start + train_config.batch_size]
            batch = []
            for bi in chunk:
                items = usable[bi]
                if train_config.mode == ANY_ORDER:
                    for _ in range(train_config.permutations_per_basket):
                        batch.append(sample_permutation(items, rng))
                else:
                    batch.append(items)
            loss, details = batch_loss(batch, config, params, rng=rng,
                                       training=True,
                                       use_positions=config.use_positions)
            if not np.isfinite(loss.data):
                raise FloatingPointError(
                    f"non-finite loss in epoch {epoch}, batch starting at {start}")
            T.backward(loss)
            if train_config.gradient_clip_norm is not None:
                clip_grad_norm(optimizer.params, train_config.gradient_clip_norm)
            optimizer.step()
            optimizer.zero_grad()

            for s, nll in zip(batch, details):
                steps = len(s) - 1
                acc = by_length.setdefault(len(s), [0.0, 0])
                acc[0] += nll * steps
                acc[1] += steps
                total_nll += nll * steps
                total_steps += steps
            total_seqs += len(batch)

        report = LossReport(
            epoch=epoch,
            mean_nll=total_nll / max(total_steps, 1),
            per_length_nll={L: v[0] / v[1] for L, v in sorted(by_length.items())},
            seconds=time.perf_counter() - started,
            num_sequences=total_seqs,
            num_steps=total_steps,
        )
        reports.append(report)
        if log is not None:
            log(report)
    return params, reports
