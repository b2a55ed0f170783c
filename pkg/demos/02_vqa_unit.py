"""One vector-quantized attention unit, step by step.

The unit looks up a basket's combination pattern in a trainable codebook
(stage one) and then asks which basket items matter for completing that
pattern (stage two). This script walks a toy basket through both stages
and shows the three pattern-extraction strategies.

Run:  python demos/02_vqa_unit.py
"""

import numpy as np

from npa import vqa

rng = np.random.default_rng(7)
params = vqa.init_vqa_params(rng, input_dim=8, attn_dim=4, value_dim=4, num_patterns=5)

basket = rng.normal(size=(4, 8))  # four items, 8-dim features
q, k, v = vqa.project_items(basket, params)
print("queries", q.shape, "keys", k.shape, "values", v.shape)

# Per-item pattern beliefs, then the basket-level average.
a = vqa.pattern_attention(q, params)
abar = vqa.aggregate_attention(a)
belief = vqa.PatternBelief(a, abar)
print("per-item beliefs:")
for row in a.data:
    print("  ", np.round(row, 3))
print("basket belief:", np.round(abar.data, 3), " (sums to", abar.data.sum(), ")")

# Three ways to pull a pattern vector out of the belief.
for kind in (vqa.GREEDY, vqa.WEIGHTED_AVERAGE, vqa.SAMPLING):
    strategy = vqa.ExtractionStrategy(kind)
    z = vqa.extract_pattern(belief, params.codebook, strategy,
                            rng=np.random.default_rng(0))
    ctx = vqa.estimate_context(z, k, v, None, params)
    print(f"{kind:17s} -> context {np.round(ctx.data, 3)}")

# Sampling is a seeded Gumbel-max draw from the belief; at temperature 1
# the empirical frequencies match the belief itself.
draws = np.array([vqa.sample_pattern_index(abar.data, 1.0, rng) for _ in range(20000)])
freq = np.bincount(draws, minlength=5) / draws.size
print("belief   ", np.round(abar.data, 3))
print("empirical", np.round(freq, 3))

# The unit is a set function: permuting the items leaves the basket
# belief and the context unchanged.
strategy = vqa.ExtractionStrategy(vqa.WEIGHTED_AVERAGE)
c0, _ = vqa.unit_forward_prefix(basket, params, strategy)
c1, _ = vqa.unit_forward_prefix(basket[::-1].copy(), params, strategy)
print("order sensitivity:", float(np.max(np.abs(c0.data - c1.data))))
