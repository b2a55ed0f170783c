"""Ranking metrics and the three count baselines on generated data.

Run:  python demos/05_evaluate_baselines.py
"""

from npa.data import SynthSpec, gen_synthetic, make_eval_instances, split_dataset
from npa.metrics import (CP, ITEM_CF, POP, CountBaseline, compute_metrics,
                         format_report)

spec = SynthSpec(num_patterns=6, items_per_pattern=12, patterns_per_basket=(1, 2),
                 noise_probability=0.1, basket_length=(4, 8), num_baskets=2000, seed=9)
catalog, baskets, _ = gen_synthetic(spec)
train_set, _, test_set = split_dataset(baskets, (0.6, 0.2, 0.2), seed=2)
instances, skipped = make_eval_instances(test_set, input_fraction=0.5, seed=4)
print(f"{len(instances)} evaluation instances ({skipped} skipped)")

for kind in (POP, CP, ITEM_CF):
    model = CountBaseline(kind, catalog.num_items).fit(train_set)
    pairs = [(model.ranked(inst.inputs, 100), inst.labels) for inst in instances]
    report = compute_metrics(pairs)
    print(f"\n=== {kind} ===")
    print(format_report(report))
