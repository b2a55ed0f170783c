"""Shared fixtures: small model factories and the trained synthetic experiment."""

import pytest

from npa.data import SynthSpec, gen_synthetic, split_dataset
from npa.model import ModelConfig, init_params
from npa.training import TrainConfig, train

# Constants of the synthetic recovery experiment; the generator profile and
# training pacing were fixed once against the brute-force conditional oracle
# (see tests/test_acceptance.py).
EXPERIMENT = dict(
    spec=dict(num_patterns=8, items_per_pattern=25, patterns_per_basket=(1, 1),
              noise_probability=0.02, basket_length=(5, 9), num_baskets=5000,
              seed=11, within_pool_decay=0.72, within_pool_floor=0.18),
    split_seed=3,
    model=dict(embedding_dim=32, num_layers=2, channels_per_layer=[4, 4],
               num_patterns=64, variant="SC", dropout_rate=0.1,
               max_sequence_length=16, use_positions=False),
    train=dict(epochs=10, batch_size=64, learning_rate=2.5e-3, mode="any_order",
               permutations_per_basket=1, seed=7),
)


def small_sc_config(**overrides):
    base = dict(num_items=20, embedding_dim=8, num_layers=2,
                channels_per_layer=[2, 2], num_patterns=6, variant="SC",
                max_sequence_length=8, use_positions=True)
    base.update(overrides)
    return ModelConfig(**base)


def small_mc_config(**overrides):
    base = dict(num_items=20, embedding_dim=8, num_layers=2,
                channels_per_layer=[2, 2], num_patterns=6, variant="MC",
                mc_last_layer_heads=2, max_sequence_length=8, use_positions=True)
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def synth_experiment():
    """Data, baselines input, and the 10-epoch trained model (about 2 min)."""
    spec = SynthSpec(**EXPERIMENT["spec"])
    catalog, baskets, truth = gen_synthetic(spec)
    train_set, valid_set, test_set = split_dataset(
        baskets, (0.6, 0.2, 0.2), seed=EXPERIMENT["split_seed"])
    config = ModelConfig(num_items=catalog.num_items, **EXPERIMENT["model"])
    params = init_params(config, seed=EXPERIMENT["train"]["seed"])
    train_config = TrainConfig(**EXPERIMENT["train"])
    params, reports = train(train_set, config, params, train_config)
    return dict(spec=spec, catalog=catalog, truth=truth,
                train=train_set, valid=valid_set, test=test_set,
                config=config, params=params, reports=reports)
