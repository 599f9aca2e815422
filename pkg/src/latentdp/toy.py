"""The desk-scale privacy/utility sweep used by the acceptance suite.

Laplace noise on the synthetic corpora, four variants, three seeds. The
README explains how the epsilon grid was chosen.
"""

from __future__ import annotations

import time

from .mechanisms import PrivacyParams
from .pipeline import VARIANTS, DataConfig, ExperimentConfig, PrPlusConfig, sweep

# None is epsilon = infinity; the last entry is the smallest toy epsilon
EPSILONS = (None, 10_000.0, 5_000.0, 3_000.0, 1_000.0, 100.0)
MID_EPSILON = 5_000.0
SEEDS = (0, 1, 2)


def toy_config(**overrides) -> ExperimentConfig:
    base = dict(
        variant="clv",
        privacy=PrivacyParams(None),
        prplus=PrPlusConfig(base_epochs=1, epsilon_ref=10_000, steps_per_epoch=100, max_epochs=6),
        data=DataConfig(downstream_count=500),
        beam=10,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def run_toy_sweep(seeds=SEEDS, epsilons=EPSILONS, variants=VARIANTS, cache: dict | None = None, **overrides):
    """Return ``(rows, seconds)``; each row has variant, epsilon, seed, bleu and macro_f1."""
    t0 = time.perf_counter()
    rows = sweep(toy_config(**overrides), variants, epsilons, seeds, cache)
    return rows, time.perf_counter() - t0
