"""Seeded, splittable random streams.

Every consumer derives its own generator from ``(seed, *keys)`` so that work
can be reordered or parallelised without changing any draw.
"""

from __future__ import annotations

import numpy as np

# stream namespaces
PRETRAIN = 1
PRUNE = 2
NOISY_TRAIN = 3
REWRITE = 4
CLASSIFIER = 5
EVAL = 6


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))))


def document_stream(seed: int, doc_id: int) -> np.random.Generator:
    return stream(seed, REWRITE, doc_id)


def torch_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)).generate_state(1)[0])
