"""Pure-Python/numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; used when
the extension is not built or ``LATENTDP_PURE_PYTHON=1`` is set.
"""

from collections import Counter

import numpy as np


def clip_values(z, lo, hi):
    return np.minimum(np.maximum(np.asarray(z, dtype=np.float64), lo), hi)


def clip_norm_rows(z, c):
    z = np.array(z, dtype=np.float64, copy=True)
    for row in z:
        norm = float(np.sqrt(np.dot(row, row)))
        if norm > c:
            row *= c / norm
    return z


def laplace_from_uniform(u, scale):
    u = np.asarray(u, dtype=np.float64) - 0.5
    tail = np.maximum(1.0 - 2.0 * np.abs(u), np.finfo(np.float64).tiny)
    return -scale * np.sign(u) * np.log(tail)


def _ngrams(seq, n):
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def corpus_ngram_stats(hyp_flat, hyp_offsets, ref_flat, ref_offsets, max_n):
    """Clipped n-gram matches and hypothesis n-gram totals summed over a corpus."""
    matches = np.zeros(max_n, dtype=np.int64)
    totals = np.zeros(max_n, dtype=np.int64)
    for k in range(len(hyp_offsets) - 1):
        hyp = list(hyp_flat[hyp_offsets[k] : hyp_offsets[k + 1]])
        ref = list(ref_flat[ref_offsets[k] : ref_offsets[k + 1]])
        for n in range(1, max_n + 1):
            h = _ngrams(hyp, n)
            r = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    return matches, totals
