"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when it is
missing or when ``LATENTDP_PURE_PYTHON`` is set to a non-empty value other
than ``0``.
"""

import os

from . import _pykernels

python = _pykernels

if os.environ.get("LATENTDP_PURE_PYTHON", "0") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

backend = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

clip_values = backend.clip_values
clip_norm_rows = backend.clip_norm_rows
laplace_from_uniform = backend.laplace_from_uniform
corpus_ngram_stats = backend.corpus_ngram_stats
