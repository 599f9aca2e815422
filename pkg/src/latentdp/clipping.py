"""Bounding latent vectors by l2 norm or per coordinate, and choosing the bound."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels

BY_NORM = "norm"
BY_VALUE = "value"

TWO_SIGMA = "two-sigma"
HALF_SIGMA = "half-sigma"


@dataclass(frozen=True)
class ClipSpec:
    mode: str = BY_VALUE
    c: float = 0.1
    c_min: float | None = None
    c_max: float | None = None

    def __post_init__(self):
        if self.mode not in (BY_NORM, BY_VALUE):
            raise ValueError(f"clip mode must be {BY_NORM!r} or {BY_VALUE!r}")
        if not self.c > 0:
            raise ValueError(f"clip constant must be positive, got {self.c}")
        if self.c_min is None:
            object.__setattr__(self, "c_min", -self.c)
        if self.c_max is None:
            object.__setattr__(self, "c_max", self.c)
        if not self.c_min < self.c_max:
            raise ValueError("c_min must be below c_max")

    @property
    def symmetric(self) -> bool:
        return self.c_min == -self.c and self.c_max == self.c

    def to_json(self) -> dict:
        return {"mode": self.mode, "c": self.c, "c_min": self.c_min, "c_max": self.c_max}


@dataclass(frozen=True)
class ClipEstimate:
    mu: float
    sigma: float
    recommended_c: float
    rule: str

    def to_json(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "recommended_c": self.recommended_c, "rule": self.rule}


def clip_by_norm(z, c: float) -> np.ndarray:
    """Scale ``z`` by ``min(1, c / ||z||_2)``; a batch is clipped row by row.

    The zero vector is returned unchanged.
    """
    if not c > 0:
        raise ValueError(f"clip constant must be positive, got {c}")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim <= 1:
        return kernels.clip_norm_rows(z.reshape(1, -1), c).reshape(z.shape)
    flat = z.reshape(z.shape[0], -1)
    return kernels.clip_norm_rows(flat, c).reshape(z.shape)


def clip_by_value(z, spec: ClipSpec | float) -> np.ndarray:
    if not isinstance(spec, ClipSpec):
        spec = ClipSpec(BY_VALUE, float(spec))
    return kernels.clip_values(z, spec.c_min, spec.c_max)


def clip(z, spec: ClipSpec) -> np.ndarray:
    if spec.mode == BY_NORM:
        return clip_by_norm(z, spec.c)
    return clip_by_value(z, spec)


def estimate_clip_constant(latents: Iterable[np.ndarray], rule: str = HALF_SIGMA) -> ClipEstimate:
    """Fit a Gaussian to pooled latent coordinates and derive a clipping bound.

    ``mu`` and ``sigma`` are maximum-likelihood estimates (``sigma`` uses the
    1/N variance). ``two-sigma`` recommends ``mu + 2 sigma``, which keeps about
    95% of values; ``half-sigma`` recommends ``sigma / 2``.
    """
    arrays = [np.asarray(z, dtype=np.float64).reshape(-1) for z in latents]
    if not arrays or sum(a.size for a in arrays) == 0:
        raise ValueError("no latent values to estimate from")
    pooled = np.concatenate(arrays)
    mu = float(pooled.mean())
    sigma = float(pooled.std())
    if not sigma > 0:
        raise ValueError("latent values have zero spread; cannot derive a clipping constant")
    if rule == TWO_SIGMA:
        c = mu + 2 * sigma
    elif rule == HALF_SIGMA:
        c = sigma / 2
    else:
        raise ValueError(f"unknown rule {rule!r}")
    if not c > 0:
        raise ValueError(f"rule {rule!r} yields a non-positive constant {c}")
    return ClipEstimate(mu, sigma, c, rule)
