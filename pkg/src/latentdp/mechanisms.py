"""Sensitivities, calibrated Laplace/Gaussian noise and budget accounting.

Conventions:

* ``epsilon=None`` in :class:`PrivacyParams` means no privacy (epsilon
  infinite). Noise is then skipped entirely instead of computing with a float
  infinity.
* Gaussian calibration always yields the standard deviation sigma. Samplers
  take sigma, never the variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels

LAPLACE = "laplace"
GAUSSIAN = "gaussian"
MECHANISMS = (LAPLACE, GAUSSIAN)

CLIP_BY_VALUE = "value"
CLIP_BY_NORM = "norm"


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float | None
    delta: float = 0.0
    mechanism: str = LAPLACE

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if self.epsilon is not None:
            if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
                raise ValueError(f"epsilon must be a positive finite number or None, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if self.is_private:
            if self.mechanism == GAUSSIAN and self.delta <= 0:
                raise ValueError("the Gaussian mechanism needs delta > 0")
            if self.mechanism == LAPLACE and self.delta != 0:
                raise ValueError("the Laplace mechanism is pure DP; delta must be 0")

    @classmethod
    def non_private(cls) -> "PrivacyParams":
        return cls(None)

    @property
    def is_private(self) -> bool:
        return self.epsilon is not None

    def to_json(self) -> dict:
        return {"epsilon": "inf" if self.epsilon is None else self.epsilon, "delta": self.delta, "mechanism": self.mechanism}


def parse_epsilon(value: str | float | None) -> float | None:
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "none"):
            return None
        value = float(value)
    if math.isinf(value):
        return None
    return float(value)


@dataclass(frozen=True)
class Sensitivity:
    l1: float
    l2: float
    clip_constant: float
    dimension: int
    clip_mode: str = CLIP_BY_VALUE

    @classmethod
    def for_clipping(cls, clip_constant: float, dimension: int, clip_mode: str = CLIP_BY_VALUE) -> "Sensitivity":
        if clip_mode == CLIP_BY_VALUE:
            return cls(l1_sensitivity_clv(clip_constant, dimension), l2_sensitivity_clv(clip_constant, dimension),
                       clip_constant, dimension, clip_mode)
        if clip_mode == CLIP_BY_NORM:
            return cls(l1_sensitivity_norm_clip(clip_constant, dimension), l2_sensitivity_norm_clip(clip_constant, dimension),
                       clip_constant, dimension, clip_mode)
        raise ValueError(f"unknown clip mode {clip_mode!r}")


@dataclass(frozen=True)
class NoiseSpec:
    distribution: str
    scale: float
    dimension: int

    def __post_init__(self):
        if self.distribution not in MECHANISMS:
            raise ValueError(f"unknown noise distribution {self.distribution!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"noise scale must be positive and finite, got {self.scale}")
        if self.dimension < 1:
            raise ValueError("noise dimension must be >= 1")

    @property
    def variance(self) -> float:
        return 2 * self.scale**2 if self.distribution == LAPLACE else self.scale**2


def _check_clip_args(c: float, n: int) -> None:
    if not c > 0:
        raise ValueError(f"clip constant must be positive, got {c}")
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")


def l1_sensitivity_clv(c: float, n: int) -> float:
    """Max l1 distance between two points of the box [-c, c]^n."""
    _check_clip_args(c, n)
    return 2.0 * c * n


def l2_sensitivity_clv(c: float, n: int) -> float:
    """Max l2 distance between two points of the box [-c, c]^n."""
    _check_clip_args(c, n)
    return 2.0 * c * math.sqrt(n)


def l1_sensitivity_norm_clip(c: float, n: int) -> float:
    """l1 sensitivity of clipping to the l2 ball of radius c in n dimensions.

    Two antipodal points on the ball's diagonal are ``2c`` apart in l2 and
    ``2c * sqrt(n)`` apart in l1.
    """
    _check_clip_args(c, n)
    return 2.0 * c * math.sqrt(n)


def l2_sensitivity_norm_clip(c: float, n: int) -> float:
    _check_clip_args(c, n)
    return 2.0 * c


def gaussian_sigma(delta2: float, params: PrivacyParams) -> float:
    """Standard deviation ``sqrt(2 ln(1.25/delta)) * delta2 / epsilon``."""
    if params.mechanism != GAUSSIAN:
        raise ValueError("gaussian_sigma needs Gaussian privacy parameters")
    if not params.is_private:
        raise ValueError("no noise scale exists for epsilon = inf")
    if not delta2 > 0:
        raise ValueError(f"l2 sensitivity must be positive, got {delta2}")
    return math.sqrt(2.0 * math.log(1.25 / params.delta)) * delta2 / params.epsilon


def laplace_scale(delta1: float, params: PrivacyParams) -> float:
    if params.mechanism != LAPLACE:
        raise ValueError("laplace_scale needs Laplace privacy parameters")
    if not params.is_private:
        raise ValueError("no noise scale exists for epsilon = inf")
    if not delta1 > 0:
        raise ValueError(f"l1 sensitivity must be positive, got {delta1}")
    return delta1 / params.epsilon


def noise_spec(sens: Sensitivity, params: PrivacyParams) -> NoiseSpec | None:
    """Calibrated noise for ``sens`` under ``params``; ``None`` when not private."""
    if not params.is_private:
        return None
    if params.mechanism == LAPLACE:
        return NoiseSpec(LAPLACE, laplace_scale(sens.l1, params), sens.dimension)
    return NoiseSpec(GAUSSIAN, gaussian_sigma(sens.l2, params), sens.dimension)


def sample_noise(spec: NoiseSpec, rng: np.random.Generator, size: int | tuple | None = None) -> np.ndarray:
    """I.i.d. noise; Laplace by inverse-CDF transform of the uniform stream."""
    shape = spec.dimension if size is None else size
    if spec.distribution == LAPLACE:
        return kernels.laplace_from_uniform(rng.random(shape), spec.scale)
    return rng.standard_normal(shape) * spec.scale


def privatize_latent(zbar: np.ndarray, sens: Sensitivity, params: PrivacyParams, rng: np.random.Generator,
                     keep: np.ndarray | None = None) -> np.ndarray:
    """Add calibrated noise to the surviving coordinates of a clipped latent.

    ``keep`` marks non-pruned coordinates (same shape as ``zbar``); pruned
    coordinates are returned as exact zeros and receive no noise.
    """
    zbar = np.asarray(zbar, dtype=np.float64)
    if keep is None:
        keep = np.ones(zbar.shape, dtype=bool)
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != zbar.shape:
        raise ValueError(f"keep mask shape {keep.shape} does not match latent shape {zbar.shape}")
    alive = int(keep.sum())
    if alive != sens.dimension:
        raise ValueError(f"sensitivity dimension {sens.dimension} != {alive} non-pruned coordinates")
    out = np.where(keep, zbar, 0.0)
    spec = noise_spec(sens, params)
    if spec is not None:
        out[keep] += sample_noise(spec, rng)
    return out


def compose_budget(epsilon: float, k: int) -> float:
    """Linear composition: ``k`` releases at ``epsilon`` each."""
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    return k * epsilon


def delta_guideline(dataset_size: int) -> float:
    """Largest power of ten strictly below ``1 / dataset_size``."""
    if int(dataset_size) != dataset_size or dataset_size < 1:
        raise ValueError("dataset_size must be a positive integer")
    return 10.0 ** -len(str(int(dataset_size)))


class EmptyOverlapError(RuntimeError):
    pass


def empirical_privacy_ratio(mechanism: Callable[[float, int, np.random.Generator], np.ndarray], x: float, y: float,
                            bin_count: int = 50, sample_count: int = 1_000_000, rng: np.random.Generator | None = None,
                            min_count: int = 1000, coverage: float = 0.95) -> float:
    """Monte-Carlo estimate of the largest output-probability ratio between two inputs.

    Both inputs are pushed through ``mechanism(value, size, rng)``; outputs are
    histogrammed on ``bin_count`` equal-width bins spanning the central
    ``coverage`` mass of the pooled samples, and the ratio is taken in both
    directions over bins where each side has at least ``min_count`` samples.
    """
    rng = np.random.default_rng() if rng is None else rng
    a = np.asarray(mechanism(x, sample_count, rng), dtype=np.float64)
    b = np.asarray(mechanism(y, sample_count, rng), dtype=np.float64)
    tail = (1.0 - coverage) / 2
    lo, hi = np.quantile(np.concatenate([a, b]), [tail, 1.0 - tail])
    if not hi > lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bin_count + 1)
    ca, _ = np.histogram(a, edges)
    cb, _ = np.histogram(b, edges)
    both = (ca >= min_count) & (cb >= min_count)
    if not both.any():
        raise EmptyOverlapError("no bin holds enough samples from both inputs; raise sample_count")
    pa = ca[both] / len(a)
    pb = cb[both] / len(b)
    return float(max(np.max(pa / pb), np.max(pb / pa)))


def clipped_laplace_mechanism(c: float, epsilon: float) -> Callable[[float, int, np.random.Generator], np.ndarray]:
    """1-D clip-by-value Laplace mechanism, the scalar case of latent privatization."""
    spec = NoiseSpec(LAPLACE, laplace_scale(l1_sensitivity_clv(c, 1), PrivacyParams(epsilon)), 1)

    def run(value: float, size: int, rng: np.random.Generator) -> np.ndarray:
        return float(np.clip(value, -c, c)) + sample_noise(spec, rng, size)

    return run


def calibration_report(sens: Sensitivity, params: PrivacyParams) -> dict:
    """JSON-ready record of a calibration; reports both sigma and sigma^2."""
    spec = noise_spec(sens, params)
    scale = 0.0 if spec is None else spec.scale
    return {
        "epsilon": "inf" if params.epsilon is None else params.epsilon,
        "delta": params.delta,
        "mechanism": params.mechanism,
        "clip_mode": sens.clip_mode,
        "clip_constant": sens.clip_constant,
        "dimension": sens.dimension,
        "sensitivity_l1": sens.l1,
        "sensitivity_l2": sens.l2,
        "noise_scale": scale,
        "noise_variance": 0.0 if spec is None else spec.variance,
        "sigma": scale if params.mechanism == GAUSSIAN else None,
        "sigma_squared": scale**2 if params.mechanism == GAUSSIAN else None,
    }
