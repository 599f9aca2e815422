"""Input-independent structured pruning of encoder output neurons.

A neuron is one of the ``d_tok`` features of the per-token latent. Pruning
zeroes that feature at every position, for every input, so it carries no
information and drops out of the sensitivity: only ``l * (d_tok - |P|)``
coordinates are clipped and noised.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import Autoencoder, LatentOptions, train_steps

logger = logging.getLogger(__name__)


class PruningStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class PruneMask:
    pruned_indices: tuple[int, ...]
    d_tok: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.pruned_indices))
        if len(set(idx)) != len(idx):
            raise ValueError("pruned indices must be unique")
        if idx and (idx[0] < 0 or idx[-1] >= self.d_tok):
            raise ValueError(f"pruned indices must lie in [0, {self.d_tok})")
        object.__setattr__(self, "pruned_indices", idx)

    @classmethod
    def empty(cls, d_tok: int) -> "PruneMask":
        return cls((), d_tok)

    def __len__(self) -> int:
        return len(self.pruned_indices)

    def __contains__(self, j) -> bool:
        return int(j) in self.pruned_indices

    @property
    def alive(self) -> np.ndarray:
        keep = np.ones(self.d_tok, dtype=bool)
        keep[list(self.pruned_indices)] = False
        return np.flatnonzero(keep)

    @property
    def fraction(self) -> float:
        return len(self) / self.d_tok

    def keep_matrix(self, l: int) -> np.ndarray:
        keep = np.ones((l, self.d_tok), dtype=bool)
        keep[:, list(self.pruned_indices)] = False
        return keep

    def extend(self, new) -> "PruneMask":
        return PruneMask(tuple(self.pruned_indices) + tuple(int(i) for i in new), self.d_tok)

    def to_json(self) -> dict:
        return {"pruned_indices": list(self.pruned_indices), "d_tok": self.d_tok}

    @classmethod
    def from_json(cls, obj: dict) -> "PruneMask":
        return cls(tuple(obj["pruned_indices"]), int(obj["d_tok"]))


@dataclass(frozen=True)
class PruneSchedule:
    total_iterations: int = 6
    use_iteration: int | None = None
    quantile: float = 0.25
    retrain_steps: int = 500
    retrain_mask_prob: float = 0.0  # denoising corruption slows recovery after each cut
    retrain_clip_c: float | None = None  # None: retrain at the deployment clip constant

    def __post_init__(self):
        if self.total_iterations < 1:
            raise ValueError("total_iterations must be >= 1")
        if self.use_iteration is None:
            object.__setattr__(self, "use_iteration", max(self.total_iterations - 1, 0))
        if not 0 <= self.use_iteration <= self.total_iterations:
            raise ValueError("use_iteration must lie in [0, total_iterations]")
        if not 0 < self.quantile < 1:
            raise ValueError("quantile must lie in (0, 1)")
        if self.retrain_steps < 1:
            raise ValueError("retrain_steps must be >= 1")
        if not 0.0 <= self.retrain_mask_prob < 1.0:
            raise ValueError("retrain_mask_prob must lie in [0, 1)")
        if self.retrain_clip_c is not None and not self.retrain_clip_c > 0:
            raise ValueError("retrain_clip_c must be positive")

    def to_json(self) -> dict:
        return {
            "total_iterations": self.total_iterations,
            "use_iteration": self.use_iteration,
            "quantile": self.quantile,
            "retrain_steps": self.retrain_steps,
            "retrain_clip_c": self.retrain_clip_c,
            "retrain_mask_prob": self.retrain_mask_prob,
        }


@dataclass(frozen=True)
class ImportanceScores:
    scores: np.ndarray
    source: str = "decoder.0.cross_attn.k_proj"


def prune(z, mask: PruneMask) -> np.ndarray:
    """Zero the masked neurons at every token position of ``z`` (``... x l x d_tok``)."""
    z = np.array(z, dtype=np.float64, copy=True)
    if z.shape[-1] != mask.d_tok:
        raise ValueError(f"latent width {z.shape[-1]} does not match mask width {mask.d_tok}")
    z[..., list(mask.pruned_indices)] = 0.0
    return z


def neuron_importance(weight: np.ndarray, source: str = "decoder.0.cross_attn.k_proj") -> ImportanceScores:
    """Sum of absolute weights reading each input neuron (column sums of ``|W|``)."""
    w = np.asarray(weight, dtype=np.float64)
    if w.ndim != 2 or w.size == 0:
        raise ValueError("importance needs a nonempty 2-D weight matrix")
    return ImportanceScores(np.abs(w).sum(axis=0), source)


def select_prune_indices(scores: ImportanceScores | np.ndarray, already: PruneMask, quantile: float = 0.25) -> list[int]:
    """Alive neurons scoring strictly below the ``quantile`` of alive scores.

    The threshold interpolates linearly between order statistics. If nothing
    falls strictly below it, the single lowest-scoring alive neuron (lowest
    index on ties) is returned so every round makes progress.
    """
    s = np.asarray(scores.scores if isinstance(scores, ImportanceScores) else scores, dtype=np.float64)
    if len(s) != already.d_tok:
        raise ValueError(f"{len(s)} scores for a mask of width {already.d_tok}")
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    alive = already.alive
    if len(alive) == 0:
        raise PruningStateError("every neuron is already pruned")
    threshold = np.quantile(s[alive], quantile, method="linear")
    chosen = [int(j) for j in alive if s[j] < threshold]
    if not chosen:
        chosen = [int(alive[np.argmin(s[alive])])]
    return chosen


def effective_dim(mask: PruneMask, l: int) -> int:
    if l < 1:
        raise ValueError("sequence length must be >= 1")
    return (mask.d_tok - len(mask)) * l


@dataclass
class PruneResult:
    """Masks and weights from every round; ``model`` holds the deployed round's weights."""

    model: Autoencoder
    masks: list[PruneMask]
    losses: list[list[float]] = field(default_factory=list)
    schedule: PruneSchedule | None = None

    @property
    def use_iteration(self) -> int:
        return self.schedule.use_iteration if self.schedule else len(self.masks)

    @property
    def deployed(self) -> PruneMask:
        # use_iteration counts completed rounds; 0 deploys no pruning
        k = self.use_iteration
        return self.masks[k - 1] if k > 0 else PruneMask.empty(self.masks[0].d_tok)


def iterative_prune_train(model: Autoencoder, public_ids: np.ndarray, schedule: PruneSchedule, rng: np.random.Generator,
                          batch_size: int = 64, lr: float = 3e-3, clip_c: float = 0.1) -> PruneResult:
    """Alternate mask extension and retraining on public data.

    Each iteration scores the first decoder layer's cross-attention key
    weights, extends the mask with the low-importance alive neurons, then
    retrains with the mask applied and the latent clipped by value at
    ``schedule.retrain_clip_c`` (``clip_c`` when unset). Works on a copy. The
    returned model carries the weights saved at the end of round
    ``schedule.use_iteration``, so mask and weights always match. It is frozen.
    The final round still extends the mask but skips retraining when it lies
    past ``use_iteration``.
    """
    if model.config.architecture != "transformer":
        raise ValueError("pruning needs the transformer architecture")
    if len(public_ids) == 0:
        raise ValueError("public corpus is empty")
    model = copy.deepcopy(model)
    model.frozen = False
    d_tok, l = model.config.d_tok, model.config.max_len
    mask = PruneMask.empty(d_tok)
    retrain_c = schedule.retrain_clip_c if schedule.retrain_clip_c is not None else clip_c
    masks, losses = [], []
    states = [copy.deepcopy(model.net.state_dict())]
    for it in range(schedule.total_iterations):
        new = select_prune_indices(neuron_importance(model.importance_weight()), mask, schedule.quantile)
        mask = mask.extend(new)
        if len(mask) >= d_tok:
            raise PruningStateError(f"iteration {it} would prune all {d_tok} neurons")
        masks.append(mask)
        if it + 1 > schedule.use_iteration and it + 1 == schedule.total_iterations:
            # nothing downstream reads these weights: not deployed, and no later mask is scored on them
            losses.append([])
            logger.info("prune iteration %d: %d/%d pruned, retraining skipped", it, len(mask), d_tok)
            continue
        options = LatentOptions(clip_c=retrain_c, keep=mask.keep_matrix(l))
        hist = train_steps(model, public_ids, schedule.retrain_steps, rng, options=options, batch_size=batch_size,
                           lr=lr, mask_prob=schedule.retrain_mask_prob)
        losses.append(hist)
        states.append(copy.deepcopy(model.net.state_dict()))
        logger.info("prune iteration %d: %d/%d pruned, final loss %.4f", it, len(mask), d_tok, hist[-1])
    model.net.load_state_dict(states[schedule.use_iteration])
    model.frozen = True
    return PruneResult(model, masks, losses, schedule)
