"""Intrinsic BLEU and a bag-of-n-grams downstream classifier."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .corpus import LabeledDocument, split_words

MAX_N = 4


@dataclass(frozen=True)
class BleuResult:
    score: float
    ngram_precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_length: int = 0
    ref_length: int = 0

    def to_json(self) -> dict:
        return {
            "score": self.score,
            "ngram_precisions": list(self.ngram_precisions),
            "brevity_penalty": self.brevity_penalty,
            "hyp_length": self.hyp_length,
            "ref_length": self.ref_length,
        }


def _as_tokens(x) -> list[str]:
    return split_words(x) if isinstance(x, str) else list(x)


def corpus_bleu(references: Sequence, hypotheses: Sequence, max_n: int = MAX_N) -> BleuResult:
    """Corpus BLEU-4 with add-one smoothing on the 2..4-gram precisions.

    Strings are tokenized with the corpus word splitter; token lists are used
    as given. Unigram precision is unsmoothed, so a corpus without a single
    matching word scores exactly 0.
    """
    if len(references) != len(hypotheses):
        raise ValueError(f"{len(references)} references vs {len(hypotheses)} hypotheses")
    if not references:
        raise ValueError("BLEU needs at least one sentence pair")
    ids: dict[str, int] = {}
    hyp_seqs = [[ids.setdefault(t, len(ids)) for t in _as_tokens(h)] for h in hypotheses]
    ref_seqs = [[ids.setdefault(t, len(ids)) for t in _as_tokens(r)] for r in references]
    hyp_off = np.cumsum([0] + [len(h) for h in hyp_seqs])
    ref_off = np.cumsum([0] + [len(r) for r in ref_seqs])
    flat_h = np.fromiter((t for h in hyp_seqs for t in h), dtype=np.int64, count=int(hyp_off[-1]))
    flat_r = np.fromiter((t for r in ref_seqs for t in r), dtype=np.int64, count=int(ref_off[-1]))
    matches, totals = kernels.corpus_ngram_stats(flat_h, hyp_off, flat_r, ref_off, max_n)

    c, r = int(hyp_off[-1]), int(ref_off[-1])
    precisions = []
    for n in range(max_n):
        if n == 0:
            precisions.append(matches[0] / totals[0] if totals[0] else 0.0)
        else:
            precisions.append((matches[n] + 1) / (totals[n] + 1))
    if c == 0:
        bp = math.exp(1 - r) if r else 1.0
    else:
        bp = 1.0 if c > r else math.exp(1 - r / c)
    if precisions[0] == 0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuResult(score, tuple(float(p) for p in precisions), bp, c, r)


def macro_f1_score(y_true: Sequence[str], y_pred: Sequence[str], classes: Sequence[str] | None = None) -> float:
    """Unweighted mean of per-class F1; a class never predicted scores 0."""
    if len(y_true) != len(y_pred):
        raise ValueError("label sequences differ in length")
    if not len(y_true):
        raise ValueError("macro F1 needs at least one example")
    classes = sorted(set(y_true) | set(y_pred) | set(classes or ()))
    f1s = []
    for c in classes:
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        f1s.append(2 * tp / (2 * tp + fp + fn) if tp else 0.0)
    return float(np.mean(f1s))


def ngram_features(text: str) -> list[str]:
    words = split_words(text)
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


@dataclass
class ClassifierModel:
    """Multinomial logistic regression over unigram and bigram counts."""

    classes: list[str]
    features: dict[str, int]
    weights: np.ndarray
    bias: np.ndarray
    history: list[float] = field(default_factory=list)

    def featurize(self, texts: Sequence[str]) -> np.ndarray:
        x = np.zeros((len(texts), len(self.features)))
        for i, t in enumerate(texts):
            for f in ngram_features(t):
                j = self.features.get(f)
                if j is not None:
                    x[i, j] += 1
        return x

    def predict(self, texts: Sequence[str]) -> list[str]:
        logits = self.featurize(texts) @ self.weights + self.bias
        return [self.classes[k] for k in logits.argmax(axis=1)]

    def macro_f1(self, docs: Sequence[LabeledDocument]) -> float:
        return macro_f1(self, docs)


def _softmax(logits):
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(train: Sequence[LabeledDocument], val: Sequence[LabeledDocument], seed: int = 0,
                     epochs: int = 200, lr: float = 0.5, l2: float = 1e-4, eval_every: int = 5,
                     patience: int = 8) -> ClassifierModel:
    """Full-batch gradient descent; keeps the weights with the best validation macro-F1."""
    classes = sorted({d.label for d in train})
    if len(classes) < 2:
        raise ValueError("training data needs at least two classes")
    vocab: dict[str, int] = {}
    for d in train:
        for f in ngram_features(d.text):
            vocab.setdefault(f, len(vocab))
    rng = np.random.default_rng(seed)
    model = ClassifierModel(classes, vocab, rng.normal(0, 1e-3, (len(vocab), len(classes))), np.zeros(len(classes)))
    x = model.featurize([d.text for d in train])
    y = np.zeros((len(train), len(classes)))
    y[np.arange(len(train)), [classes.index(d.label) for d in train]] = 1
    best = (-1.0, model.weights.copy(), model.bias.copy())
    stale = 0
    for epoch in range(1, epochs + 1):
        p = _softmax(x @ model.weights + model.bias)
        g = (p - y) / len(train)
        model.weights -= lr * (x.T @ g + l2 * model.weights)
        model.bias -= lr * g.sum(axis=0)
        if epoch % eval_every == 0 or epoch == epochs:
            score = macro_f1(model, val) if val else 1.0 - float(np.mean(p.argmax(1) != y.argmax(1)))
            model.history.append(score)
            if score > best[0]:
                best = (score, model.weights.copy(), model.bias.copy())
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break
    model.weights, model.bias = best[1], best[2]
    return model


def macro_f1(model: ClassifierModel, docs: Sequence[LabeledDocument]) -> float:
    if not docs:
        raise ValueError("test set is empty")
    return macro_f1_score([d.label for d in docs], model.predict([d.text for d in docs]), model.classes)


def mean_std(values: Sequence[float]) -> dict:
    v = np.asarray(values, dtype=np.float64)
    return {"mean": float(v.mean()), "std": float(v.std()), "values": [float(x) for x in v]}
