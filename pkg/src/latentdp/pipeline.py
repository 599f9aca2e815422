"""Pretrain, prune, noisy-train, rewrite and evaluate.

Variants:

``baseline``  recurrent autoencoder, latent clipped by l2 norm
``clv``       transformer, latent clipped by value
``pr``        ``clv`` plus input-independent neuron pruning
``pr-plus``   ``pr`` plus further training under clipping and calibrated noise

Training stages read only the public corpus; downstream documents are only
ever encoded by a frozen model.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import time
from importlib import resources
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np
import torch

from . import rng as rngs
from .checkpoint import Checkpoint
from .clipping import BY_NORM, BY_VALUE, HALF_SIGMA, ClipSpec, clip, estimate_clip_constant
from .corpus import (LabeledDocument, build_vocab, detokenize, generate_synthetic, load_jsonl, normalize, split,
                     tokenize_batch, write_jsonl)
from .evaluation import corpus_bleu, macro_f1, train_classifier
from .mechanisms import (GAUSSIAN, PrivacyParams, Sensitivity, calibration_report, compose_budget, delta_guideline,
                         noise_spec, privatize_latent, sample_noise)
from .model import Autoencoder, LatentOptions, ModelConfig, decode, evaluate_loss, make_optimizer, train_steps
from .pruning import PruneMask, PruneSchedule, effective_dim, iterative_prune_train

logger = logging.getLogger(__name__)

VARIANTS = ("baseline", "clv", "pr", "pr-plus")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")


class DataLeakError(RuntimeError):
    pass


@dataclass
class TrainingConfig:
    pretrain_steps: int = 6000
    batch_size: int = 64
    lr: float = 3e-3
    mask_prob: float = 0.1
    eval_every: int = 250
    patience: int = 3


@dataclass
class PrPlusConfig:
    base_epochs: float = 1.0
    epsilon_ref: float = 1000.0
    steps_per_epoch: int = 100
    max_epochs: int = 30
    mask_prob: float = 0.0  # the latent noise already corrupts the input

    def epochs(self, epsilon: float) -> int:
        """More noisy-training epochs the smaller epsilon is."""
        if not epsilon > 0:
            raise ValueError("noisy training needs a finite positive epsilon")
        return int(min(self.max_epochs, max(1, math.ceil(self.base_epochs * self.epsilon_ref / epsilon))))


@dataclass
class DataConfig:
    downstream_path: str | None = None
    downstream_count: int = 1000
    public_path: str | None = None
    public_count: int = 20000
    public_val_fraction: float = 0.05
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    data_seed: int = 0


@dataclass
class ExperimentConfig:
    variant: str = "clv"
    model: dict = field(default_factory=dict)
    clip: ClipSpec = field(default_factory=ClipSpec)
    privacy: PrivacyParams = field(default_factory=PrivacyParams.non_private)
    schedule: PruneSchedule | None = None
    prplus: PrPlusConfig = field(default_factory=PrPlusConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0
    beam: int = 10
    output_dir: str = "runs/default"
    audit: bool = False
    grouping: str = "compose"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant in ("pr", "pr-plus") and self.schedule is None:
            self.schedule = PruneSchedule()
        if self.variant == "pr-plus" and not self.privacy.is_private:
            raise ValueError("pr-plus trains against a finite epsilon")
        if self.grouping not in ("compose", "concatenate"):
            raise ValueError("grouping must be 'compose' or 'concatenate'")
        if self.beam < 1:
            raise ValueError("beam must be >= 1")
        mode = BY_NORM if self.variant == "baseline" else BY_VALUE
        if self.clip.mode != mode:
            self.clip = replace(self.clip, mode=mode)

    @property
    def architecture(self) -> str:
        return self.model.get("architecture", "recurrent" if self.variant == "baseline" else "transformer")

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "model": dict(self.model),
            "clip": self.clip.to_json(),
            "privacy": self.privacy.to_json(),
            "schedule": self.schedule.to_json() if self.schedule else None,
            "prplus": asdict(self.prplus),
            "training": asdict(self.training),
            "data": {**asdict(self.data), "fractions": list(self.data.fractions)},
            "seed": self.seed,
            "beam": self.beam,
            "output_dir": self.output_dir,
            "audit": self.audit,
            "grouping": self.grouping,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        kw = {}
        for key in ("variant", "seed", "beam", "output_dir", "audit", "grouping"):
            if key in obj:
                kw[key] = obj[key]
        kw["model"] = dict(obj.get("model") or {})
        if obj.get("clip"):
            c = dict(obj["clip"])
            kw["clip"] = ClipSpec(c.get("mode", BY_VALUE), float(c.get("c", 0.1)), c.get("c_min"), c.get("c_max"))
        if obj.get("privacy"):
            from .mechanisms import parse_epsilon
            p = obj["privacy"]
            kw["privacy"] = PrivacyParams(parse_epsilon(p.get("epsilon")), float(p.get("delta", 0.0)), p.get("mechanism", "laplace"))
        if obj.get("schedule"):
            kw["schedule"] = PruneSchedule(**obj["schedule"])
        for key, typ in (("prplus", PrPlusConfig), ("training", TrainingConfig), ("data", DataConfig)):
            if obj.get(key):
                known = {f.name for f in fields(typ)}
                vals = {k: v for k, v in obj[key].items() if k in known}
                if "fractions" in vals:
                    vals["fractions"] = tuple(vals["fractions"])
                kw[key] = typ(**vals)
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class RewriteRecord:
    doc_id: int
    rewritten_text: str
    label: str
    epsilon_charged: float | None
    original_text: str | None = None
    individual_id: str | None = None

    def to_json(self) -> dict:
        row = {
            "doc_id": self.doc_id,
            "text": self.rewritten_text,
            "label": self.label,
            "epsilon_charged": "inf" if self.epsilon_charged is None else self.epsilon_charged,
        }
        if self.original_text is not None:
            row["original_text"] = self.original_text
        if self.individual_id is not None:
            row["individual_id"] = self.individual_id
        return row


# data -----------------------------------------------------------------------

def load_public(cfg: ExperimentConfig) -> tuple[list[LabeledDocument], list[str]]:
    docs = generate_synthetic("public", cfg.data.public_count, cfg.data.data_seed)
    sources = [f"synthetic:public:{cfg.data.data_seed}:{cfg.data.public_count}"]
    if cfg.data.public_path:
        path = Path(cfg.data.public_path)
        lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        docs += [LabeledDocument(t, "public") for t in lines]
        sources.append(str(path.resolve()))
    return docs, sources


def load_downstream(cfg: ExperimentConfig) -> tuple[list[LabeledDocument], str]:
    if cfg.data.downstream_path:
        path = Path(cfg.data.downstream_path)
        return load_jsonl(path), str(path.resolve())
    return (generate_synthetic("sentiment", cfg.data.downstream_count, cfg.data.data_seed + 1),
            f"synthetic:sentiment:{cfg.data.data_seed + 1}:{cfg.data.downstream_count}")


def assert_disjoint(public: Sequence[LabeledDocument], downstream: Sequence[LabeledDocument]) -> None:
    shared = {normalize(d.text) for d in public} & {normalize(d.text) for d in downstream}
    if shared:
        raise DataLeakError(f"{len(shared)} downstream document(s) also occur in the public corpus")


# stages ---------------------------------------------------------------------

def latent_options(clip_spec: ClipSpec, mask: PruneMask | None, l: int, noise_sampler=None) -> LatentOptions:
    return LatentOptions(clip_c=clip_spec.c, clip_mode=clip_spec.mode,
                         keep=None if mask is None else mask.keep_matrix(l), noise_sampler=noise_sampler)


def model_config(cfg: ExperimentConfig, vocab_size: int) -> ModelConfig:
    kw = dict(cfg.model)
    kw["architecture"] = cfg.architecture
    if "latent_scale" not in kw:
        if kw["architecture"] == "transformer":
            kw["latent_scale"] = cfg.clip.c
        else:
            kw["latent_scale"] = cfg.clip.c / math.sqrt(2 * kw.get("hidden", 64))
    return ModelConfig(vocab_size=vocab_size, **kw)


def pretrain(cfg: ExperimentConfig, public: Sequence[LabeledDocument]) -> Checkpoint:
    """Train the autoencoder on public data, clipping in the loop, with early stopping on validation loss."""
    vocab = build_vocab(public)
    mcfg = model_config(cfg, len(vocab))
    torch.manual_seed(rngs.torch_seed(cfg.seed, rngs.PRETRAIN))
    model = Autoencoder.create(mcfg, seed=rngs.torch_seed(cfg.seed, rngs.PRETRAIN, 1))
    ids = tokenize_batch([d.text for d in public], vocab, mcfg.max_len)
    n_val = max(1, int(len(ids) * cfg.data.public_val_fraction))
    val, train = ids[:n_val], ids[n_val:]
    clip_spec = ClipSpec(BY_NORM if cfg.variant == "baseline" else BY_VALUE, cfg.clip.c)
    options = latent_options(clip_spec, None, mcfg.max_len)
    t = cfg.training
    stream = rngs.stream(cfg.seed, rngs.PRETRAIN)
    opt = make_optimizer(model, t.lr)
    best_loss, best_state, stale, history = math.inf, None, 0, []
    done = 0
    while done < t.pretrain_steps:
        n = min(t.eval_every, t.pretrain_steps - done)
        train_steps(model, train, n, stream, options, t.batch_size, t.lr, t.mask_prob, optimizer=opt)
        done += n
        val_loss = evaluate_loss(model, val, options)
        history.append({"step": done, "val_loss": val_loss})
        logger.info("pretrain step %d: validation loss %.4f", done, val_loss)
        if not math.isfinite(val_loss):
            raise FloatingPointError("non-finite validation loss during pretraining")
        if val_loss < best_loss - 1e-4:
            best_loss, best_state, stale = val_loss, copy.deepcopy(model.net.state_dict()), 0
        else:
            stale += 1
            if stale >= t.patience:
                break
    model.net.load_state_dict(best_state)
    model.frozen = True
    return Checkpoint(model, vocab, clip_spec, None, {"stage": "pretrain", "val_history": history,
                                                      "best_val_loss": best_loss, "seed": cfg.seed})


def prepare_pr(ckpt: Checkpoint, schedule: PruneSchedule, public: Sequence[LabeledDocument], cfg: ExperimentConfig) -> Checkpoint:
    ids = tokenize_batch([d.text for d in public], ckpt.vocab, ckpt.model.config.max_len)
    result = iterative_prune_train(ckpt.model, ids, schedule, rngs.stream(cfg.seed, rngs.PRUNE),
                                   batch_size=cfg.training.batch_size, lr=cfg.training.lr, clip_c=cfg.clip.c)
    meta = {"stage": "prune", "schedule": schedule.to_json(), "mask_history": [m.to_json() for m in result.masks],
            "seed": cfg.seed}
    return Checkpoint(result.model, ckpt.vocab, ckpt.clip, result.deployed, meta)


def calibration_for(ckpt: Checkpoint, clip_spec: ClipSpec) -> Sensitivity:
    cfg = ckpt.model.config
    if ckpt.mask is not None:
        n = effective_dim(ckpt.mask, cfg.max_len)
    else:
        n = cfg.latent_dim
    return Sensitivity.for_clipping(clip_spec.c, n, clip_spec.mode)


def _keep_flat(ckpt: Checkpoint) -> np.ndarray:
    cfg = ckpt.model.config
    if ckpt.mask is None:
        return np.ones(cfg.latent_shape, dtype=bool)
    return ckpt.mask.keep_matrix(cfg.max_len)


def batch_noise_sampler(spec, keep: np.ndarray, stream: np.random.Generator):
    def sample(z: np.ndarray) -> np.ndarray:
        noise = np.zeros(z.shape, dtype=np.float64)
        noise[:, keep] = sample_noise(spec, stream, (z.shape[0], int(keep.sum())))
        return noise
    return sample


def prepare_pr_plus(ckpt: Checkpoint, privacy: PrivacyParams, epochs: int, public: Sequence[LabeledDocument],
                    cfg: ExperimentConfig) -> Checkpoint:
    """Continue training the pruned model with prune, clip and calibrated noise on every step."""
    if not privacy.is_private:
        raise ValueError("pr-plus needs a finite epsilon")
    model = copy.deepcopy(ckpt.model)
    model.frozen = False
    l = model.config.max_len
    clip_spec = ClipSpec(BY_VALUE, cfg.clip.c)
    sens = calibration_for(ckpt, clip_spec)
    spec = noise_spec(sens, privacy)
    eps_key = int(round(privacy.epsilon * 1000))
    stream = rngs.stream(cfg.seed, rngs.NOISY_TRAIN, eps_key)
    options = latent_options(clip_spec, ckpt.mask, l, batch_noise_sampler(spec, _keep_flat(ckpt), stream))
    ids = tokenize_batch([d.text for d in public], ckpt.vocab, l)
    steps = epochs * cfg.prplus.steps_per_epoch
    hist = train_steps(model, ids, steps, stream, options, cfg.training.batch_size, cfg.training.lr, cfg.prplus.mask_prob)
    model.frozen = True
    meta = dict(ckpt.meta)
    meta.update({"stage": "train-noisy", "epsilon": privacy.epsilon, "delta": privacy.delta,
                 "mechanism": privacy.mechanism, "epochs": epochs, "steps": steps, "final_loss": hist[-1]})
    return Checkpoint(model, ckpt.vocab, clip_spec, ckpt.mask, meta)


def group_documents(docs: Sequence[LabeledDocument], mode: str) -> tuple[list[LabeledDocument], list[int]]:
    """Apply per-individual grouping. Returns documents to rewrite and the k charged to each."""
    if not any(d.individual_id is not None for d in docs):
        return list(docs), [1] * len(docs)
    counts: dict[str, int] = {}
    for d in docs:
        if d.individual_id is not None:
            counts[d.individual_id] = counts.get(d.individual_id, 0) + 1
    if mode == "compose":
        return list(docs), [counts[d.individual_id] if d.individual_id is not None else 1 for d in docs]
    merged: dict[str, list[LabeledDocument]] = {}
    out: list[LabeledDocument | str] = []
    for d in docs:
        if d.individual_id is None:
            out.append(d)
        else:
            if d.individual_id not in merged:
                merged[d.individual_id] = []
                out.append(d.individual_id)
            merged[d.individual_id].append(d)
    result = []
    for item in out:
        if isinstance(item, LabeledDocument):
            result.append(item)
        else:
            group = merged[item]
            labels = [g.label for g in group]
            label = max(sorted(set(labels)), key=labels.count)
            result.append(LabeledDocument(" ".join(g.text for g in group), label, item))
    return result, [1] * len(result)


@torch.no_grad()
def encode_all(model: Autoencoder, ids: np.ndarray, batch_size: int = 512) -> np.ndarray:
    model.net.eval()
    parts = [model.encode(ids[i : i + batch_size]).double().numpy() for i in range(0, len(ids), batch_size)]
    return np.concatenate(parts) if parts else np.zeros((0, *model.config.latent_shape))


def privatize_batch(z: np.ndarray, ckpt: Checkpoint, clip_spec: ClipSpec, privacy: PrivacyParams, seed: int,
                    doc_ids: Sequence[int]) -> tuple[np.ndarray, Sensitivity]:
    """Prune, clip and noise a batch of latents; document ``i`` draws from stream ``(seed, doc_ids[i])``."""
    keep = _keep_flat(ckpt)
    sens = calibration_for(ckpt, clip_spec)
    z = np.where(keep, z, 0.0)
    zbar = clip(z, clip_spec)
    out = np.empty_like(zbar)
    for i, doc_id in enumerate(doc_ids):
        out[i] = privatize_latent(zbar[i], sens, privacy, rngs.document_stream(seed, doc_id), keep)
    return out, sens


def rewrite_dataset(docs: Sequence[LabeledDocument], ckpt: Checkpoint, privacy: PrivacyParams, seed: int,
                    beam: int = 10, audit: bool = False, grouping: str = "compose", clip_spec: ClipSpec | None = None,
                    doc_id_offset: int = 0, batch_size: int = 256) -> tuple[list[RewriteRecord], dict]:
    if not ckpt.frozen:
        raise RuntimeError("rewriting needs a frozen checkpoint")
    clip_spec = clip_spec or ckpt.clip
    if not docs:
        logger.warning("empty dataset; nothing to rewrite")
        return [], calibration_report(calibration_for(ckpt, clip_spec), privacy)
    docs, ks = group_documents(docs, grouping)
    if privacy.is_private and privacy.mechanism == GAUSSIAN and privacy.delta >= 1.0 / len(docs):
        logger.warning("delta=%g is not below 1/N for N=%d; guideline suggests %g", privacy.delta, len(docs),
                       delta_guideline(len(docs)))
    model = ckpt.model
    l = model.config.max_len
    ids = tokenize_batch([d.text for d in docs], ckpt.vocab, l)
    records: list[RewriteRecord] = []
    sens = calibration_for(ckpt, clip_spec)
    for start in range(0, len(docs), batch_size):
        chunk = ids[start : start + batch_size]
        doc_ids = [doc_id_offset + start + i for i in range(len(chunk))]
        z = encode_all(model, chunk)
        zdot, sens = privatize_batch(z, ckpt, clip_spec, privacy, seed, doc_ids)
        out = decode(model, torch.as_tensor(zdot, dtype=model.dtype), beam)
        for j, row in enumerate(out):
            d = docs[start + j]
            eps = None if privacy.epsilon is None else compose_budget(privacy.epsilon, ks[start + j])
            records.append(RewriteRecord(doc_ids[j], detokenize(row, ckpt.vocab), d.label, eps,
                                         d.text if audit else None, d.individual_id))
    calib = calibration_report(sens, privacy)
    return records, calib


def clip_estimate(ckpt: Checkpoint, public: Sequence[LabeledDocument], limit: int = 2000, rule: str = HALF_SIGMA):
    ids = tokenize_batch([d.text for d in public[:limit]], ckpt.vocab, ckpt.model.config.max_len)
    z = encode_all(ckpt.model, ids)
    if ckpt.mask is not None:
        z = z[..., ckpt.mask.alive]
    return estimate_clip_constant([z], rule)


# evaluation -----------------------------------------------------------------

def downstream_scores(train_docs, val_docs, test_docs, seed: int) -> float:
    model = train_classifier(train_docs, val_docs, seed=rngs.torch_seed(seed, rngs.CLASSIFIER))
    return macro_f1(model, test_docs)


def records_to_docs(records: Sequence[RewriteRecord]) -> list[LabeledDocument]:
    return [LabeledDocument(r.rewritten_text, r.label, r.individual_id) for r in records]


# orchestration --------------------------------------------------------------

class _Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def stage(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, exc_type, exc, tb):
                timer.timings[name] = time.perf_counter() - self.t0
                if exc is not None and not isinstance(exc, StageError):
                    raise StageError(name, exc) from exc
                return False

        return _Ctx()


def build_checkpoint(cfg: ExperimentConfig, public: Sequence[LabeledDocument], timer: _Timer | None = None,
                     cache: dict | None = None) -> Checkpoint:
    """Run the variant's training stages; ``cache`` memoizes shared stages across configs."""
    timer = timer or _Timer()
    cache = {} if cache is None else cache
    arch_key = ("pretrain", cfg.architecture, cfg.seed, cfg.clip.c, json.dumps(cfg.model, sort_keys=True))
    with timer.stage("pretrain"):
        if arch_key not in cache:
            cache[arch_key] = pretrain(cfg, public)
        ckpt = cache[arch_key]
    if cfg.variant in ("pr", "pr-plus"):
        pr_key = arch_key + ("prune", json.dumps(cfg.schedule.to_json(), sort_keys=True))
        with timer.stage("prune"):
            if pr_key not in cache:
                cache[pr_key] = prepare_pr(ckpt, cfg.schedule, public, cfg)
            ckpt = cache[pr_key]
        if cfg.variant == "pr-plus":
            epochs = cfg.prplus.epochs(cfg.privacy.epsilon)
            plus_key = pr_key + ("plus", cfg.privacy.to_json()["epsilon"], cfg.privacy.delta, cfg.privacy.mechanism,
                                 epochs, cfg.prplus.steps_per_epoch)
            with timer.stage("train-noisy"):
                if plus_key not in cache:
                    cache[plus_key] = prepare_pr_plus(ckpt, cfg.privacy, epochs, public, cfg)
                ckpt = cache[plus_key]
    return ckpt


def evaluate_rewrites(cfg: ExperimentConfig, ckpt: Checkpoint, downstream: Sequence[LabeledDocument],
                      timer: _Timer | None = None, cache: dict | None = None) -> dict:
    timer = timer or _Timer()
    train_docs, val_docs, test_docs = split(list(downstream), cfg.data.fractions, cfg.data.data_seed)
    clip_spec = ClipSpec(cfg.clip.mode, cfg.clip.c, cfg.clip.c_min, cfg.clip.c_max)
    with timer.stage("rewrite"):
        train_rw, calib = rewrite_dataset(train_docs, ckpt, cfg.privacy, cfg.seed, cfg.beam, True, cfg.grouping, clip_spec)
        val_rw, _ = rewrite_dataset(val_docs, ckpt, cfg.privacy, cfg.seed, cfg.beam, True, cfg.grouping, clip_spec,
                                    doc_id_offset=len(train_docs))
    with timer.stage("evaluate"):
        bleu = corpus_bleu([normalize(r.original_text) for r in train_rw], [r.rewritten_text for r in train_rw])
        f1 = downstream_scores(records_to_docs(train_rw), records_to_docs(val_rw), test_docs, cfg.seed)
        key = ("original_f1", cfg.seed, cfg.data.data_seed, len(downstream))
        if cache is not None and key in cache:
            f1_orig = cache[key]
        else:
            f1_orig = downstream_scores(train_docs, val_docs, test_docs, cfg.seed)
            if cache is not None:
                cache[key] = f1_orig
    return {"train_records": train_rw, "val_records": val_rw, "calibration": calib, "bleu": bleu,
            "macro_f1": f1, "original_macro_f1": f1_orig,
            "sizes": {"train": len(train_docs), "val": len(val_docs), "test": len(test_docs)}}


def run_experiment(cfg: ExperimentConfig, cache: dict | None = None, write: bool = True) -> dict:
    timer = _Timer()
    with timer.stage("load"):
        public, public_sources = load_public(cfg)
        downstream, downstream_source = load_downstream(cfg)
        assert_disjoint(public, downstream)
        if downstream_source in public_sources:
            raise DataLeakError("the downstream dataset is configured as a public corpus")
    ckpt = build_checkpoint(cfg, public, timer, cache)
    result = evaluate_rewrites(cfg, ckpt, downstream, timer)
    calib = result["calibration"]
    sens = calibration_for(ckpt, ClipSpec(cfg.clip.mode, cfg.clip.c))
    spec = noise_spec(sens, cfg.privacy)
    recomputed = 0.0 if spec is None else spec.scale
    if not math.isclose(recomputed, calib["noise_scale"], rel_tol=0, abs_tol=0):
        raise AssertionError("noise scale used for rewriting differs from the calibration")
    mask_stats = None
    if ckpt.mask is not None:
        mask_stats = {"d_tok": ckpt.mask.d_tok, "pruned": len(ckpt.mask), "fraction": ckpt.mask.fraction,
                      "pruned_indices": list(ckpt.mask.pruned_indices),
                      "effective_dim": effective_dim(ckpt.mask, ckpt.model.config.max_len),
                      "history": ckpt.meta.get("mask_history", [])}
    report = {
        "schema_version": 1,
        "config": cfg.to_json(),
        "variant": cfg.variant,
        "architecture": ckpt.model.config.architecture,
        "latent_dim": ckpt.model.config.latent_dim,
        "calibration": {**calib, "recomputed_noise_scale": recomputed},
        "mask": mask_stats,
        "bleu": result["bleu"].to_json(),
        "downstream": {"macro_f1": result["macro_f1"], "original_macro_f1": result["original_macro_f1"]},
        "sizes": result["sizes"],
        "data_access": {"pretrain": public_sources, "prune": public_sources if cfg.variant in ("pr", "pr-plus") else [],
                        "train_noisy": public_sources if cfg.variant == "pr-plus" else [],
                        "rewrite": [downstream_source]},
        "timings": dict(timer.timings),
    }
    validate_report(report)
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "rewritten_train.jsonl", (r.to_json() if cfg.audit else _strip(r) for r in result["train_records"]))
        write_jsonl(out / "rewritten_val.jsonl", (r.to_json() if cfg.audit else _strip(r) for r in result["val_records"]))
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    return report


def report_schema() -> dict:
    return json.loads(resources.files("latentdp").joinpath("report.schema.json").read_text(encoding="utf-8"))


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not match the shipped schema."""
    jsonschema.validate(report, report_schema())


def _strip(record: RewriteRecord) -> dict:
    row = record.to_json()
    row.pop("original_text", None)
    return row


def sweep(base: ExperimentConfig, variants: Sequence[str], epsilons: Sequence[float | None], seeds: Sequence[int],
          cache: dict | None = None) -> list[dict]:
    """Privacy/utility grid; training stages are shared through ``cache``."""
    cache = {} if cache is None else cache
    public, _ = load_public(base)
    downstream, _ = load_downstream(base)
    assert_disjoint(public, downstream)
    rows = []
    for seed in seeds:
        for variant in variants:
            for eps in epsilons:
                privacy = replace(base.privacy, epsilon=eps)
                if variant == "pr-plus" and eps is None:
                    cfg = replace(base, variant="pr", privacy=privacy, seed=seed)
                else:
                    cfg = replace(base, variant=variant, privacy=privacy, seed=seed)
                ckpt = build_checkpoint(cfg, public, cache=cache)
                res = evaluate_rewrites(cfg, ckpt, downstream, cache=cache)
                rows.append({"variant": variant, "epsilon": eps, "seed": seed, "bleu": res["bleu"].score,
                             "macro_f1": res["macro_f1"], "original_macro_f1": res["original_macro_f1"],
                             "noise_scale": res["calibration"]["noise_scale"],
                             "dimension": res["calibration"]["dimension"]})
                logger.info("sweep %s eps=%s seed=%d: BLEU %.2f F1 %.3f", variant, eps, seed, rows[-1]["bleu"],
                            rows[-1]["macro_f1"])
    return rows
