"""Local differential privacy for text rewriting through clipped, pruned autoencoder latents."""

from .clipping import ClipSpec, clip_by_norm, clip_by_value, estimate_clip_constant
from .corpus import LabeledDocument, generate_synthetic, load_jsonl, write_jsonl
from .evaluation import corpus_bleu, macro_f1_score, train_classifier
from .kernels import BACKEND
from .mechanisms import PrivacyParams, Sensitivity, noise_spec, privatize_latent
from .pipeline import VARIANTS, ExperimentConfig, rewrite_dataset, run_experiment, validate_report
from .pruning import PruneMask, PruneSchedule, iterative_prune_train

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "VARIANTS", "ClipSpec", "ExperimentConfig", "LabeledDocument", "PrivacyParams", "PruneMask",
    "PruneSchedule", "Sensitivity", "clip_by_norm", "clip_by_value", "corpus_bleu", "estimate_clip_constant",
    "generate_synthetic", "iterative_prune_train", "load_jsonl", "macro_f1_score", "noise_spec",
    "privatize_latent", "rewrite_dataset", "run_experiment", "train_classifier", "validate_report", "write_jsonl",
]
