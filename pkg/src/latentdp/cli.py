"""Command-line entry point: ``latentdp <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline as pl
from .checkpoint import load_checkpoint, save_checkpoint
from .clipping import HALF_SIGMA, TWO_SIGMA, ClipSpec
from .corpus import DatasetFormatError, LabeledDocument, load_jsonl, normalize, write_jsonl
from .evaluation import corpus_bleu, macro_f1, train_classifier
from .mechanisms import GAUSSIAN, LAPLACE, Sensitivity, calibration_report

logger = logging.getLogger("latentdp")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config; flags below override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", help="privacy budget per document, a positive real or 'inf'")
    p.add_argument("--delta", type=float)
    p.add_argument("--mechanism", choices=(LAPLACE, GAUSSIAN))
    p.add_argument("--variant", choices=pl.VARIANTS)
    p.add_argument("--beam", type=int, help="beam width for decoding (default 10)")
    p.add_argument("--audit", action="store_true", default=None, help="keep original text next to each rewrite")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentdp", description="Local-DP text rewriting in an autoencoder latent space.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train the autoencoder on the public corpus")
    _common(p)
    p.add_argument("--out", type=Path, required=True, help="checkpoint directory to write")

    p = sub.add_parser("prune", help="iterative pruning with retraining on public data")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train-noisy", help="continue training a pruned checkpoint under calibrated latent noise")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--epochs", type=int, help="override the epsilon-dependent epoch schedule")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("rewrite", help="privatize a JSONL dataset")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--grouping", choices=("compose", "concatenate"))

    p = sub.add_parser("evaluate", help="BLEU against originals and optional downstream macro-F1")
    _common(p)
    p.add_argument("--input", type=Path, required=True, help="rewritten JSONL")
    p.add_argument("--reference", type=Path, help="original JSONL in the same order; defaults to audit fields")
    p.add_argument("--val", type=Path, help="rewritten validation JSONL for the classifier")
    p.add_argument("--test", type=Path, help="original test JSONL; enables the downstream score")

    p = sub.add_parser("calibrate", help="print sensitivity and noise scale for a clip constant and dimension")
    _common(p)
    p.add_argument("--clip-c", type=float, default=None)
    p.add_argument("--clip-mode", choices=("value", "norm"), default=None)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--dimension", type=int, help="latent dimension n after pruning")
    g.add_argument("--checkpoint", type=Path, help="read n from a checkpoint")

    p = sub.add_parser("estimate-clip", help="fit a normal to public-data latents and suggest C")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--rule", choices=(HALF_SIGMA, TWO_SIGMA), default=HALF_SIGMA)
    p.add_argument("--limit", type=int, default=2000)

    p = sub.add_parser("run", help="pretrain, prune, rewrite and evaluate in one go; writes a report")
    _common(p)
    p.add_argument("--output-dir", type=Path)
    return parser


def load_config(args) -> pl.ExperimentConfig:
    obj = json.loads(args.config.read_text(encoding="utf-8")) if args.config else {}
    if args.variant:
        obj["variant"] = args.variant
    for key in ("seed", "beam", "audit"):
        if getattr(args, key, None) is not None:
            obj[key] = getattr(args, key)
    if getattr(args, "output_dir", None) is not None:
        obj["output_dir"] = str(args.output_dir)
    if getattr(args, "grouping", None) is not None:
        obj["grouping"] = args.grouping
    privacy = dict(obj.get("privacy") or {})
    if args.epsilon is not None:
        privacy["epsilon"] = args.epsilon
    if args.mechanism is not None:
        privacy["mechanism"] = args.mechanism
    if args.delta is not None:
        privacy["delta"] = args.delta
    if privacy:
        privacy.setdefault("epsilon", None)
        obj["privacy"] = privacy
    clip = dict(obj.get("clip") or {})
    if getattr(args, "clip_c", None) is not None:
        clip["c"] = args.clip_c
    if clip:
        obj["clip"] = clip
    return pl.ExperimentConfig.from_json(obj)


def _public(cfg):
    public, _ = pl.load_public(cfg)
    return public


def cmd_pretrain(args, cfg):
    ckpt = pl.pretrain(cfg, _public(cfg))
    save_checkpoint(ckpt, args.out)
    return {"checkpoint": str(args.out), "architecture": ckpt.model.config.architecture,
            "latent_dim": ckpt.model.config.latent_dim, "final_val_loss": ckpt.meta.get("best_val_loss")}


def cmd_prune(args, cfg):
    ckpt = load_checkpoint(args.checkpoint)
    schedule = cfg.schedule or pl.PruneSchedule()
    cfg = replace(cfg, clip=replace(cfg.clip, c=ckpt.clip.c))
    out = pl.prepare_pr(ckpt, schedule, _public(cfg), cfg)
    save_checkpoint(out, args.out)
    return {"checkpoint": str(args.out), "pruned": len(out.mask), "d_tok": out.mask.d_tok,
            "fraction": out.mask.fraction, "pruned_indices": list(out.mask.pruned_indices)}


def cmd_train_noisy(args, cfg):
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.mask is None:
        raise SystemExit("train-noisy expects a pruned checkpoint (run `latentdp prune` first)")
    if not cfg.privacy.is_private:
        raise SystemExit("train-noisy needs a finite --epsilon")
    cfg = replace(cfg, clip=replace(cfg.clip, c=ckpt.clip.c))
    epochs = args.epochs or cfg.prplus.epochs(cfg.privacy.epsilon)
    out = pl.prepare_pr_plus(ckpt, cfg.privacy, epochs, _public(cfg), cfg)
    save_checkpoint(out, args.out)
    return {"checkpoint": str(args.out), "epochs": epochs, "final_loss": out.meta["final_loss"]}


def cmd_rewrite(args, cfg):
    ckpt = load_checkpoint(args.checkpoint)
    docs = load_jsonl(args.input)
    records, calib = pl.rewrite_dataset(docs, ckpt, cfg.privacy, cfg.seed, cfg.beam, cfg.audit, cfg.grouping, ckpt.clip)
    write_jsonl(args.output, (r.to_json() for r in records))
    return {"output": str(args.output), "documents": len(records), "calibration": calib}


def cmd_evaluate(args, cfg):
    rows = [json.loads(line) for line in args.input.read_text(encoding="utf-8").splitlines() if line.strip()]
    hyps = [r["text"] for r in rows]
    if args.reference:
        refs = [normalize(d.text) for d in load_jsonl(args.reference)]
    elif rows and all("original_text" in r for r in rows):
        refs = [normalize(r["original_text"]) for r in rows]
    else:
        refs = None
    out = {}
    if refs is not None:
        out["bleu"] = corpus_bleu(refs, hyps).to_json()
    if args.test:
        train = [LabeledDocument(r["text"], r["label"]) for r in rows]
        val = load_jsonl(args.val) if args.val else []
        model = train_classifier(train, val, seed=cfg.seed)
        out["macro_f1"] = macro_f1(model, load_jsonl(args.test))
    if not out:
        raise SystemExit("nothing to evaluate: pass --reference, rewrite with --audit, or pass --test")
    return out


def cmd_calibrate(args, cfg):
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
        spec = ClipSpec(args.clip_mode or ckpt.clip.mode, args.clip_c or ckpt.clip.c)
        sens = pl.calibration_for(ckpt, spec)
    else:
        c = args.clip_c if args.clip_c is not None else cfg.clip.c
        sens = Sensitivity.for_clipping(c, args.dimension, args.clip_mode or cfg.clip.mode)
    return calibration_report(sens, cfg.privacy)


def cmd_estimate_clip(args, cfg):
    ckpt = load_checkpoint(args.checkpoint)
    est = pl.clip_estimate(ckpt, _public(cfg), limit=args.limit, rule=args.rule)
    return {"mu": est.mu, "sigma": est.sigma, "recommended_c": est.recommended_c, "rule": est.rule}


def cmd_run(args, cfg):
    report = pl.run_experiment(cfg)
    return {"output_dir": cfg.output_dir, "bleu": report["bleu"]["score"], "macro_f1": report["downstream"]["macro_f1"],
            "noise_scale": report["calibration"]["noise_scale"]}


COMMANDS = {
    "pretrain": cmd_pretrain,
    "prune": cmd_prune,
    "train-noisy": cmd_train_noisy,
    "rewrite": cmd_rewrite,
    "evaluate": cmd_evaluate,
    "calibrate": cmd_calibrate,
    "estimate-clip": cmd_estimate_clip,
    "run": cmd_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"latentdp: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        result = COMMANDS[args.command](args, cfg)
    except DatasetFormatError as exc:
        print(f"latentdp: {exc}", file=sys.stderr)
        return 2
    except pl.StageError as exc:
        print(f"latentdp: {exc}", file=sys.stderr)
        return 1
    json.dump(result, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
