"""Checkpoint directories.

Layout::

    manifest.json      config, architecture, format version, prune mask,
                       clip spec, privacy, tensor index
    vocab.json         token -> id
    tensors/<name>.f32 little-endian float32, row-major, one file per tensor
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .clipping import ClipSpec
from .corpus import Vocab
from .model import Autoencoder, ModelConfig
from .pruning import PruneMask

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: Autoencoder
    vocab: Vocab
    clip: ClipSpec | None = None
    mask: PruneMask | None = None
    meta: dict = field(default_factory=dict)

    @property
    def frozen(self) -> bool:
        return self.model.frozen


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    (path / "tensors").mkdir(parents=True, exist_ok=True)
    index = {}
    for name, tensor in ckpt.model.net.state_dict().items():
        arr = tensor.detach().cpu().numpy().astype("<f4")
        fname = f"tensors/{name}.f32"
        (path / fname).write_bytes(np.ascontiguousarray(arr).tobytes(order="C"))
        index[name] = {"file": fname, "shape": list(arr.shape)}
    manifest = {
        "format_version": FORMAT_VERSION,
        "architecture": ckpt.model.config.architecture,
        "config": ckpt.model.config.to_json(),
        "frozen": ckpt.model.frozen,
        "clip": ckpt.clip.to_json() if ckpt.clip else None,
        "prune_mask": ckpt.mask.to_json() if ckpt.mask else None,
        "meta": ckpt.meta,
        "tensors": index,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    ckpt.vocab.save(path / "vocab.json")
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format_version')!r}")
    config = ModelConfig(**manifest["config"])
    model = Autoencoder.create(config)
    state = {}
    for name, entry in manifest["tensors"].items():
        raw = np.frombuffer((path / entry["file"]).read_bytes(), dtype="<f4")
        state[name] = torch.from_numpy(raw.reshape(entry["shape"]).astype(np.float32))
    model.net.load_state_dict(state)
    model.frozen = bool(manifest["frozen"])
    clip = ClipSpec(**manifest["clip"]) if manifest.get("clip") else None
    mask = PruneMask.from_json(manifest["prune_mask"]) if manifest.get("prune_mask") else None
    return Checkpoint(model, Vocab.load(path / "vocab.json"), clip, mask, manifest.get("meta", {}))
