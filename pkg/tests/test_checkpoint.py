import json

import numpy as np
import pytest
import torch

from latentdp.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from latentdp.clipping import ClipSpec
from latentdp.corpus import build_vocab
from latentdp.model import Autoencoder, ModelConfig
from latentdp.pruning import PruneMask


@pytest.fixture
def ckpt():
    vocab = build_vocab(["the cat sat", "a dog ran"], 32)
    cfg = ModelConfig(vocab_size=len(vocab), d_tok=8, layers=1, heads=2, embed_dim=8, max_len=6, latent_scale=0.1)
    model = Autoencoder.create(cfg, seed=4)
    model.frozen = True
    return Checkpoint(model, vocab, ClipSpec("value", 0.1), PruneMask((1, 5), 8), {"stage": "prune", "seed": 4})


def test_roundtrip_exact(tmp_path, ckpt):
    save_checkpoint(ckpt, tmp_path / "ck")
    back = load_checkpoint(tmp_path / "ck")
    assert back.frozen
    assert back.model.config == ckpt.model.config
    assert back.vocab.itos == ckpt.vocab.itos
    assert back.mask == ckpt.mask
    assert back.clip == ckpt.clip
    for (k, a), (k2, b) in zip(ckpt.model.net.state_dict().items(), back.model.net.state_dict().items()):
        assert k == k2 and torch.equal(a, b)


def test_same_output_after_reload(tmp_path, ckpt):
    save_checkpoint(ckpt, tmp_path / "ck")
    back = load_checkpoint(tmp_path / "ck")
    ids = np.array([[3, 5, 6, 4, 0, 0]])
    assert torch.equal(ckpt.model.encode(ids), back.model.encode(ids))


def test_manifest_is_plain_json(tmp_path, ckpt):
    save_checkpoint(ckpt, tmp_path / "ck")
    manifest = json.loads((tmp_path / "ck" / "manifest.json").read_text())
    assert manifest["prune_mask"]["pruned_indices"] == [1, 5]
    assert manifest["frozen"] is True


def test_saving_twice_is_byte_identical(tmp_path, ckpt):
    save_checkpoint(ckpt, tmp_path / "a")
    save_checkpoint(ckpt, tmp_path / "b")
    for f in sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file()):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_bad_version(tmp_path, ckpt):
    save_checkpoint(ckpt, tmp_path / "ck")
    path = tmp_path / "ck" / "manifest.json"
    manifest = json.loads(path.read_text())
    manifest["format_version"] = 99
    path.write_text(json.dumps(manifest))
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "ck")
