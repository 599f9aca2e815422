import numpy as np
import pytest
import torch

from latentdp.corpus import BOS, EOS, MASK, PAD
from latentdp.model import (Autoencoder, FrozenModelError, LatentOptions, ModelConfig, beam_decode, corrupt, decode,
                            flatten_latent, greedy_decode, make_optimizer, train_step, train_steps, unflatten_latent)


def batch(rows, width):
    out = np.full((len(rows), width), PAD, dtype=np.int64)
    for i, r in enumerate(rows):
        seq = [BOS] + list(r) + [EOS]
        out[i, : len(seq)] = seq
    return out


@pytest.fixture
def tiny_cfg():
    return ModelConfig(vocab_size=30, d_tok=8, layers=1, heads=2, embed_dim=8, max_len=8, ffn_mult=2)


@pytest.mark.parametrize("arch", ["transformer", "recurrent"])
def test_latent_shapes(arch):
    cfg = ModelConfig(vocab_size=50, architecture=arch)
    m = Autoencoder.create(cfg, seed=0)
    z = m.encode(batch([[5, 6, 7]], 20))
    assert tuple(z.shape[1:]) == cfg.latent_shape
    assert cfg.latent_dim == (640 if arch == "transformer" else 128)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=50, d_tok=33, heads=2)
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=50, max_len=0)


def test_create_is_deterministic_and_leaves_global_rng(tiny_cfg):
    state = torch.random.get_rng_state()
    a = Autoencoder.create(tiny_cfg, seed=3)
    assert torch.equal(state, torch.random.get_rng_state())
    b = Autoencoder.create(tiny_cfg, seed=3)
    for (ka, va), (kb, vb) in zip(a.net.state_dict().items(), b.net.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)


def test_out_of_vocab_rejected(tiny_cfg):
    m = Autoencoder.create(tiny_cfg)
    with pytest.raises(ValueError):
        m.encode(np.array([[BOS, 99, EOS]]))


def test_flatten_roundtrip():
    z = np.random.default_rng(0).normal(size=(20, 32))
    v = flatten_latent(z)
    assert v.shape == (640,)
    np.testing.assert_array_equal(unflatten_latent(v, 20, 32), z)
    with pytest.raises(ValueError):
        unflatten_latent(np.zeros(641), 20, 32)


def test_corruption_never_touches_specials():
    ids = batch([[5] * 6, [7, 8, 9]], 10)
    rng = np.random.default_rng(0)
    for _ in range(50):
        out = corrupt(ids, rng, mask_prob=0.3, delete_prob=0.2)
        for row in out:
            assert row[0] == BOS
            assert (row == EOS).sum() == 1
            end = int(np.argmax(row == EOS))
            assert np.all(row[end + 1 :] == PAD)


def test_corruption_rate():
    ids = batch([[5] * 18] * 500, 20)
    out = corrupt(ids, np.random.default_rng(1), mask_prob=0.15)
    assert (out == MASK).sum() / (18 * 500) == pytest.approx(0.15, abs=0.01)


def test_corruption_identity_at_zero():
    ids = batch([[5, 6]], 6)
    np.testing.assert_array_equal(corrupt(ids, np.random.default_rng(0)), ids)


def test_frozen_rejects_updates(tiny_cfg):
    m = Autoencoder.create(tiny_cfg)
    m.frozen = True
    ids = batch([[5, 6]], 8)
    with pytest.raises(FrozenModelError):
        train_step(m, ids, ids, make_optimizer(m))


def test_overfit_single_sentence_loss_decreases(tiny_cfg):
    m = Autoencoder.create(tiny_cfg, seed=0)
    ids = batch([[5, 6, 7, 8]], 8)
    opt = make_optimizer(m, lr=1e-2)
    losses = [train_step(m, ids, ids, opt) for _ in range(50)]
    assert losses[-1] < 0.5 * losses[0]
    assert sum(b > a for a, b in zip(losses, losses[1:])) <= 5


def test_train_steps_reproducible(tiny_cfg):
    ids = batch([[5, 6, 7], [8, 9], [10, 11, 12, 13]] * 4, 8)

    def run():
        torch.manual_seed(0)
        m = Autoencoder.create(tiny_cfg, seed=1)
        train_steps(m, ids, 5, np.random.default_rng(0), batch_size=4, mask_prob=0.1)
        return m

    a, b = run(), run()
    for va, vb in zip(a.net.state_dict().values(), b.net.state_dict().values()):
        assert torch.equal(va, vb)


def test_transform_latent_prune_clip_noise(tiny_cfg):
    m = Autoencoder.create(tiny_cfg)
    z = torch.full((2, 8, 8), 0.5)
    keep = np.ones((8, 8), dtype=bool)
    keep[:, 3] = False
    out = m.transform_latent(z, LatentOptions(clip_c=0.1, keep=keep, noise_sampler=lambda a: np.ones_like(a)))
    assert torch.all(out[..., 3] == 1.0)
    assert torch.allclose(out[..., 0], torch.full((2, 8), 1.1))


def test_norm_clip_in_loop(tiny_cfg):
    m = Autoencoder.create(tiny_cfg)
    z = torch.randn(3, 8, 8)
    out = m.transform_latent(z, LatentOptions(clip_c=0.5, clip_mode="norm"))
    assert torch.all(out.reshape(3, -1).norm(dim=1) <= 0.5 + 1e-6)


def test_beam_one_equals_greedy(tiny_cfg):
    m = Autoencoder.create(tiny_cfg, seed=2)
    z = torch.randn(4, 8, 8) * 0.1
    np.testing.assert_array_equal(beam_decode(m, z, 1), greedy_decode(m, z))
    np.testing.assert_array_equal(decode(m, z, 1), greedy_decode(m, z))


def test_beam_output_well_formed(tiny_cfg):
    m = Autoencoder.create(tiny_cfg, seed=2)
    out = beam_decode(m, torch.randn(3, 8, 8) * 0.1, 4)
    assert out.shape == (3, 8)
    assert np.all(out[:, 0] == BOS)


def test_latents_differ_for_different_inputs(tiny_cfg):
    m = Autoencoder.create(tiny_cfg)
    a = m.encode(batch([[5, 6, 7]], 8))
    b = m.encode(batch([[5, 9, 7]], 8))
    assert not torch.equal(a, b)


def test_finite_difference_gradient():
    torch.manual_seed(0)
    cfg = ModelConfig(vocab_size=7, d_tok=4, layers=1, heads=2, embed_dim=4, max_len=4, ffn_mult=2)
    m = Autoencoder.create(cfg, seed=0, dtype=torch.float64)
    ids = batch([[5, 6], [6]], 4)
    loss = m.loss(ids, ids)
    params = [p for p in m.parameters() if p.requires_grad]
    grads = torch.autograd.grad(loss, params)
    worst = 0.0
    h = 1e-6
    with torch.no_grad():
        for p, g in zip(params, grads):
            flat, gflat = p.view(-1), g.reshape(-1)
            for i in range(0, flat.numel(), max(1, flat.numel() // 6)):
                orig = flat[i].item()
                flat[i] = orig + h
                up = m.loss(ids, ids).item()
                flat[i] = orig - h
                down = m.loss(ids, ids).item()
                flat[i] = orig
                num = (up - down) / (2 * h)
                denom = max(abs(num), abs(gflat[i].item()), 1e-6)
                worst = max(worst, abs(num - gflat[i].item()) / denom)
    assert worst <= 1e-4
