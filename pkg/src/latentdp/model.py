"""Toy sequence-to-sequence autoencoders trained from scratch.

Two architectures share one interface:

* ``transformer``: a small encoder-decoder whose latent is the final encoder
  layer's hidden states, one ``d_tok`` vector per position (``l x d_tok``).
  The decoder reads that latent only through cross-attention.
* ``recurrent``: a single-layer unidirectional LSTM whose latent is the
  concatenation of the final hidden and cell states (``2 * hidden``).

The latent is what gets pruned, clipped and perturbed; every decoder input
path goes through :meth:`Autoencoder.logits`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .corpus import BOS, EOS, MASK, PAD

ARCHITECTURES = ("transformer", "recurrent")


@dataclass
class ModelConfig:
    vocab_size: int
    architecture: str = "transformer"
    d_tok: int = 32
    layers: int = 2
    heads: int = 2
    hidden: int = 64
    embed_dim: int = 32
    max_len: int = 20
    ffn_mult: int = 4
    latent_scale: float = 1.0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        for name in ("vocab_size", "d_tok", "layers", "heads", "hidden", "embed_dim", "max_len", "ffn_mult"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.d_tok % self.heads:
            raise ValueError(f"d_tok={self.d_tok} is not divisible by heads={self.heads}")
        if not self.latent_scale > 0:
            raise ValueError("latent_scale must be positive")
        if self.vocab_size <= EOS:
            raise ValueError("vocab_size must leave room for the reserved ids")

    @property
    def latent_shape(self) -> tuple[int, ...]:
        if self.architecture == "transformer":
            return (self.max_len, self.d_tok)
        return (2 * self.hidden,)

    @property
    def latent_dim(self) -> int:
        return int(np.prod(self.latent_shape))

    def to_json(self) -> dict:
        return asdict(self)


class FrozenModelError(RuntimeError):
    pass


class NonFiniteLossError(FloatingPointError):
    pass


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, d_kv: int, heads: int):
        super().__init__()
        self.heads = heads
        self.d_head = d_model // heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_kv, d_model)
        self.v_proj = nn.Linear(d_kv, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def forward(self, x, memory, key_padding=None, causal=False):
        b, tq, _ = x.shape
        tk = memory.shape[1]
        q = self.q_proj(x).view(b, tq, self.heads, self.d_head).transpose(1, 2)
        k = self.k_proj(memory).view(b, tk, self.heads, self.d_head).transpose(1, 2)
        v = self.v_proj(memory).view(b, tk, self.heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        if key_padding is not None:
            scores = scores.masked_fill(key_padding[:, None, None, :], float("-inf"))
        if causal:
            future = torch.ones(tq, tk, dtype=torch.bool, device=x.device).triu(1)
            scores = scores.masked_fill(future, float("-inf"))
        out = torch.softmax(scores, dim=-1) @ v
        return self.out_proj(out.transpose(1, 2).reshape(b, tq, -1))


class FeedForward(nn.Sequential):
    def __init__(self, d: int, mult: int):
        super().__init__(nn.Linear(d, d * mult), nn.GELU(), nn.Linear(d * mult, d))


class EncoderLayer(nn.Module):
    def __init__(self, d: int, heads: int, mult: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d)
        self.attn = MultiHeadAttention(d, d, heads)
        self.norm2 = nn.LayerNorm(d)
        self.ff = FeedForward(d, mult)

    def forward(self, x, key_padding):
        h = self.norm1(x)
        x = x + self.attn(h, h, key_padding=key_padding)
        return x + self.ff(self.norm2(x))


class DecoderLayer(nn.Module):
    def __init__(self, d: int, d_latent: int, heads: int, mult: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(d)
        self.self_attn = MultiHeadAttention(d, d, heads)
        self.norm2 = nn.LayerNorm(d)
        self.cross_attn = MultiHeadAttention(d, d_latent, heads)
        self.norm3 = nn.LayerNorm(d)
        self.ff = FeedForward(d, mult)

    def forward(self, y, latent):
        h = self.norm1(y)
        y = y + self.self_attn(h, h, causal=True)
        # the latent enters unnormalized so the K/V weights see pruned columns as exact zeros
        y = y + self.cross_attn(self.norm2(y), latent)
        return y + self.ff(self.norm3(y))


class TinyTransformer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.d_tok
        self.tok_emb = nn.Embedding(cfg.vocab_size, d)
        self.pos_emb = nn.Embedding(cfg.max_len, d)
        self.encoder = nn.ModuleList(EncoderLayer(d, cfg.heads, cfg.ffn_mult) for _ in range(cfg.layers))
        self.enc_norm = nn.LayerNorm(d)
        # start the latent at the clipping scale so clamping does not zero every gradient
        nn.init.constant_(self.enc_norm.weight, cfg.latent_scale)
        self.decoder = nn.ModuleList(DecoderLayer(d, d, cfg.heads, cfg.ffn_mult) for _ in range(cfg.layers))
        self.dec_norm = nn.LayerNorm(d)
        self.lm_head = nn.Linear(d, cfg.vocab_size)
        self.latent_scale = cfg.latent_scale

    def embed(self, ids):
        pos = torch.arange(ids.shape[1], device=ids.device)
        return self.tok_emb(ids) + self.pos_emb(pos)[None]

    def encode(self, ids):
        x = self.embed(ids)
        pad = ids == PAD
        for layer in self.encoder:
            x = layer(x, pad)
        return self.enc_norm(x)

    def decode(self, latent, dec_in):
        # fixed rescale to unit range so attention logits are not crushed by a small clip box
        latent = latent / self.latent_scale
        y = self.embed(dec_in)
        for layer in self.decoder:
            y = layer(y, latent)
        return self.lm_head(self.dec_norm(y))

    def cross_attention_key_weight(self, layer: int = 0) -> torch.Tensor:
        return self.decoder[layer].cross_attn.k_proj.weight


class RecurrentAutoencoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.hidden = cfg.hidden
        self.emb = nn.Embedding(cfg.vocab_size, cfg.embed_dim)
        self.enc_rnn = nn.LSTM(cfg.embed_dim, cfg.hidden, batch_first=True)
        # the latent is also fed at every decoder step, not only as the initial state
        self.dec_rnn = nn.LSTM(cfg.embed_dim + 2 * cfg.hidden, cfg.hidden, batch_first=True)
        self.lm_head = nn.Linear(cfg.hidden, cfg.vocab_size)
        self.latent_scale = cfg.latent_scale

    def encode(self, ids):
        lengths = (ids != PAD).sum(dim=1).clamp(min=1)
        # read the source backwards so early tokens sit close to the latent
        pos = torch.arange(ids.shape[1], device=ids.device)[None, :]
        rev = (lengths[:, None] - 1 - pos).clamp(min=0)
        rev = torch.where(pos < lengths[:, None], rev, pos)
        ids = torch.gather(ids, 1, rev)
        packed = nn.utils.rnn.pack_padded_sequence(self.emb(ids), lengths.cpu(), batch_first=True, enforce_sorted=False)
        _, (h, c) = self.enc_rnn(packed)
        return torch.cat([h[0], c[0]], dim=-1) * self.latent_scale

    def decode(self, latent, dec_in):
        latent = latent / self.latent_scale
        h0 = latent[:, : self.hidden].unsqueeze(0).contiguous()
        c0 = latent[:, self.hidden :].unsqueeze(0).contiguous()
        x = self.emb(dec_in)
        x = torch.cat([x, latent[:, None, :].expand(-1, x.shape[1], -1)], dim=-1)
        out, _ = self.dec_rnn(x, (h0, c0))
        return self.lm_head(out)


@dataclass
class LatentOptions:
    """What happens to the encoder output before the decoder sees it.

    Applied in order: prune, clip, add noise. ``noise_sampler`` receives the
    latent batch (pruned and clipped, as a float64 array) and returns the noise
    to add; it is treated as a constant by the gradient.
    """

    clip_c: float | None = None
    clip_mode: str = "value"
    keep: np.ndarray | None = None
    noise_sampler: object | None = None

    def is_noop(self) -> bool:
        return self.clip_c is None and self.keep is None and self.noise_sampler is None


@dataclass
class Autoencoder:
    """A configured network plus its frozen flag."""

    config: ModelConfig
    net: nn.Module
    frozen: bool = False
    extra: dict = field(default_factory=dict)

    @classmethod
    def create(cls, config: ModelConfig, seed: int = 0, dtype=torch.float32) -> "Autoencoder":
        gen_state = torch.random.get_rng_state()
        torch.manual_seed(seed)
        try:
            net = TinyTransformer(config) if config.architecture == "transformer" else RecurrentAutoencoder(config)
        finally:
            torch.random.set_rng_state(gen_state)
        return cls(config, net.to(dtype))

    @property
    def dtype(self):
        return next(self.net.parameters()).dtype

    def encode(self, ids) -> torch.Tensor:
        ids = self._as_ids(ids)
        return self.net.encode(ids)

    def logits(self, latent, dec_in) -> torch.Tensor:
        return self.net.decode(latent, dec_in)

    def _as_ids(self, ids) -> torch.Tensor:
        ids = torch.as_tensor(np.asarray(ids), dtype=torch.long)
        if ids.ndim == 1:
            ids = ids[None]
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.config.vocab_size):
            raise ValueError("token id outside the vocabulary")
        return ids

    def transform_latent(self, z: torch.Tensor, options: LatentOptions | None) -> torch.Tensor:
        if options is None or options.is_noop():
            return z
        if options.keep is not None:
            keep = torch.as_tensor(options.keep, dtype=z.dtype)
            z = z * keep
        if options.clip_c is not None:
            c = float(options.clip_c)
            if options.clip_mode == "value":
                z = z.clamp(-c, c)
            elif options.clip_mode == "norm":
                flat = z.reshape(z.shape[0], -1)
                norms = flat.norm(dim=1, keepdim=True)
                scale = torch.where(norms > c, c / norms.clamp_min(1e-30), torch.ones_like(norms))
                z = (flat * scale).reshape(z.shape)
            else:
                raise ValueError(f"unknown clip mode {options.clip_mode!r}")
        if options.noise_sampler is not None:
            noise = options.noise_sampler(z.detach().cpu().double().numpy())
            z = z + torch.as_tensor(noise, dtype=z.dtype)
        return z

    def loss(self, src, tgt, options: LatentOptions | None = None) -> torch.Tensor:
        """Token-level cross-entropy of reconstructing ``tgt`` from ``src``."""
        src = self._as_ids(src)
        tgt = self._as_ids(tgt)
        z = self.transform_latent(self.net.encode(src), options)
        logits = self.net.decode(z, tgt[:, :-1])
        return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), tgt[:, 1:].reshape(-1), ignore_index=PAD)

    def parameters(self):
        return self.net.parameters()

    def named_tensors(self) -> dict[str, torch.Tensor]:
        return {k: v for k, v in self.net.state_dict().items()}

    def importance_weight(self) -> np.ndarray:
        if self.config.architecture != "transformer":
            raise ValueError("neuron importance needs cross-attention, which the recurrent model lacks")
        return self.net.cross_attention_key_weight(0).detach().cpu().double().numpy()


def make_optimizer(model: Autoencoder, lr: float = 3e-3, kind: str = "adam", momentum: float = 0.9):
    if kind == "adam":
        # fused is the same update in one kernel; about 8% faster per step on one core
        return torch.optim.Adam(model.parameters(), lr=lr, fused=True)
    if kind == "momentum":
        return torch.optim.SGD(model.parameters(), lr=lr, momentum=momentum)
    raise ValueError(f"unknown optimizer {kind!r}")


def train_step(model: Autoencoder, src, tgt, optimizer, options: LatentOptions | None = None, grad_clip: float = 1.0) -> float:
    if model.frozen:
        raise FrozenModelError("model is frozen; training is not allowed")
    model.net.train()
    optimizer.zero_grad(set_to_none=True)
    loss = model.loss(src, tgt, options)
    if not torch.isfinite(loss):
        raise NonFiniteLossError(f"non-finite training loss {loss.item()}")
    loss.backward()
    if grad_clip:
        nn.utils.clip_grad_norm_(model.parameters(), grad_clip)
    optimizer.step()
    return float(loss.item())


def train_steps(model: Autoencoder, data_ids: np.ndarray, steps: int, rng: np.random.Generator,
                options: LatentOptions | None = None, batch_size: int = 64, lr: float = 3e-3,
                mask_prob: float = 0.0, delete_prob: float = 0.0, optimizer=None) -> list[float]:
    """Run ``steps`` reconstruction steps on batches drawn with replacement from ``data_ids``."""
    if model.frozen:
        raise FrozenModelError("model is frozen; training is not allowed")
    data_ids = np.asarray(data_ids)
    optimizer = optimizer or make_optimizer(model, lr)
    history = []
    for _ in range(steps):
        batch = data_ids[rng.integers(len(data_ids), size=batch_size)]
        src = corrupt(batch, rng, mask_prob, delete_prob)
        history.append(train_step(model, src, batch, optimizer, options))
    return history


@torch.no_grad()
def evaluate_loss(model: Autoencoder, data_ids: np.ndarray, options: LatentOptions | None = None, batch_size: int = 256) -> float:
    model.net.eval()
    total, count = 0.0, 0
    for i in range(0, len(data_ids), batch_size):
        batch = np.asarray(data_ids[i : i + batch_size])
        tokens = int((batch[:, 1:] != PAD).sum())
        total += float(model.loss(batch, batch, options)) * tokens
        count += tokens
    return total / max(count, 1)


def corrupt(ids: np.ndarray, rng: np.random.Generator, mask_prob: float = 0.0, delete_prob: float = 0.0) -> np.ndarray:
    """Denoising corruption: token masking and token deletion.

    BOS/EOS/PAD are never touched. Deleted tokens are removed and the row is
    re-padded to its original width.
    """
    if not (0 <= mask_prob < 1 and 0 <= delete_prob < 1):
        raise ValueError("corruption probabilities must lie in [0, 1)")
    ids = np.array(ids, dtype=np.int64, copy=True)
    single = ids.ndim == 1
    if single:
        ids = ids[None]
    if mask_prob == 0 and delete_prob == 0:
        return ids[0] if single else ids
    content = (ids != PAD) & (ids != BOS) & (ids != EOS)
    u = rng.random(ids.shape)
    deleted = content & (u < delete_prob)
    masked = content & ~deleted & (u < delete_prob + mask_prob)
    ids[masked] = MASK
    out = np.full_like(ids, PAD)
    for r in range(ids.shape[0]):
        row = ids[r][~deleted[r]]
        out[r, : len(row)] = row
    return out[0] if single else out


def flatten_latent(z: np.ndarray) -> np.ndarray:
    """Token-major flattening of an ``l x d_tok`` latent (or a batch of them)."""
    z = np.asarray(z)
    if z.ndim == 2:
        return z.reshape(-1)
    if z.ndim == 3:
        return z.reshape(z.shape[0], -1)
    raise ValueError(f"expected a 2-D latent or a batch of them, got shape {z.shape}")


def unflatten_latent(v: np.ndarray, l: int, d_tok: int) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[-1] != l * d_tok:
        raise ValueError(f"latent of length {v.shape[-1]} cannot be reshaped to {l}x{d_tok}")
    return v.reshape(*v.shape[:-1], l, d_tok)


@torch.no_grad()
def greedy_decode(model: Autoencoder, latent: torch.Tensor) -> np.ndarray:
    model.net.eval()
    b = latent.shape[0]
    steps = model.config.max_len - 1
    seq = torch.full((b, 1), BOS, dtype=torch.long)
    done = torch.zeros(b, dtype=torch.bool)
    for _ in range(steps):
        nxt = model.logits(latent, seq)[:, -1].argmax(dim=-1)
        nxt = torch.where(done, torch.full_like(nxt, PAD), nxt)
        seq = torch.cat([seq, nxt[:, None]], dim=1)
        done |= nxt == EOS
        if bool(done.all()):
            break
    return _pad_to(seq.numpy(), model.config.max_len)


@torch.no_grad()
def beam_decode(model: Autoencoder, latent: torch.Tensor, width: int = 10) -> np.ndarray:
    """Beam search on summed log-probabilities; returns the best finished hypothesis per row."""
    if width < 1:
        raise ValueError("beam width must be >= 1")
    model.net.eval()
    b = latent.shape[0]
    steps = model.config.max_len - 1
    lat = latent.repeat_interleave(width, dim=0)
    seq = torch.full((b * width, 1), BOS, dtype=torch.long)
    scores = torch.full((b, width), float("-inf"), dtype=torch.float64)
    scores[:, 0] = 0.0
    done = torch.zeros(b * width, dtype=torch.bool)
    for _ in range(steps):
        logp = torch.log_softmax(model.logits(lat, seq)[:, -1].double(), dim=-1)
        vocab = logp.shape[-1]
        # finished hypotheses may only extend with PAD, at no cost
        logp[done] = float("-inf")
        logp[done, PAD] = 0.0
        cand = (scores.reshape(-1, 1) + logp).reshape(b, width * vocab)
        top_scores, top_idx = cand.topk(width, dim=-1)
        beam_idx = top_idx // vocab
        tok = top_idx % vocab
        rows = (torch.arange(b)[:, None] * width + beam_idx).reshape(-1)
        seq = torch.cat([seq[rows], tok.reshape(-1, 1)], dim=1)
        done = done[rows] | (tok.reshape(-1) == EOS) | (tok.reshape(-1) == PAD)
        scores = top_scores
        if bool(done.all()):
            break
    best = scores.argmax(dim=-1)
    out = seq.reshape(b, width, -1)[torch.arange(b), best]
    return _pad_to(out.numpy(), model.config.max_len)


def decode(model: Autoencoder, latent: torch.Tensor, beam: int = 1) -> np.ndarray:
    if beam == 1:
        return greedy_decode(model, latent)
    return beam_decode(model, latent, beam)


def _pad_to(seq: np.ndarray, width: int) -> np.ndarray:
    out = np.full((seq.shape[0], width), PAD, dtype=np.int64)
    out[:, : min(width, seq.shape[1])] = seq[:, :width]
    return out
