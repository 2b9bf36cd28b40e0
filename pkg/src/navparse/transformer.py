"""Compact bidirectional transformer encoder for span extraction.

Token, position and segment embeddings feed a stack of post-norm
self-attention blocks (multi-head attention, then a GELU feed-forward,
each followed by residual + layer normalization). The scale is set by
EncoderConfig; the default is deliberately small so the encoder can be
trained on commodity hardware, and a larger externally produced
checkpoint can be dropped in through the same weight layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LAYERNORM_EPS = 1e-6


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    hidden: int = 64
    layers: int = 2
    heads: int = 4
    ffn: int = 256
    max_seq_len: int = 64
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise ValueError("hidden size must divide evenly into heads")


@dataclass
class EncoderLayerWeights:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bq: Tensor
    bk: Tensor
    bv: Tensor
    bo: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ln2_g: Tensor
    ln2_b: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.wq, self.wk, self.wv, self.wo, self.bq, self.bk,
                self.bv, self.bo, self.ln1_g, self.ln1_b, self.w1, self.b1,
                self.w2, self.b2, self.ln2_g, self.ln2_b]


@dataclass
class EncoderWeights:
    tok: Tensor                    # (vocab, hidden)
    pos: Tensor                    # (max_seq_len, hidden)
    seg: Tensor                    # (2, hidden)
    ln_emb_g: Tensor
    ln_emb_b: Tensor
    layers: list[EncoderLayerWeights] = field(default_factory=list)

    @classmethod
    def create(cls, rng: np.random.Generator,
               config: EncoderConfig) -> "EncoderWeights":
        h, f = config.hidden, config.ffn

        def ones(n):
            return Tensor(np.ones(n), requires_grad=True)

        def zeros(n):
            return Tensor(np.zeros(n), requires_grad=True)

        layers = [
            EncoderLayerWeights(
                wq=ad.glorot(rng, h, h), wk=ad.glorot(rng, h, h),
                wv=ad.glorot(rng, h, h), wo=ad.glorot(rng, h, h),
                bq=zeros(h), bk=zeros(h), bv=zeros(h), bo=zeros(h),
                ln1_g=ones(h), ln1_b=zeros(h),
                w1=ad.glorot(rng, h, f), b1=zeros(f),
                w2=ad.glorot(rng, f, h), b2=zeros(h),
                ln2_g=ones(h), ln2_b=zeros(h),
            )
            for _ in range(config.layers)
        ]
        scale = 0.02
        return cls(
            tok=Tensor(rng.normal(0.0, scale,
                                  size=(config.vocab_size, h)),
                       requires_grad=True),
            pos=Tensor(rng.normal(0.0, scale,
                                  size=(config.max_seq_len, h)),
                       requires_grad=True),
            seg=Tensor(rng.normal(0.0, scale, size=(2, h)),
                       requires_grad=True),
            ln_emb_g=ones(h), ln_emb_b=zeros(h),
            layers=layers,
        )

    def tensors(self) -> list[Tensor]:
        out = [self.tok, self.pos, self.seg, self.ln_emb_g, self.ln_emb_b]
        for layer in self.layers:
            out.extend(layer.tensors())
        return out

    def weight_matrices(self) -> list[Tensor]:
        out = [self.tok, self.pos, self.seg]
        for layer in self.layers:
            out.extend([layer.wq, layer.wk, layer.wv, layer.wo, layer.w1,
                        layer.w2])
        return out


def _layer_norm(x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
    mu = ad.mean(x, axis=-1, keepdims=True)
    centered = ad.add(x, ad.mul(mu, -1.0))
    var = ad.mean(ad.mul(centered, centered), axis=-1, keepdims=True)
    inv = ad.div(Tensor(1.0), ad.sqrt(ad.add(var, LAYERNORM_EPS)))
    return ad.add(ad.mul(ad.mul(centered, inv), gamma), beta)


def _attention(layer: EncoderLayerWeights, x: Tensor, heads: int,
               additive_mask: np.ndarray) -> Tensor:
    batch, seq, hidden = x.data.shape
    depth = hidden // heads

    def project(w, b):
        p = ad.add(ad.matmul(x, w), b)                       # (B, T, H)
        p = ad.reshape(p, (batch, seq, heads, depth))
        p = ad.transpose(p, (0, 2, 1, 3))                    # (B, h, T, d)
        return ad.reshape(p, (batch * heads, seq, depth))

    q = project(layer.wq, layer.bq)
    k = project(layer.wk, layer.bk)
    v = project(layer.wv, layer.bv)
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 2, 1))),
                    1.0 / np.sqrt(depth))                    # (B*h, T, T)
    scores = ad.add(scores, additive_mask)
    weights = ad.softmax(scores, axis=-1)
    context = ad.matmul(weights, v)                          # (B*h, T, d)
    context = ad.reshape(context, (batch, heads, seq, depth))
    context = ad.transpose(context, (0, 2, 1, 3))
    context = ad.reshape(context, (batch, seq, hidden))
    return ad.add(ad.matmul(context, layer.wo), layer.bo)


def encode(weights: EncoderWeights, config: EncoderConfig,
           token_ids: np.ndarray, segment_ids: np.ndarray,
           attention_mask: np.ndarray, *, training: bool = False,
           rng: np.random.Generator | None = None) -> Tensor:
    """Contextual token embeddings, shape (batch, seq, hidden).

    attention_mask holds 1.0 on real tokens; padded key positions are
    excluded from every attention distribution.
    """
    batch, seq = token_ids.shape
    if seq > config.max_seq_len:
        raise ValueError(
            f"sequence length {seq} exceeds max_seq_len {config.max_seq_len}")
    x = ad.add(ad.index_rows(weights.tok, token_ids),
               ad.index_rows(weights.seg, segment_ids))
    x = ad.add(x, ad.index_rows(weights.pos,
                                np.broadcast_to(np.arange(seq), (batch, seq))))
    x = _layer_norm(x, weights.ln_emb_g, weights.ln_emb_b)
    x = ad.dropout(x, config.dropout, rng, training)
    # (B*h, T, T) additive mask: 0 on real keys, -1e30 on padded keys
    additive = np.repeat((attention_mask[:, None, :] - 1.0) * 1e30,
                         config.heads, axis=0)
    for layer in weights.layers:
        attended = _attention(layer, x, config.heads, additive)
        attended = ad.dropout(attended, config.dropout, rng, training)
        x = _layer_norm(ad.add(x, attended), layer.ln1_g, layer.ln1_b)
        ff = ad.add(ad.matmul(ad.gelu(ad.add(ad.matmul(x, layer.w1),
                                             layer.b1)),
                              layer.w2), layer.b2)
        ff = ad.dropout(ff, config.dropout, rng, training)
        x = _layer_norm(ad.add(x, ff), layer.ln2_g, layer.ln2_b)
    return x
