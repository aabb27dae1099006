"""Network building blocks on top of the autodiff core."""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

LAYERNORM_EPS = 1e-5
ATTENTION_NEG_INF = -1e9


class Layer:
    """Base: layers expose their parameters as a flat name -> Tensor dict."""

    def params(self) -> dict[str, Tensor]:
        raise NotImplementedError


class Linear(Layer):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, name: str):
        scale = 1.0 / math.sqrt(d_in)
        self.w = Tensor(rng.uniform(-scale, scale, (d_in, d_out)), requires_grad=True)
        self.b = Tensor(np.zeros(d_out), requires_grad=True)
        self.name = name

    def __call__(self, x) -> Tensor:
        return ad.add(ad.matmul(x, self.w), self.b)

    def params(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}


class LayerNorm(Layer):
    def __init__(self, dim: int, name: str):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.name = name

    def __call__(self, x) -> Tensor:
        mu = ad.tmean(x, axis=-1, keepdims=True)
        centered = ad.add(x, ad.mul(mu, -1.0))
        var = ad.tmean(ad.mul(centered, centered), axis=-1, keepdims=True)
        inv = ad.power(ad.add(var, LAYERNORM_EPS), -0.5)
        return ad.add(ad.mul(ad.mul(centered, inv), self.gain), self.bias)

    def params(self):
        return {f"{self.name}.gain": self.gain, f"{self.name}.bias": self.bias}


class MultiHeadSelfAttention(Layer):
    """Standard scaled dot-product self-attention with an additive key mask."""

    def __init__(self, rng, dim: int, heads: int, head_size: int, name: str):
        self.heads = heads
        self.head_size = head_size
        inner = heads * head_size
        self.wq = Linear(rng, dim, inner, f"{name}.wq")
        self.wk = Linear(rng, dim, inner, f"{name}.wk")
        self.wv = Linear(rng, dim, inner, f"{name}.wv")
        self.wo = Linear(rng, inner, dim, f"{name}.wo")
        self.name = name

    def __call__(self, x: Tensor, key_valid: np.ndarray) -> Tensor:
        """x: (B, S, D); key_valid: (B, S) bool, False keys are masked out."""
        b, s, _ = x.data.shape

        def split(t):
            t = ad.reshape(t, (b, s, self.heads, self.head_size))
            return ad.swapaxes(t, 1, 2)  # (B, H, S, hs)

        q = split(self.wq(x))
        k = split(self.wk(x))
        v = split(self.wv(x))
        scores = ad.mul(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / math.sqrt(self.head_size))
        bias = np.where(key_valid, 0.0, ATTENTION_NEG_INF)[:, None, None, :]
        attn = ad.softmax(ad.add(scores, Tensor(bias)), axis=-1)
        ctx = ad.matmul(attn, v)  # (B, H, S, hs)
        ctx = ad.reshape(ad.swapaxes(ctx, 1, 2), (b, s, self.heads * self.head_size))
        return self.wo(ctx)

    def params(self):
        out = {}
        for lin in (self.wq, self.wk, self.wv, self.wo):
            out.update(lin.params())
        return out


class EncoderBlock(Layer):
    """Post-norm transformer block: attention and a GELU feed-forward."""

    FF_MULT = 4

    def __init__(self, rng, dim: int, heads: int, head_size: int, name: str):
        self.attn = MultiHeadSelfAttention(rng, dim, heads, head_size, f"{name}.attn")
        self.ln1 = LayerNorm(dim, f"{name}.ln1")
        self.ff1 = Linear(rng, dim, self.FF_MULT * dim, f"{name}.ff1")
        self.ff2 = Linear(rng, self.FF_MULT * dim, dim, f"{name}.ff2")
        self.ln2 = LayerNorm(dim, f"{name}.ln2")

    def __call__(self, x: Tensor, key_valid: np.ndarray) -> Tensor:
        x = self.ln1(ad.add(x, self.attn(x, key_valid)))
        x = self.ln2(ad.add(x, self.ff2(ad.gelu(self.ff1(x)))))
        return x

    def params(self):
        out = {}
        for layer in (self.attn, self.ln1, self.ff1, self.ff2, self.ln2):
            out.update(layer.params())
        return out


class ResidualFF(Layer):
    """Two-layer residual feed-forward block, applied per position."""

    def __init__(self, rng, dim: int, name: str):
        self.ff1 = Linear(rng, dim, dim, f"{name}.ff1")
        self.ff2 = Linear(rng, dim, dim, f"{name}.ff2")
        self.ln = LayerNorm(dim, f"{name}.ln")

    def __call__(self, x: Tensor) -> Tensor:
        return self.ln(ad.add(x, self.ff2(ad.gelu(self.ff1(x)))))

    def params(self):
        out = {}
        for layer in (self.ff1, self.ff2, self.ln):
            out.update(layer.params())
        return out


class MLP(Layer):
    """Classifier head: hidden GELU layers with dropout, then a linear output."""

    def __init__(self, rng, d_in: int, width: int, depth: int, d_out: int, drop: float, name: str):
        self.drop = drop
        self.hidden = []
        d = d_in
        for i in range(depth):
            self.hidden.append(Linear(rng, d, width, f"{name}.h{i}"))
            d = width
        self.out = Linear(rng, d, d_out, f"{name}.out")

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        for lin in self.hidden:
            x = ad.gelu(lin(x))
            x = ad.dropout(x, self.drop, rng, training)
        return self.out(x)

    def params(self):
        out = {}
        for lin in self.hidden:
            out.update(lin.params())
        out.update(self.out.params())
        return out
