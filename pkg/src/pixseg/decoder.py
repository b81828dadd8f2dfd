"""Lightweight multi-scale pixel decoder.

Scales are processed deepest first.  Each scale runs one attention block
that mixes a learnable token sequence with the fused codebook embedding and
the image features, and emits a mask score map at four times the feature
resolution.  Every scale after the first one processed has its features
reweighted by ``sigmoid(previous mask) + 1``.  The per-scale maps are
resized to the finest grid and combined with softmax-normalised weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import ContractError, DimensionError
from .layers import MLP, Attention, LayerNorm, Module, param
from .numeric import (
    Tensor,
    add,
    as_tensor,
    broadcast_to,
    clip,
    concat,
    count_macs,
    interp_matrix,
    matmul,
    mean,
    mul,
    no_grad,
    reshape,
    resize_bilinear,
    sigmoid,
    softmax,
    take,
    transpose,
)

UPSCALE = 4
_SIG_FLOOR = 2.0**-52


@dataclass(frozen=True)
class DecoderConfig:
    n_scales: int = 2
    width: int = 32
    n_out: int = 2
    mlp_width: int = 64
    sizes: tuple = ((16, 16), (8, 8))
    upscale: int = UPSCALE

    def __post_init__(self):
        if self.n_scales < 1:
            raise ContractError(f"n_scales must be >= 1, got {self.n_scales}")
        if self.n_out < 1:
            raise ContractError(f"n_out must be >= 1, got {self.n_out}")
        if self.width < 1 or self.mlp_width < 1:
            raise ContractError("widths must be positive")
        if self.width % 4:
            raise ContractError(f"width must be divisible by 4 for the 2-D positional encoding, got {self.width}")
        if self.upscale != UPSCALE:
            raise ContractError(f"upscale factor is fixed at {UPSCALE}")
        sizes = tuple(tuple(int(v) for v in s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) != self.n_scales:
            raise ContractError(f"{len(sizes)} spatial sizes given for {self.n_scales} scales")

    @property
    def out_size(self) -> tuple[int, int]:
        h, w = self.sizes[0]
        return (h * self.upscale, w * self.upscale)


@dataclass
class MaskLogits:
    scale_masks: list  # indexed by scale, shallow to deep
    fused: Tensor
    gamma: np.ndarray = field(default_factory=lambda: np.ones(1))


@lru_cache(maxsize=32)
def sine_position_encoding(h: int, w: int, width: int) -> np.ndarray:
    """Fixed 2-D sinusoidal encoding, (h*w, width), row-major over pixels."""
    quarter = width // 4
    freqs = 1.0 / (10000.0 ** (np.arange(quarter) / max(quarter, 1)))
    ys = (np.arange(h) + 0.5) / h * 2 * math.pi
    xs = (np.arange(w) + 0.5) / w * 2 * math.pi
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    py = yy.reshape(-1, 1) * freqs
    px = xx.reshape(-1, 1) * freqs
    pe = np.concatenate([np.sin(py), np.cos(py), np.sin(px), np.cos(px)], axis=1)
    pe.setflags(write=False)
    return pe


class AttentionBlock(Module):
    def __init__(self, width: int, mlp_width: int, rng: np.random.Generator, zero_mask_mlp: bool = False):
        self.self_attn = Attention(width, rng)
        self.norm1 = LayerNorm(width)
        self.token_to_image = Attention(width, rng)
        self.mlp = MLP(width, mlp_width, rng)
        self.norm2 = LayerNorm(width)
        self.image_to_token = Attention(width, rng)
        self.norm3 = LayerNorm(width)
        self.mask_mlp = MLP(width, mlp_width, rng, zero_last=zero_mask_mlp)


def feature_modulate(f, mask_prev) -> Tensor:
    """Scale every channel of ``f`` (B, C, H, W) by ``sigmoid(m) + 1``, which lies in (1, 2).

    ``mask_prev`` (B, H', W') is first resized to (H, W).
    """
    f = as_tensor(f)
    m = as_tensor(mask_prev)
    if f.ndim != 4 or m.ndim != 3 or m.shape[0] != f.shape[0]:
        raise DimensionError(f"feature_modulate: features {f.shape} and mask {m.shape} do not pair up")
    small = resize_bilinear(m, f.shape[-2:])
    # keep 1 + sigmoid strictly inside (1, 2) even where float64 sigmoid saturates
    factor = add(clip(sigmoid(small), _SIG_FLOOR, 1.0 - _SIG_FLOOR), 1.0)
    return mul(f, reshape(factor, (f.shape[0], 1) + f.shape[-2:]))


class PixelDecoder(Module):
    def __init__(self, config: DecoderConfig, rng: np.random.Generator, zero_mask_mlp: bool = False):
        self.config = config
        d = config.width
        self.out_token = param(rng.normal(0.0, 1.0, size=(config.n_out, d)))
        self.lev_token = param(rng.normal(0.0, 1.0, size=(config.n_scales, d)))
        self.blocks = [AttentionBlock(d, config.mlp_width, rng, zero_mask_mlp) for _ in range(config.n_scales)]
        self.gamma_logits = param(np.zeros(config.n_scales))

    def gamma(self) -> Tensor:
        return softmax(self.gamma_logits, axis=0)

    def attention_block(self, h, f, level: int):
        """One scale: ``h`` (B, d) fused embedding, ``f`` (B, d, H, W) features.

        Returns ``(mask, f_new)`` with mask (B, 4H, 4W) and updated features.
        """
        cfg = self.config
        h, f = as_tensor(h), as_tensor(f)
        d = cfg.width
        if h.ndim == 1:
            h = reshape(h, (1, d))
        if f.ndim == 3:
            f = reshape(f, (1,) + f.shape)
        if h.shape[-1] != d or f.shape[1] != d:
            raise DimensionError(f"attention_block: token width {h.shape[-1]} / feature width {f.shape[1]} != {d}")
        if h.shape[0] != f.shape[0]:
            raise DimensionError(f"attention_block: {h.shape[0]} tokens vs {f.shape[0]} feature maps")
        blk = self.blocks[level]
        b, _, fh, fw = f.shape
        n = cfg.n_out + 1

        token = concat([broadcast_to(self.out_token, (b, cfg.n_out, d)), reshape(h, (b, 1, d))], axis=1)
        token = add(token, self.lev_token[level])
        token = blk.norm1(add(token, blk.self_attn(token, token, token)))

        fseq = transpose(reshape(f, (b, d, fh * fw)), (0, 2, 1))
        key = add(fseq, sine_position_encoding(fh, fw, d))
        attn = blk.token_to_image(token, key, fseq)
        token = blk.norm2(add(add(token, attn), blk.mlp(token)))

        attn = blk.image_to_token(key, token, token)
        fseq = blk.norm3(add(fseq, attn))
        f_new = reshape(transpose(fseq, (0, 2, 1)), (b, d, fh, fw))

        up_h, up_w = fh * cfg.upscale, fw * cfg.upscale
        f_up = resize_bilinear(f_new, (up_h, up_w))
        token = blk.mask_mlp(token)
        mask = matmul(token, reshape(f_up, (b, d, up_h * up_w)))
        mask = mean(mask, axis=1)
        assert mask.shape == (b, up_h * up_w) and token.shape[1] == n
        return reshape(mask, (b, up_h, up_w)), f_new

    def decode(self, h_all, features) -> MaskLogits:
        """``h_all`` (B, L, d); ``features`` L maps of (B, d, H_l, W_l), deepest last."""
        cfg = self.config
        h_all = as_tensor(h_all)
        levels = list(features.levels if hasattr(features, "levels") else features)
        if h_all.ndim != 3 or h_all.shape[1] != cfg.n_scales or len(levels) != cfg.n_scales:
            raise DimensionError(
                f"decode: {h_all.shape} embeddings and {len(levels)} feature levels for L={cfg.n_scales}"
            )
        scale_masks = [None] * cfg.n_scales
        prev = None
        for level in reversed(range(cfg.n_scales)):
            f = levels[level]
            if prev is not None:
                f = feature_modulate(f, prev)
            prev, _ = self.attention_block(take(h_all, [level], axis=1).reshape(h_all.shape[0], cfg.width), f, level)
            scale_masks[level] = prev
        return self.mask_fusion(scale_masks)

    def mask_fusion(self, scale_masks) -> MaskLogits:
        out_h, out_w = self.config.out_size
        gamma = self.gamma()
        fused = None
        for level, m in enumerate(scale_masks):
            if m.shape[-2:] != (out_h, out_w):
                m = resize_bilinear(m, (out_h, out_w))
            term = mul(m, gamma[level])
            fused = term if fused is None else add(fused, term)
        return MaskLogits(scale_masks, fused, gamma.data.copy())


def _resize_taps(n_in: int, n_out: int) -> int:
    if n_in == n_out:
        return 0
    return int(np.count_nonzero(interp_matrix(n_in, n_out)))


def _resize_macs(lead: int, h_in: int, w_in: int, h_out: int, w_out: int) -> int:
    if (h_in, w_in) == (h_out, w_out):
        return 0
    return lead * (_resize_taps(h_in, h_out) * w_in + _resize_taps(w_in, w_out) * h_out)


def flops_terms(config: DecoderConfig, batch: int) -> dict[str, int]:
    """Multiply-add counts of one decode call, split by component."""
    d, m = config.width, config.mlp_width
    n = config.n_out + 1
    terms = dict.fromkeys(
        (
            "self_attention",
            "cross_attention_token",
            "cross_attention_feature",
            "mlp",
            "upscale",
            "mask_product",
            "modulation_resize",
            "fusion_resize",
        ),
        0,
    )
    if batch <= 0:
        return terms
    out_h, out_w = config.out_size
    for level, (h, w) in enumerate(config.sizes):
        p = h * w
        up = config.upscale
        terms["self_attention"] += 4 * n * d * d + 2 * n * n * d
        # query/output projections on the token side, score and value products split evenly
        terms["cross_attention_token"] += 2 * n * d * d + 2 * n * d * d
        terms["cross_attention_feature"] += 2 * p * d * d + 2 * n * p * d + 2 * p * d * d + 2 * p * n * d
        terms["mlp"] += 2 * (2 * n * d * m)
        terms["upscale"] += _resize_macs(d, h, w, h * up, w * up)
        terms["mask_product"] += n * d * (h * up) * (w * up)
        if level < config.n_scales - 1:
            ph, pw = config.sizes[level + 1]
            terms["modulation_resize"] += _resize_macs(1, ph * up, pw * up, h, w)
        terms["fusion_resize"] += _resize_macs(1, h * up, w * up, out_h, out_w)
    return {k: v * batch for k, v in terms.items()}


def flops_estimate(config: DecoderConfig, batch: int) -> int:
    """Closed-form multiply-add count of decoding ``batch`` targets."""
    return sum(flops_terms(config, batch).values())


def instrumented_macs(config: DecoderConfig, batch: int, seed: int = 0) -> int:
    """Decode random inputs once and count the multiply-adds actually executed."""
    if batch <= 0:
        return 0
    rng = np.random.default_rng(seed)
    dec = PixelDecoder(config, rng)
    h = Tensor(rng.normal(size=(batch, config.n_scales, config.width)))
    feats = [Tensor(rng.normal(size=(batch, config.width) + tuple(s))) for s in config.sizes]
    with no_grad(), count_macs() as counter:
        dec.decode(h, feats)
    return counter.total
