"""Toy vision encoder, vision-to-decoder projection and target embedder.

These stand in for a frozen CLIP backbone and for the language model's last
hidden layer.  The encoder is a stack of patch-wise (kernel = stride)
convolutions, each followed by a ReLU and a 1x1 convolution, producing one
feature map per configured stride.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ContractError, DimensionError
from .layers import Linear, Module
from .numeric import Tensor, add, as_tensor, broadcast_to, mean, relu, reshape, transpose


@dataclass
class MultiScaleFeatures:
    """Feature maps ordered shallow to deep; each level is (B, C, H, W)."""

    levels: list[Tensor]

    def __post_init__(self):
        if not self.levels:
            raise ContractError("MultiScaleFeatures needs at least one level")
        for a, b in zip(self.levels, self.levels[1:]):
            if b.shape[-2] > a.shape[-2] or b.shape[-1] > a.shape[-1]:
                raise DimensionError("feature levels must not grow in spatial size with depth")

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]

    @property
    def deepest(self) -> Tensor:
        return self.levels[-1]

    def global_feature(self) -> Tensor:
        """Spatial mean of the deepest level, (B, C)."""
        return mean(self.deepest, axis=(-2, -1))


@dataclass(frozen=True)
class TargetSpec:
    target_id: int
    attributes: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", np.asarray(self.attributes, dtype=np.float64).reshape(-1))


def patchify(x: Tensor, r: int) -> Tensor:
    """(B, H, W, C) -> (B, H/r, W/r, r*r*C), non-overlapping r x r patches."""
    b, h, w, c = x.shape
    if h % r or w % r:
        raise DimensionError(f"patchify: spatial size {h}x{w} not divisible by {r}")
    y = reshape(x, (b, h // r, r, w // r, r, c))
    y = transpose(y, (0, 1, 3, 2, 4, 5))
    return reshape(y, (b, h // r, w // r, r * r * c))


class ToyEncoder(Module):
    """Strided patch convolutions producing one level per entry of ``strides``."""

    def __init__(
        self,
        in_channels: int,
        width: int,
        strides: Sequence[int],
        rng: np.random.Generator,
        zero_last: bool = False,
    ):
        strides = tuple(int(s) for s in strides)
        if not strides:
            raise ContractError("encoder needs at least one stride")
        prev = 1
        factors = []
        for s in strides:
            if s < prev or s % prev:
                raise DimensionError(f"strides {strides} must each divide the next")
            factors.append(s // prev)
            prev = s
        self.in_channels = in_channels
        self.width = width
        self.strides = strides
        self._factors = tuple(factors)
        self.patch = []
        self.mix = []
        c = in_channels
        for i, r in enumerate(factors):
            self.patch.append(Linear(r * r * c, width, rng))
            last = zero_last and i == len(factors) - 1
            self.mix.append(Linear(width, width, rng, init="zeros" if last else "default"))
            c = width

    def __call__(self, image) -> MultiScaleFeatures:
        return self.encode_multiscale(image)

    def encode_multiscale(self, image) -> MultiScaleFeatures:
        x = as_tensor(image)
        if x.ndim == 3:
            x = reshape(x, (1,) + x.shape)
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise DimensionError(f"expected (B, {self.in_channels}, H, W) images, got {x.shape}")
        h, w = x.shape[-2:]
        if h % self.strides[-1] or w % self.strides[-1]:
            raise DimensionError(f"image size {h}x{w} not divisible by stride schedule {self.strides}")
        y = transpose(x, (0, 2, 3, 1))
        levels = []
        for r, patch, mix in zip(self._factors, self.patch, self.mix):
            y = patchify(y, r)
            y = mix(relu(patch(y)))
            levels.append(transpose(y, (0, 3, 1, 2)))
        return MultiScaleFeatures(levels)


class DecoderProjection(Module):
    """Per-level affine map from encoder width to decoder width."""

    def __init__(self, n_levels: int, enc_width: int, width: int, rng: np.random.Generator, init: str = "default"):
        self.enc_width = enc_width
        self.width = width
        self.proj = [Linear(enc_width, width, rng, init=init) for _ in range(n_levels)]

    def __call__(self, features: MultiScaleFeatures) -> MultiScaleFeatures:
        return self.project_to_decoder(features)

    def project_to_decoder(self, features: MultiScaleFeatures) -> MultiScaleFeatures:
        if len(features) != len(self.proj):
            raise DimensionError(f"projection has {len(self.proj)} levels, features have {len(features)}")
        out = []
        for f, proj in zip(features.levels, self.proj):
            if f.shape[1] != self.enc_width:
                raise DimensionError(f"feature width {f.shape[1]} != encoder width {self.enc_width}")
            y = proj(transpose(f, (0, 2, 3, 1)))
            out.append(transpose(y, (0, 3, 1, 2)))
        return MultiScaleFeatures(out)


class TargetEmbedder(Module):
    """Produces per-target hidden states for every codebook token.

    A target's attribute vector and the image's global feature are mapped to
    a context vector, added to each codebook token, and passed through a
    residual two-layer network.  Output shape is (K, L, N, d).
    """

    def __init__(self, attr_dim: int, width: int, hidden: int, rng: np.random.Generator):
        self.attr_dim = attr_dim
        self.width = width
        self.attr = Linear(attr_dim, width, rng)
        self.glob = Linear(width, width, rng)
        self.fc1 = Linear(width, hidden, rng)
        self.fc2 = Linear(hidden, width, rng)

    def embed_targets(self, specs, global_feature, tokens: Tensor) -> Tensor:
        """``specs``: TargetSpecs or a (K, attr_dim) array; ``global_feature``: (K, d) or (d,)."""
        if isinstance(specs, np.ndarray) or isinstance(specs, Tensor):
            attrs = as_tensor(specs)
        else:
            specs = list(specs)
            if not specs:
                raise ContractError("embed_targets needs at least one target")
            attrs = Tensor(np.stack([s.attributes for s in specs]))
        if attrs.ndim != 2 or attrs.shape[0] == 0:
            raise ContractError(f"attribute matrix must be (K, {self.attr_dim}) with K >= 1")
        if attrs.shape[1] != self.attr_dim:
            raise DimensionError(f"attribute width {attrs.shape[1]} != {self.attr_dim}")
        k = attrs.shape[0]
        g = as_tensor(global_feature)
        if g.shape[-1] != self.width:
            raise DimensionError(f"global feature width {g.shape[-1]} != {self.width}")
        if g.ndim == 1:
            g = broadcast_to(g, (k, self.width))
        n_scales, n_tokens, _ = tokens.shape
        ctx = relu(add(self.attr(attrs), self.glob(g)))
        x = add(reshape(ctx, (k, 1, 1, self.width)), tokens)
        return add(x, self.fc2(relu(self.fc1(x))))
