"""Segmentation codebook: per-scale groups of learnable tokens plus token fusion."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError
from .layers import Linear, Module, param
from .numeric import Tensor, as_tensor, reshape

TOKEN_INIT_STD = 0.02


class SegCodebook(Module):
    """``n_scales`` groups of ``n_tokens`` tokens of width ``width``.

    Each scale owns its own tokens; nothing is shared between groups.  The
    fusion layer maps the concatenation of one group's hidden states (token
    index ascending) to a single embedding of width ``width``.
    """

    def __init__(self, n_scales: int, n_tokens: int, width: int, rng: np.random.Generator, fusion_init: str = "default"):
        if n_scales < 1 or n_tokens < 1 or width < 1:
            raise DimensionError(
                f"codebook sizes must be positive, got L={n_scales}, N={n_tokens}, d={width}"
            )
        self.n_scales = n_scales
        self.n_tokens = n_tokens
        self.width = width
        self.tokens = param(rng.normal(0.0, TOKEN_INIT_STD, size=(n_scales, n_tokens, width)))
        if fusion_init == "identity" and n_tokens != 1:
            raise DimensionError("identity fusion needs exactly one token per group")
        self.fusion = Linear(n_tokens * width, width, rng, init=fusion_init)

    def codebook_params(self) -> dict[str, Tensor]:
        return self.named_parameters()

    def fuse_tokens(self, group_hiddens) -> Tensor:
        """Fuse ``(..., n_tokens, width)`` hidden states into ``(..., width)``."""
        h = as_tensor(group_hiddens)
        if h.ndim < 2 or h.shape[-2:] != (self.n_tokens, self.width):
            raise DimensionError(
                f"fuse_tokens expects (..., {self.n_tokens}, {self.width}) hidden states, got {h.shape}"
            )
        flat = reshape(h, h.shape[:-2] + (self.n_tokens * self.width,))
        return self.fusion(flat)
