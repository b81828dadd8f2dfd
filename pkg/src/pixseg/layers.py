"""Parameter containers and the few layers the model is built from."""

from __future__ import annotations

import math

import numpy as np

from .numeric import Tensor, layer_norm, linear, matmul, relu, scale, softmax, swap_last


class Module:
    """Collects Tensor parameters and child modules in attribute order."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            key = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(key + "."))
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], Module):
                for i, child in enumerate(value):
                    out.update(child.named_parameters(f"{key}.{i}."))
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.named_parameters().values())


def param(arr) -> Tensor:
    return Tensor(arr, requires_grad=True)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, init: str = "default"):
        if init == "zeros":
            w = np.zeros((n_out, n_in))
        elif init == "identity":
            w = np.eye(n_out, n_in)
        else:
            w = rng.uniform(-1.0, 1.0, size=(n_out, n_in)) / math.sqrt(n_in)
        self.weight = param(w)
        self.bias = param(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5):
        self.weight = param(np.ones(width))
        self.bias = param(np.zeros(width))
        self._eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.weight, self.bias, self._eps)


class MLP(Module):
    def __init__(self, width: int, hidden: int, rng: np.random.Generator, zero_last: bool = False):
        self.fc1 = Linear(width, hidden, rng)
        self.fc2 = Linear(hidden, width, rng, init="zeros" if zero_last else "default")

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(x)))


class Attention(Module):
    """Single-head scaled dot-product attention with in/out projections."""

    def __init__(self, width: int, rng: np.random.Generator):
        self.q = Linear(width, width, rng)
        self.k = Linear(width, width, rng)
        self.v = Linear(width, width, rng)
        self.out = Linear(width, width, rng)
        self._scale = 1.0 / math.sqrt(width)

    def __call__(self, query: Tensor, key: Tensor, value: Tensor) -> Tensor:
        q, k, v = self.q(query), self.k(key), self.v(value)
        weights = softmax(scale(matmul(q, swap_last(k)), self._scale), axis=-1)
        return self.out(matmul(weights, v))
