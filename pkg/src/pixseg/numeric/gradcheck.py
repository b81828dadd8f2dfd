"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..exceptions import ContractError, NumericError
from .tensor import Tensor, backward, no_grad


def numerical_grad(f: Callable[[Tensor], Tensor], x: np.ndarray, h: float) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(Tensor(x)).item()
            flat[i] = orig - h
            fm = f(Tensor(x)).item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"f is not finite around coordinate {i}")
            gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def analytic_grad(f: Callable[[Tensor], Tensor], x: np.ndarray) -> np.ndarray:
    xt = Tensor(x, requires_grad=True)
    y = f(xt)
    if not np.isfinite(y.data).all():
        raise NumericError("f(x) is not finite")
    backward(y)
    return np.zeros_like(xt.data) if xt.grad is None else xt.grad


def finite_diff_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5) -> float:
    """Max over coordinates of ``|analytic - fd| / max(1, |fd|)``.

    ``f`` maps a tensor to a scalar tensor and must be deterministic.
    """
    if h <= 0:
        raise ContractError(f"step h must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    a = analytic_grad(f, x)
    n = numerical_grad(f, x, h)
    return float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n))))


def check_parameters(loss_fn: Callable[[], Tensor], params: dict[str, Tensor], h: float = 1e-5):
    """Finite-difference check of ``loss_fn`` against every parameter in place.

    Returns a mapping name -> max relative error.  Parameters are perturbed
    in place and restored.
    """
    for p in params.values():
        p.grad = None
    loss = loss_fn()
    backward(loss)
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for k, p in params.items()}
    errors = {}
    with no_grad():
        for name, p in params.items():
            flat = p.data.reshape(-1)
            num = np.zeros(flat.size)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = loss_fn().item()
                flat[i] = orig - h
                fm = loss_fn().item()
                flat[i] = orig
                num[i] = (fp - fm) / (2.0 * h)
            a = analytic[name].reshape(-1)
            errors[name] = float(np.max(np.abs(a - num) / np.maximum(1.0, np.abs(num))))
    return errors
