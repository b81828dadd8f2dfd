"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import ContractError, DimensionError


def check_binary_mask(mask, name="mask") -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-d, got shape {arr.shape}")
    if arr.dtype != bool and not np.isin(arr, (0, 1)).all():
        raise ContractError(f"{name} must be binary")
    return arr.astype(bool)


def check_mask_stack(masks, name="masks", shape=None) -> np.ndarray:
    """Coerce a sequence of binary masks to a (K, H, W) bool array (K may be 0)."""
    if isinstance(masks, np.ndarray) and masks.ndim == 3:
        arr = masks
    else:
        masks = list(masks)
        if not masks:
            if shape is None:
                raise ContractError(f"{name}: empty mask list needs an explicit shape")
            return np.zeros((0,) + tuple(shape), dtype=bool)
        arr = np.stack([np.asarray(m) for m in masks])
    if arr.ndim != 3:
        raise DimensionError(f"{name} must be (K, H, W), got {arr.shape}")
    if shape is not None and arr.shape[1:] != tuple(shape):
        raise DimensionError(f"{name}: mask shape {arr.shape[1:]} != {tuple(shape)}")
    if arr.dtype != bool and not np.isin(arr, (0, 1)).all():
        raise ContractError(f"{name} must be binary")
    return arr.astype(bool)


def check_scenes(X):
    """Validate a non-empty list of scenes with consistent image size and attributes."""
    scenes = list(X)
    if not scenes:
        raise ContractError("expected at least one scene")
    size = scenes[0].image.shape
    width = scenes[0].attributes.shape[1]
    for i, s in enumerate(scenes):
        if s.image.shape != size:
            raise DimensionError(f"scene {i}: image shape {s.image.shape} != {size}")
        if s.attributes.ndim != 2 or s.attributes.shape != (s.n_targets, width):
            raise DimensionError(f"scene {i}: attributes {s.attributes.shape} for {s.n_targets} targets")
        if s.masks.shape != (s.n_targets,) + size[1:]:
            raise DimensionError(f"scene {i}: masks {s.masks.shape} do not match image {size}")
    return scenes
