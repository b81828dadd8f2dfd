"""Synthetic scenes of coloured rectangles and ellipses with exact masks.

Shapes are painted back to front, so a pixel belongs to the front-most shape
covering it and the ground-truth masks never overlap.  Every shape in a scene
gets a distinct colour, which makes the colour alone a sufficient query.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import ContractError, GenerationError

PALETTE = {
    "red": (0.9, 0.1, 0.1),
    "green": (0.1, 0.8, 0.2),
    "blue": (0.15, 0.25, 0.95),
    "yellow": (0.95, 0.9, 0.1),
    "magenta": (0.85, 0.15, 0.85),
    "cyan": (0.1, 0.85, 0.9),
}
KINDS = ("rectangle", "ellipse")
BACKGROUND = (0.08, 0.08, 0.08)


@dataclass(frozen=True)
class SceneConfig:
    height: int = 64
    width: int = 64
    min_targets: int = 1
    max_targets: int = 4
    min_size: int = 14
    max_size: int = 36
    min_visible: int = 40
    max_retries: int = 200
    kinds: tuple = KINDS
    colors: tuple = tuple(PALETTE)

    def __post_init__(self):
        if self.height < 4 or self.width < 4:
            raise ContractError("canvas must be at least 4x4")
        if not 1 <= self.min_targets <= self.max_targets:
            raise ContractError(f"bad target range ({self.min_targets}, {self.max_targets})")
        if self.max_targets > len(self.colors):
            raise ContractError("need at least as many colours as the maximum target count")
        if not 1 <= self.min_size <= self.max_size:
            raise ContractError("bad shape size range")
        unknown = set(self.kinds) - set(KINDS) or set(self.colors) - set(PALETTE)
        if unknown:
            raise ContractError(f"unknown shape vocabulary: {sorted(unknown)}")

    @property
    def attr_dim(self) -> int:
        return len(PALETTE) + len(KINDS) + 2


@dataclass
class Shape:
    kind: str
    color: str
    # rectangle: x0, y0, x1, y1 ; ellipse: cx, cy, rx, ry  (pixel units, float)
    geometry: tuple
    depth: int

    @property
    def center(self) -> tuple[float, float]:
        g = self.geometry
        if self.kind == "rectangle":
            return ((g[0] + g[2]) / 2, (g[1] + g[3]) / 2)
        return (g[0], g[1])


@dataclass
class SyntheticScene:
    image: np.ndarray  # (3, H, W) in [0, 1]
    shapes: list
    masks: np.ndarray  # (K, H, W) uint8, visible pixels per shape
    descriptions: list = field(default_factory=list)
    attributes: np.ndarray = None  # (K, attr_dim)

    @property
    def n_targets(self) -> int:
        return len(self.shapes)


def rasterize(shape: Shape, height: int, width: int) -> np.ndarray:
    """Boolean coverage sampled at pixel centres."""
    ys = np.arange(height)[:, None] + 0.5
    xs = np.arange(width)[None, :] + 0.5
    g = shape.geometry
    if shape.kind == "rectangle":
        return (xs >= g[0]) & (xs < g[2]) & (ys >= g[1]) & (ys < g[3])
    return ((xs - g[0]) / g[2]) ** 2 + ((ys - g[1]) / g[3]) ** 2 <= 1.0


def render(shapes, height: int, width: int):
    """Paint shapes by ascending depth; returns (image, owner map of shape index or -1)."""
    owner = np.full((height, width), -1, dtype=np.int64)
    for i in sorted(range(len(shapes)), key=lambda i: shapes[i].depth):
        owner[rasterize(shapes[i], height, width)] = i
    image = np.empty((3, height, width))
    for c in range(3):
        image[c] = BACKGROUND[c]
    for i, s in enumerate(shapes):
        sel = owner == i
        for c in range(3):
            image[c][sel] = PALETTE[s.color][c]
    return image, owner


def position_words(cx: float, cy: float, height: int, width: int) -> str:
    horiz = ("left", "center", "right")[min(int(3 * cx / width), 2)]
    vert = ("top", "middle", "bottom")[min(int(3 * cy / height), 2)]
    if vert == "middle" and horiz == "center":
        return "in the center"
    if vert == "middle":
        return f"on the {horiz}"
    if horiz == "center":
        return f"at the {vert}"
    return f"in the {vert} {horiz}"


def describe(shape: Shape, height: int, width: int) -> str:
    cx, cy = shape.center
    return f"{shape.color} {shape.kind} {position_words(cx, cy, height, width)}"


_H_WORDS = {"left": 1 / 6, "center": 0.5, "right": 5 / 6}
_V_WORDS = {"top": 1 / 6, "middle": 0.5, "bottom": 5 / 6}


def attributes_from_description(text: str) -> np.ndarray:
    """Query vector: colour one-hot, shape one-hot, coarse (x, y) position in [0, 1].

    Built from the description words alone, so a stored record can be
    turned back into model input without the original geometry.
    """
    words = text.lower().split()
    colors = list(PALETTE)
    v = np.zeros(len(colors) + len(KINDS) + 2)
    for w in words:
        if w in PALETTE:
            v[colors.index(w)] = 1.0
        if w in KINDS:
            v[len(colors) + KINDS.index(w)] = 1.0
    v[-2] = next((_H_WORDS[w] for w in words if w in _H_WORDS), 0.5)
    v[-1] = next((_V_WORDS[w] for w in words if w in _V_WORDS), 0.5)
    return v


def attribute_vector(shape: Shape, height: int, width: int) -> np.ndarray:
    return attributes_from_description(describe(shape, height, width))


def _random_shape(rng: np.random.Generator, cfg: SceneConfig, color: str, depth: int) -> Shape:
    kind = cfg.kinds[rng.integers(len(cfg.kinds))]
    w = rng.uniform(cfg.min_size, cfg.max_size)
    h = rng.uniform(cfg.min_size, cfg.max_size)
    w, h = min(w, cfg.width), min(h, cfg.height)
    x0 = rng.uniform(0, cfg.width - w)
    y0 = rng.uniform(0, cfg.height - h)
    if kind == "rectangle":
        geom = (x0, y0, x0 + w, y0 + h)
    else:
        geom = (x0 + w / 2, y0 + h / 2, w / 2, h / 2)
    return Shape(kind, color, tuple(float(v) for v in geom), depth)


def make_scene(shapes, cfg: SceneConfig) -> SyntheticScene:
    image, owner = render(shapes, cfg.height, cfg.width)
    masks = np.stack([(owner == i) for i in range(len(shapes))]).astype(np.uint8)
    return SyntheticScene(
        image=image,
        shapes=list(shapes),
        masks=masks,
        descriptions=[describe(s, cfg.height, cfg.width) for s in shapes],
        attributes=np.stack([attribute_vector(s, cfg.height, cfg.width) for s in shapes]),
    )


def generate_scene(rng: np.random.Generator, cfg: SceneConfig, seed=None) -> SyntheticScene:
    k = int(rng.integers(cfg.min_targets, cfg.max_targets + 1))
    for _ in range(cfg.max_retries):
        colors = rng.choice(len(cfg.colors), size=k, replace=False)
        shapes = [_random_shape(rng, cfg, cfg.colors[c], depth) for depth, c in enumerate(colors)]
        scene = make_scene(shapes, cfg)
        if scene.masks.reshape(k, -1).sum(axis=1).min() >= cfg.min_visible:
            return scene
    raise GenerationError(f"could not place {k} visible shapes after {cfg.max_retries} tries (seed={seed})")


def gen_synthetic(n_scenes: int, config: SceneConfig = SceneConfig(), seed: int = 0) -> list[SyntheticScene]:
    """``n_scenes`` scenes, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    return [generate_scene(rng, config, seed=seed) for _ in range(n_scenes)]


def save_png(image: np.ndarray, path) -> None:
    from PIL import Image

    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[0] in (1, 3):
        arr = np.moveaxis(arr, 0, -1)
    arr = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[-1] == 1:
        arr = arr[..., 0]
    Image.fromarray(arr).save(Path(path))
