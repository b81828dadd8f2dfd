"""Estimator wrapper: fit/predict over synthetic scenes with an sklearn-style API."""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import time
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .codebook import SegCodebook
from .decoder import DecoderConfig, MaskLogits, PixelDecoder
from .encoder import DecoderProjection, TargetEmbedder, ToyEncoder
from .exceptions import FormatError, NumericError
from .layers import Module
from .losses import LossWeights, batched_mask_loss
from .numeric import AdamW, Tensor, WarmupDecayLR, backward, load_tensor, no_grad, save_tensor, sigmoid, take
from .validation import check_scenes

logger = logging.getLogger(__name__)


class SegmentationNet(Module):
    """Encoder, projection, codebook, target embedder and pixel decoder."""

    def __init__(
        self,
        image_size=(64, 64),
        strides=(4, 8),
        enc_width=32,
        width=32,
        n_codebook=3,
        n_out=2,
        mlp_width=64,
        attr_dim=10,
        seed=0,
    ):
        rng = np.random.default_rng(seed)
        self.image_size = tuple(image_size)
        self.encoder = ToyEncoder(3, enc_width, strides, rng)
        self.projection = DecoderProjection(len(strides), enc_width, width, rng)
        self.codebook = SegCodebook(len(strides), n_codebook, width, rng)
        self.embedder = TargetEmbedder(attr_dim, width, mlp_width, rng)
        sizes = tuple((image_size[0] // s, image_size[1] // s) for s in strides)
        self.decoder = PixelDecoder(
            DecoderConfig(n_scales=len(strides), width=width, n_out=n_out, mlp_width=mlp_width, sizes=sizes), rng
        )

    def forward(self, images, attributes, owner) -> MaskLogits:
        """``images`` (B, 3, H, W); ``attributes`` (T, A); ``owner[t]`` image index of target t."""
        feats = self.projection(self.encoder(Tensor(images)))
        owner = np.asarray(owner, dtype=np.intp)
        per_target = [take(level, owner, axis=0) for level in feats.levels]
        glob = take(feats.global_feature(), owner, axis=0)
        hidden = self.embedder.embed_targets(np.asarray(attributes, dtype=np.float64), glob, self.codebook.tokens)
        fused = self.codebook.fuse_tokens(hidden)
        return self.decoder.decode(fused, per_target)


def _flatten_batch(scenes):
    images = np.stack([s.image for s in scenes])
    attrs = np.concatenate([s.attributes for s in scenes])
    masks = np.concatenate([s.masks for s in scenes]).astype(np.float64)
    owner = np.concatenate([np.full(s.n_targets, i) for i, s in enumerate(scenes)])
    return images, attrs, masks, owner


class MaskSegmenter(BaseEstimator):
    """Multi-target mask predictor trained on :class:`SyntheticScene` lists.

    Hyper-parameters follow sklearn conventions: everything passed to
    ``__init__`` is stored untouched and exposed through ``get_params``.
    """

    def __init__(
        self,
        n_scales=2,
        strides=(4, 8),
        width=32,
        enc_width=32,
        n_codebook=3,
        n_out=2,
        mlp_width=64,
        alpha=2.0,
        lambda_ref=2.0,
        lambda_dice=0.5,
        learning_rate=3.0e-4,
        weight_decay=0.0,
        betas=(0.9, 0.95),
        batch_size=16,
        warmup_steps=100,
        grad_accum=10,
        n_steps=2000,
        random_state=0,
        log_every=50,
    ):
        self.n_scales = n_scales
        self.strides = strides
        self.width = width
        self.enc_width = enc_width
        self.n_codebook = n_codebook
        self.n_out = n_out
        self.mlp_width = mlp_width
        self.alpha = alpha
        self.lambda_ref = lambda_ref
        self.lambda_dice = lambda_dice
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.betas = betas
        self.batch_size = batch_size
        self.warmup_steps = warmup_steps
        self.grad_accum = grad_accum
        self.n_steps = n_steps
        self.random_state = random_state
        self.log_every = log_every

    def _build(self, image_size, attr_dim):
        if len(self.strides) != self.n_scales:
            raise ValueError(f"{len(self.strides)} strides given for n_scales={self.n_scales}")
        return SegmentationNet(
            image_size=image_size,
            strides=self.strides,
            enc_width=self.enc_width,
            width=self.width,
            n_codebook=self.n_codebook,
            n_out=self.n_out,
            mlp_width=self.mlp_width,
            attr_dim=attr_dim,
            seed=self.random_state,
        )

    def fit(self, X, y=None, callback=None):
        """Train on a list of scenes.  ``callback(step, loss)`` runs after each optimizer step."""
        scenes = check_scenes(X)
        image_size = scenes[0].image.shape[-2:]
        attr_dim = scenes[0].attributes.shape[1]
        self.net_ = self._build(image_size, attr_dim)
        params = self.net_.named_parameters()
        weights = LossWeights(self.alpha, self.lambda_ref, self.lambda_dice)
        opt = AdamW(params, lr=self.learning_rate, betas=tuple(self.betas), weight_decay=self.weight_decay)
        sched = WarmupDecayLR(self.learning_rate, self.warmup_steps, self.n_steps)
        rng = np.random.default_rng(self.random_state + 1)
        self.loss_curve_ = []
        t0 = time.perf_counter()
        for step in range(self.n_steps):
            opt.zero_grad()
            total = 0.0
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    for _ in range(self.grad_accum):
                        idx = rng.choice(len(scenes), size=min(self.batch_size, len(scenes)), replace=False)
                        images, attrs, masks, owner = _flatten_batch([scenes[i] for i in idx])
                        out = self.net_.forward(images, attrs, owner)
                        loss, _ = batched_mask_loss(sigmoid(out.fused), masks, owner, weights)
                        if not math.isfinite(loss.item()):
                            raise NumericError("loss is not finite")
                        backward(loss)
                        total += loss.item()
                    opt.step(lr=sched(step), grad_scale=1.0 / self.grad_accum)
            except NumericError as exc:
                raise NumericError(f"training aborted at step {step}: {exc}") from exc
            self.loss_curve_.append(total / self.grad_accum)
            if callback is not None:
                callback(step, self.loss_curve_[-1])
            if self.log_every and (step % self.log_every == 0 or step == self.n_steps - 1):
                logger.info("step %d loss %.5f (%.1fs)", step, self.loss_curve_[-1], time.perf_counter() - t0)
        self.n_features_in_ = attr_dim
        self.image_size_ = tuple(int(v) for v in image_size)
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("MaskSegmenter is not fitted yet; call fit first")

    def decision_function(self, X, batch_size=32):
        """Fused mask logits per scene, list of (K, H, W) arrays."""
        self._check_fitted()
        scenes = check_scenes(X)
        out = []
        with no_grad():
            for start in range(0, len(scenes), batch_size):
                chunk = scenes[start : start + batch_size]
                images, attrs, _, owner = _flatten_batch(chunk)
                fused = self.net_.forward(images, attrs, owner).fused.data
                for i in range(len(chunk)):
                    out.append(fused[owner == i])
        return out

    def predict_proba(self, X):
        return [1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))) for z in self.decision_function(X)]

    def predict(self, X):
        return [(z > 0).astype(np.uint8) for z in self.decision_function(X)]

    def score(self, X, y=None):
        """Mean IoU over all targets of all scenes."""
        scenes = check_scenes(X)
        ious = []
        for scene, pred in zip(scenes, self.predict(scenes)):
            for p, g in zip(pred.astype(bool), scene.masks.astype(bool)):
                union = np.logical_or(p, g).sum()
                ious.append(1.0 if union == 0 else np.logical_and(p, g).sum() / union)
        return float(np.mean(ious))

    def overlap_rate(self, X):
        """Mean fraction of pixels claimed by two or more predicted masks, over scenes with K >= 2."""
        scenes = check_scenes(X)
        rates = [
            float(((pred.sum(axis=0)) >= 2).mean())
            for scene, pred in zip(scenes, self.predict(scenes))
            if scene.n_targets >= 2
        ]
        return float(np.mean(rates)) if rates else 0.0

    # checkpointing ---------------------------------------------------------

    def save(self, directory, extra=None) -> Path:
        """Write one tensor file per parameter and a JSON manifest, atomically."""
        self._check_fitted()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for name, p in self.net_.named_parameters().items():
            fname = f"{name}.bin"
            save_tensor(directory / fname, p.data)
            entries.append({"name": name, "shape": list(p.shape), "file": fname})
        manifest = {
            "params": self.get_params(),
            "image_size": list(self.image_size_),
            "attr_dim": int(self.n_features_in_),
            "tensors": entries,
        }
        if extra:
            manifest["extra"] = extra
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".manifest", suffix=".json")
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest, fh, indent=2, default=list)
        os.replace(tmp, directory / "manifest.json")
        return directory / "manifest.json"

    @classmethod
    def load(cls, directory) -> "MaskSegmenter":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        params = manifest["params"]
        for key in ("strides", "betas"):
            params[key] = tuple(params[key])
        est = cls(**params)
        est.net_ = est._build(tuple(manifest["image_size"]), manifest["attr_dim"])
        est.image_size_ = tuple(manifest["image_size"])
        est.n_features_in_ = manifest["attr_dim"]
        live = est.net_.named_parameters()
        listed = {e["name"]: e for e in manifest["tensors"]}
        if set(listed) != set(live):
            raise FormatError("checkpoint parameter names do not match the model")
        for name, p in live.items():
            arr = load_tensor(directory / listed[name]["file"])
            if arr.shape != p.shape:
                raise FormatError(f"{name}: stored shape {arr.shape} != model shape {p.shape}")
            p.data[...] = arr
        return est
