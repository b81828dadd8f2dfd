"""Desk-scale experiment: synthetic data, training and held-out metrics in one place."""

from __future__ import annotations

import time

from .config import RunConfig
from .data.synthetic import SceneConfig, gen_synthetic
from .model import MaskSegmenter

# held-out scenes come from a stream disjoint from the training seed
TEST_SEED_OFFSET = 1_000_003


def scene_config(cfg: RunConfig) -> SceneConfig:
    return SceneConfig(
        height=cfg.image_size, width=cfg.image_size, min_targets=cfg.min_targets, max_targets=cfg.max_targets
    )


def toy_data(cfg: RunConfig):
    """``(train, test)`` scene lists for ``cfg``."""
    sc = scene_config(cfg)
    return gen_synthetic(cfg.n_train, sc, seed=cfg.seed), gen_synthetic(cfg.n_test, sc, seed=cfg.seed + TEST_SEED_OFFSET)


def train_toy(cfg: RunConfig, callback=None):
    """Fit on synthetic scenes; returns ``(estimator, metrics)``."""
    train, test = toy_data(cfg)
    est = MaskSegmenter(**cfg.estimator_params(), log_every=0)
    t0 = time.perf_counter()
    est.fit(train, callback=callback)
    fit_seconds = time.perf_counter() - t0
    metrics = {
        "final_loss": est.loss_curve_[-1],
        "heldout_iou": est.score(test),
        "heldout_overlap_rate": est.overlap_rate(test),
        "fit_seconds": fit_seconds,
        "steps": len(est.loss_curve_),
    }
    return est, metrics
