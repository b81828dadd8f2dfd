import math

import numpy as np
import pytest

import oracles
from gradcases import case_bce, case_dice, case_refinement
from pixseg.exceptions import ContractError, DimensionError
from pixseg.losses import (
    LossWeights,
    batched_mask_loss,
    bce_per_pixel,
    dice_loss,
    refinement_weight_map,
    target_refinement_loss,
    total_mask_loss,
)


def test_bce_values():
    assert bce_per_pixel(np.array([0.5]), np.array([1.0])).data[0] == pytest.approx(math.log(2), abs=1e-15)
    assert bce_per_pixel(np.array([0.9]), np.array([0.0])).data[0] == pytest.approx(-math.log(0.1), abs=1e-12)
    perfect = bce_per_pixel(np.array([1.0, 0.0]), np.array([1.0, 0.0])).data
    assert perfect.max() <= -math.log(1 - 1e-7) + 1e-16


def test_bce_shape_mismatch():
    with pytest.raises(DimensionError):
        bce_per_pixel(np.zeros((2, 2)), np.zeros((2, 3)))


def test_dice_values():
    assert dice_loss(np.ones((2, 2)), np.ones((2, 2))).item() == 0.0
    assert dice_loss(np.zeros((2, 2)), np.zeros((2, 2))).item() == 0.0
    # half overlap: 1 - (2*2 + 1) / (4 + 2 + 1) = 2/7
    pred = np.ones((2, 2))
    tgt = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert dice_loss(pred, tgt).item() == pytest.approx(2 / 7, abs=1e-15)


def test_weight_map_cases():
    assert (refinement_weight_map(np.full((1, 3, 3), 0.9), 2.0) == 1.0).all()
    assert (refinement_weight_map(np.ones((2, 3, 3)), 2.0) == 2.0).all()
    with pytest.raises(ContractError):
        refinement_weight_map(np.zeros((0, 2, 2)), 2.0)


def test_refinement_reduces_to_plain_bce():
    rng = np.random.default_rng(0)
    y = (rng.random((2, 4, 4)) < 0.5).astype(float)
    disjoint = np.stack([np.full((4, 4), 0.9), np.full((4, 4), 0.1)])
    plain = bce_per_pixel(disjoint, y).data.mean()
    assert target_refinement_loss(disjoint, y).item() == pytest.approx(plain, abs=1e-15)
    overlap = np.full((2, 4, 4), 0.8)
    plain = bce_per_pixel(overlap, y).data.mean()
    assert target_refinement_loss(overlap, y, alpha=2.0).item() == pytest.approx(2 * plain, abs=1e-15)


def test_refinement_matches_loop_reference():
    rng = np.random.default_rng(7)
    for _ in range(10):
        k = int(rng.integers(1, 6))
        p = rng.random((k, 8, 8))
        y = (rng.random((k, 8, 8)) < 0.5).astype(float)
        ref = oracles.refinement_loss_loop(p.tolist(), y.tolist(), 2.0)
        assert abs(target_refinement_loss(p, y, 2.0).item() - ref) < 1e-12


def test_total_loss_weights():
    p = np.random.default_rng(0).random((2, 4, 4))
    y = (p > 0.3).astype(float)
    assert total_mask_loss(p, y, LossWeights(2.0, 0.0, 0.0)).item() == 0.0
    expected = 2.0 * target_refinement_loss(p, y).item() + 0.5 * dice_loss(p, y).item()
    assert total_mask_loss(p, y).item() == pytest.approx(expected, abs=1e-14)


def test_bad_weights():
    with pytest.raises(ContractError):
        LossWeights(alpha=0.5)
    with pytest.raises(ContractError):
        LossWeights(lambda_ref=-1.0)


def test_batched_equals_mean_of_scenes():
    rng = np.random.default_rng(3)
    groups = np.array([0, 0, 0, 1, 2, 2])
    p = rng.random((6, 5, 5))
    y = (rng.random((6, 5, 5)) < 0.5).astype(float)
    loss, parts = batched_mask_loss(p, y, groups)
    per_scene = [total_mask_loss(p[groups == g], y[groups == g]).item() for g in range(3)]
    assert loss.item() == pytest.approx(np.mean(per_scene), abs=1e-13)
    assert set(parts) == {"ref", "dice"}


@pytest.mark.parametrize("case", [case_bce, case_dice, case_refinement])
def test_loss_gradients(case):
    assert case(0) < 1e-6
