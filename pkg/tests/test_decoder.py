import numpy as np
import pytest

from gradcases import case_attention_block, case_full_decoder
from pixseg.decoder import DecoderConfig, PixelDecoder, feature_modulate, flops_estimate, flops_terms
from pixseg.exceptions import ContractError, DimensionError
from pixseg.numeric import AdamW, Tensor, backward, count_macs, no_grad
from pixseg.numeric import tensor as T


def _decoder(seed=0, **kw):
    cfg = DecoderConfig(**{"n_scales": 2, "width": 8, "n_out": 2, "mlp_width": 8, "sizes": ((8, 8), (4, 4)), **kw})
    return PixelDecoder(cfg, np.random.default_rng(seed)), cfg


def _inputs(cfg, batch, seed=1):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(batch, cfg.n_scales, cfg.width))
    feats = [rng.normal(size=(batch, cfg.width) + s) for s in cfg.sizes]
    return h, feats


def test_modulation_zero_mask_is_one_and_a_half():
    f = np.random.default_rng(0).normal(size=(2, 4, 6, 6))
    np.testing.assert_array_equal(feature_modulate(f, np.zeros((2, 3, 3))).data, 1.5 * f)


def test_modulation_bounds():
    f = np.ones((1, 1, 4, 4))
    m = np.random.default_rng(0).normal(scale=30.0, size=(1, 8, 8))
    factor = feature_modulate(f, m).data
    assert factor.min() > 1.0 and factor.max() < 2.0
    assert not feature_modulate(np.zeros((1, 2, 4, 4)), m).data.any()


def test_modulation_shape_check():
    with pytest.raises(DimensionError):
        feature_modulate(np.ones((1, 2, 4, 4)), np.zeros((2, 4, 4)))


def test_output_shapes():
    dec, cfg = _decoder()
    h, feats = _inputs(cfg, 3)
    out = dec.decode(h, feats)
    assert out.fused.shape == (3, 32, 32)
    assert [m.shape for m in out.scale_masks] == [(3, 32, 32), (3, 16, 16)]


def test_single_scale_fusion_is_identity():
    dec, cfg = _decoder(n_scales=1, sizes=((4, 4),))
    h, feats = _inputs(cfg, 2)
    out = dec.decode(h, feats)
    np.testing.assert_array_equal(out.fused.data, out.scale_masks[0].data)
    assert out.gamma.tolist() == [1.0]


def test_two_scale_fusion_is_weighted_sum():
    dec, _ = _decoder(sizes=((4, 4), (4, 4)))
    a = Tensor(np.random.default_rng(0).normal(size=(1, 16, 16)))
    b = Tensor(np.random.default_rng(1).normal(size=(1, 16, 16)))
    out = dec.mask_fusion([a, b])
    np.testing.assert_allclose(out.fused.data, 0.5 * a.data + 0.5 * b.data, rtol=0, atol=1e-15)


def test_constant_features_give_constant_mask():
    dec, cfg = _decoder(sizes=((4, 4),), n_scales=1)
    dec = PixelDecoder(cfg, np.random.default_rng(0), zero_mask_mlp=True)
    f = np.full((1, 8, 4, 4), 0.7)
    mask, _ = dec.attention_block(np.zeros((1, 8)), f, 0)
    assert np.ptp(mask.data) == 0.0


def test_permutation_equivariance():
    dec, cfg = _decoder()
    h, feats = _inputs(cfg, 4)
    perm = np.array([2, 0, 3, 1])
    with no_grad():
        base = dec.decode(h, feats).fused.data
        permuted = dec.decode(h[perm], [f[perm] for f in feats]).fused.data
    np.testing.assert_allclose(permuted, base[perm], rtol=1e-12, atol=1e-12)


def test_gamma_stays_normalised_after_updates():
    dec, cfg = _decoder()
    h, feats = _inputs(cfg, 2)
    opt = AdamW({"gamma_logits": dec.gamma_logits}, lr=5.0)
    for _ in range(10):
        opt.zero_grad()
        backward(T.sum_(dec.decode(h, feats).fused))
        opt.step()
        g = dec.gamma().data
        assert (g > 0).all() and abs(g.sum() - 1.0) < 1e-6


def test_bad_config_rejected():
    with pytest.raises(ContractError):
        DecoderConfig(n_out=0)
    with pytest.raises(ContractError):
        DecoderConfig(n_scales=2, sizes=((4, 4),))


def test_decode_level_count_mismatch():
    dec, cfg = _decoder()
    h, feats = _inputs(cfg, 1)
    with pytest.raises(DimensionError):
        dec.decode(h, feats[:1])


def test_single_output_token():
    dec, cfg = _decoder(n_out=1)
    assert dec.out_token.shape == (1, 8)
    h, feats = _inputs(cfg, 1)
    assert dec.decode(h, feats).fused.shape == (1, 32, 32)


@pytest.mark.parametrize("batch", [1, 3])
def test_flops_matches_instrumented_count(batch):
    dec, cfg = _decoder()
    h, feats = _inputs(cfg, batch)
    with no_grad(), count_macs() as c:
        dec.decode(h, feats)
    assert flops_estimate(cfg, batch) == c.total


def test_flops_empty_batch_and_scaling():
    cfg = DecoderConfig(n_scales=1, width=8, n_out=2, mlp_width=8, sizes=((4, 4),))
    big = DecoderConfig(n_scales=1, width=8, n_out=2, mlp_width=8, sizes=((8, 8),))
    assert flops_estimate(cfg, 0) == 0
    small_t, big_t = flops_terms(cfg, 1), flops_terms(big, 1)
    assert big_t["cross_attention_feature"] == 4 * small_t["cross_attention_feature"]


def test_attention_block_gradient():
    assert case_attention_block(0) < 1e-4


def test_full_decoder_gradient():
    assert case_full_decoder(0) < 1e-4
