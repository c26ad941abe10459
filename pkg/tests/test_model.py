import numpy as np
import pytest

from oracles import (
    finite_difference_sweep,
    gradient_ok,
    naive_conv1d,
    ref_attentive_pool,
    ref_classifier,
    ref_encoder,
    ref_se_res2,
)

from c2c.errors import CheckpointError, ConfigError, ShapeError
from c2c.features import LOG_MEL, FeatureMatrix
from c2c.model import tensor as T
from c2c.model.checkpoint import checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint
from c2c.model.layers import attentive_stat_pool, init_attentive_pool, init_se_res2_block, se_res2_block
from c2c.model.network import (
    AlphaFusion,
    C2CModel,
    ClassifierConfig,
    EtEncoderConfig,
    classifier_forward,
    et_encoder_forward,
    fuse_alpha,
    init_classifier,
    init_encoder,
)
from c2c.model.tensor import Tensor, parameter
from c2c.train_eval.metrics import bce_loss


def arrays(params):
    return {k: v.data for k, v in params.items()}


def randomize(params, rng, scale=0.3):
    for p in params.values():
        p.data = rng.normal(scale=scale, size=p.shape)
    return params


# -- conv1d ------------------------------------------------------------------------

def test_conv_identity_kernel():
    x = np.random.default_rng(0).normal(size=(3, 9))
    out = T.conv1d(Tensor(x), Tensor(np.eye(3)[:, :, None]), Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, x)


def test_conv_zero_weights_gives_bias():
    out = T.conv1d(Tensor(np.ones((2, 6))), Tensor(np.zeros((4, 2, 3))), Tensor([1.0, 2.0, 3.0, 4.0]), dilation=2)
    np.testing.assert_array_equal(out.data, np.repeat([[1.0], [2.0], [3.0], [4.0]], 6, axis=1))


@pytest.mark.parametrize("kernel,dilation", [(3, 2), (5, 1), (3, 4), (1, 1)])
def test_conv_matches_naive_loop(kernel, dilation):
    rng = np.random.default_rng(kernel * 10 + dilation)
    x, w, b = rng.normal(size=(2, 7)), rng.normal(size=(3, 2, kernel)), rng.normal(size=3)
    out = T.conv1d(Tensor(x), Tensor(w), Tensor(b), dilation)
    np.testing.assert_allclose(out.data, naive_conv1d(x, w, b, dilation), atol=1e-9)


def test_conv_batched_equals_per_example():
    rng = np.random.default_rng(1)
    x, w, b = rng.normal(size=(4, 2, 7)), rng.normal(size=(3, 2, 3)), rng.normal(size=3)
    out = T.conv1d(Tensor(x), Tensor(w), Tensor(b), 2).data
    for i in range(4):
        np.testing.assert_allclose(out[i], naive_conv1d(x[i], w, b, 2), atol=1e-9)


def test_conv_gradients():
    rng = np.random.default_rng(2)
    x0, w0, b0 = rng.normal(size=(2, 3, 8)), rng.normal(size=(4, 3, 3)), rng.normal(size=4)
    x, w, b = parameter(x0), parameter(w0), parameter(b0)
    weights = rng.normal(size=(2, 4, 8))
    T.tsum(T.conv1d(x, w, b, 3) * weights).backward()

    def f(xv, wv, bv):
        return sum(np.sum(naive_conv1d(xv[i], wv, bv, 3) * weights[i]) for i in range(2))

    h = 1e-6
    for arr, grad, fn in ((x0, x.grad, lambda v: f(v, w0, b0)), (w0, w.grad, lambda v: f(x0, v, b0)),
                          (b0, b.grad, lambda v: f(x0, w0, v))):
        for idx in rng.choice(arr.size, size=min(6, arr.size), replace=False):
            a = arr.copy()
            a.flat[idx] += h
            up = fn(a)
            a.flat[idx] -= 2 * h
            num = (up - fn(a)) / (2 * h)
            assert abs(grad.flat[idx] - num) < 1e-6


def test_conv_shape_errors():
    with pytest.raises(ShapeError):
        T.conv1d(Tensor(np.ones((3, 5))), Tensor(np.ones((2, 2, 3))))
    with pytest.raises(ShapeError):
        T.conv1d(Tensor(np.ones((2, 5))), Tensor(np.ones((2, 2, 2))))


# -- SE-Res2 block -----------------------------------------------------------------

def block_params(channels=8, bottleneck=4, seed=0):
    params = {}
    init_se_res2_block(np.random.default_rng(seed), params, "b", channels, bottleneck)
    return params


def test_block_zero_branch_is_residual():
    params = block_params()
    for k, p in params.items():
        if not k.startswith("b.se"):
            p.data = np.zeros_like(p.data)
    x = np.random.default_rng(1).normal(size=(1, 8, 5))
    np.testing.assert_array_equal(se_res2_block(Tensor(x), params, "b", 2).data, x)


def test_se_gate_with_zero_bottleneck_is_sigmoid_of_bias():
    params = block_params()
    randomize(params, np.random.default_rng(2))
    params["b.se.squeeze.weight"].data[:] = 0
    params["b.se.squeeze.bias"].data[:] = 0
    gate = 1 / (1 + np.exp(-params["b.se.excite.bias"].data))
    x = np.random.default_rng(3).normal(size=(8, 5))
    out = se_res2_block(Tensor(x[None]), params, "b", 2).data[0]
    # recover the pre-gate branch from the reference with the gate forced to one
    ref = arrays(params)
    ref["b.se.excite.bias"] = np.full(8, 50.0)
    branch = ref_se_res2(x, ref, "b", 2) - x
    np.testing.assert_allclose(out - x, branch * gate[:, None], atol=1e-9)


def test_block_matches_reference():
    params = randomize(block_params(), np.random.default_rng(4))
    x = np.random.default_rng(5).normal(size=(8, 5))
    out = se_res2_block(Tensor(x[None]), params, "b", 3).data[0]
    np.testing.assert_allclose(out, ref_se_res2(x, arrays(params), "b", 3), atol=1e-9)


def test_block_channel_divisibility():
    with pytest.raises(ConfigError):
        init_se_res2_block(np.random.default_rng(0), {}, "b", 6, 2)
    with pytest.raises(ConfigError):
        se_res2_block(Tensor(np.ones((1, 6, 4))), block_params(), "b", 2)


# -- attentive statistics pooling ----------------------------------------------------

def pool_params(channels=4, hidden=3, seed=0):
    params = {}
    init_attentive_pool(np.random.default_rng(seed), params, "p", channels, hidden)
    return params


def test_pool_single_frame():
    params = pool_params()
    x = np.array([[1.0], [2.0], [-3.0], [0.5]])
    out = attentive_stat_pool(Tensor(x[None]), params, "p").data[0]
    np.testing.assert_allclose(out[:4], x[:, 0], atol=1e-12)
    np.testing.assert_allclose(out[4:], np.sqrt(1e-9), rtol=1e-6)


def test_pool_uniform_attention_is_time_mean():
    params = pool_params()
    for p in params.values():
        p.data = np.zeros_like(p.data)
    x = np.random.default_rng(1).normal(size=(4, 6))
    out = attentive_stat_pool(Tensor(x[None]), params, "p").data[0]
    np.testing.assert_allclose(out[:4], x.mean(axis=1), atol=1e-12)
    np.testing.assert_allclose(out[4:], x.std(axis=1), atol=1e-9)


def test_pool_matches_formula():
    params = randomize(pool_params(), np.random.default_rng(2), scale=1.0)
    x = np.random.default_rng(3).normal(size=(4, 6))
    out = attentive_stat_pool(Tensor(x[None]), params, "p").data[0]
    np.testing.assert_allclose(out, ref_attentive_pool(x, arrays(params), "p"), atol=1e-9)


# -- encoder, classifier, fusion -----------------------------------------------------

SMALL = EtEncoderConfig(in_dim=6, channels=8, blocks=3, se_bottleneck=4, attn_hidden=4, embed_dim=5)


def test_encoder_shape_and_variable_length():
    params = init_encoder(SMALL, np.random.default_rng(0))
    for t_len in (1, 7, 33):
        emb = et_encoder_forward(np.random.default_rng(t_len).normal(size=(6, t_len)), SMALL, params)
        assert emb.shape == (5,)
        assert np.all(np.isfinite(emb.data))


def test_encoder_accepts_feature_matrix():
    params = init_encoder(SMALL, np.random.default_rng(0))
    data = np.random.default_rng(1).normal(size=(9, 6))
    a = et_encoder_forward(FeatureMatrix(data, 10.0, LOG_MEL), SMALL, params).data
    b = et_encoder_forward(data.T, SMALL, params).data
    np.testing.assert_array_equal(a, b)


def test_encoder_dimension_mismatch():
    params = init_encoder(SMALL, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        et_encoder_forward(np.ones((7, 10)), SMALL, params)


def test_encoder_matches_staged_composition():
    params = init_encoder(SMALL, np.random.default_rng(3))
    x = np.random.default_rng(4).normal(size=(6, 11))
    out = et_encoder_forward(x, SMALL, params).data
    np.testing.assert_allclose(out, ref_encoder(x, arrays(params), SMALL), atol=1e-8)


def test_encoder_batch_rows_independent():
    params = init_encoder(SMALL, np.random.default_rng(3))
    x = np.random.default_rng(5).normal(size=(3, 6, 10))
    batched = et_encoder_forward(x, SMALL, params).data
    for i in range(3):
        np.testing.assert_allclose(batched[i], et_encoder_forward(x[i], SMALL, params).data, atol=1e-12)


def test_encoder_config_invariants():
    assert EtEncoderConfig().channels == 64
    with pytest.raises(ConfigError):
        EtEncoderConfig(blocks=2)
    with pytest.raises(ConfigError):
        EtEncoderConfig(channels=30)


def test_classifier_zero_params():
    params = init_classifier(ClassifierConfig(), 5, np.random.default_rng(0))
    for p in params.values():
        p.data = np.zeros_like(p.data)
    assert classifier_forward(np.ones(5), ClassifierConfig(), params).item() == 0.5
    params["classifier.fc2.bias"].data[:] = 10.0
    p = classifier_forward(np.ones(5), ClassifierConfig(), params).item()
    assert abs(p - 1 / (1 + np.exp(-10))) < 1e-12 and abs(p - 0.99995) < 1e-5


def test_classifier_matches_matrix_arithmetic():
    params = randomize(init_classifier(ClassifierConfig(), 5, np.random.default_rng(0)), np.random.default_rng(1), 1.0)
    e = np.random.default_rng(2).normal(size=5)
    got = classifier_forward(e, ClassifierConfig(), params).item()
    assert abs(got - ref_classifier(e, arrays(params))) < 1e-9


def test_classifier_output_open_interval():
    params = randomize(init_classifier(ClassifierConfig(), 5, np.random.default_rng(0)), np.random.default_rng(1), 1.0)
    for scale in (1e-3, 1.0, 1e3):
        e = scale * np.random.default_rng(3).normal(size=(20, 5))
        p = classifier_forward(e, ClassifierConfig(), params).data
        assert np.all((p >= 0) & (p <= 1)) and not np.any(np.isnan(p))
    with pytest.raises(ValueError):
        classifier_forward(np.array([np.nan] * 5), ClassifierConfig(), params)


def test_fusion_saturated_and_midpoint():
    rng = np.random.default_rng(0)
    c, b = rng.normal(size=48), rng.normal(size=48)
    fused = fuse_alpha(c, b, AlphaFusion(parameter(20.0))).data
    assert np.max(np.abs(fused - c)) < 1e-8
    mid = fuse_alpha(c, b, AlphaFusion(parameter(0.0))).data
    np.testing.assert_allclose(mid, (c + b) / 2, atol=1e-15)
    with pytest.raises(ShapeError):
        fuse_alpha(c, b[:5], AlphaFusion())


def test_fusion_gradient_to_raw_alpha():
    rng = np.random.default_rng(1)
    c0, b0 = rng.normal(size=6), rng.normal(size=6)
    w = rng.normal(size=6)
    fusion = AlphaFusion(parameter(0.3))
    c, b = parameter(c0), parameter(b0)
    T.tsum(fuse_alpha(c, b, fusion) * w).backward()

    def f(r):
        a = 1 / (1 + np.exp(-r))
        return np.sum((a * c0 + (1 - a) * b0) * w)
    h = 1e-5
    num = (f(0.3 + h) - f(0.3 - h)) / (2 * h)
    assert abs(fusion.raw_alpha.grad - num) <= 1e-4 * abs(num)
    assert c.grad is not None and b.grad is not None


def test_model_forward_is_deterministic():
    model = C2CModel(SMALL, seed=4)
    x = {"cough": np.random.default_rng(0).normal(size=(2, 6, 12))}
    assert np.array_equal(model(x).data, model(x).data)
    assert np.array_equal(C2CModel(SMALL, seed=4)(x).data, model(x).data)


def test_fused_model_has_gate_and_two_encoders():
    model = C2CModel(SMALL, modalities=("cough", "breath"), seed=0)
    assert model.alpha == 0.5
    assert any(k.startswith("encoder.cough.") for k in model.params)
    assert any(k.startswith("encoder.breath.") for k in model.params)
    assert "fusion.raw_alpha" in model.params


def test_small_model_gradients_match_finite_differences():
    model = C2CModel(SMALL, ClassifierConfig(hidden_dim=4), ("cough", "breath"), seed=2)
    rng = np.random.default_rng(6)
    inputs = {"cough": rng.normal(size=(2, 6, 9)), "breath": rng.normal(size=(2, 6, 9))}
    results = finite_difference_sweep(lambda: bce_loss(model(inputs), [1, 0]), model.params, 3, rng)
    bad = [r for r in results if not gradient_ok(r[2], r[3])]
    assert not bad, bad[:5]
    assert {r[0] for r in results} == set(model.params)


# -- checkpoints -------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    model = C2CModel(SMALL, seed=1)
    path = tmp_path / "m.c2cm"
    save_checkpoint(model.state_dict(), path)
    state = load_checkpoint(path)
    assert list(state) == list(model.params)
    back = C2CModel.from_state_dict(state)
    assert checkpoint_bytes(back.state_dict()) == path.read_bytes()
    x = {"cough": np.random.default_rng(0).normal(size=(1, 6, 8))}
    assert abs(back(x).item() - model(x).item()) < 1e-5


def test_checkpoint_layout():
    data = checkpoint_bytes({"w": np.array([[1.0, 2.0]])})
    assert data[:4] == b"C2CM"
    assert np.frombuffer(data[4:8], "<u4")[0] == 1
    assert np.frombuffer(data[8:12], "<u4")[0] == 1 and data[12:13] == b"w"
    assert np.frombuffer(data[13:25], "<u4").tolist() == [2, 1, 2]
    assert np.frombuffer(data[25:], "<f4").tolist() == [1.0, 2.0]


def test_checkpoint_rejects_other_versions():
    data = bytearray(checkpoint_bytes({"w": np.zeros(2)}))
    data[4:8] = (2).to_bytes(4, "little")
    with pytest.raises(CheckpointError):
        parse_checkpoint(bytes(data))
    with pytest.raises(CheckpointError):
        parse_checkpoint(b"NOPE" + bytes(8))
    with pytest.raises(CheckpointError):
        parse_checkpoint(checkpoint_bytes({"w": np.zeros(4)})[:-3])


def test_fused_checkpoint_restores_both_encoders():
    model = C2CModel(SMALL, modalities=("cough", "breath"), seed=1)
    back = C2CModel.from_state_dict(parse_checkpoint(checkpoint_bytes(model.state_dict())))
    assert back.modalities == ("cough", "breath")
    assert back.encoder_cfg == SMALL
