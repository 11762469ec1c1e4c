import json

import numpy as np
import pytest

from cakenet.dataset import (
    Dataset,
    NormalizationStats,
    default_design,
    denormalize_target,
    fit_normalizer,
    generate_synthetic,
    ground_truth,
    normalize,
    normalize_features,
)
from cakenet.errors import (
    BadArchitecture,
    CorruptModel,
    DimensionMismatch,
    EmptyBatch,
    InvalidConfig,
    NonFiniteLoss,
    SchemaVersionMismatch,
)
from cakenet.mlp import (
    MlpModel,
    TrainConfig,
    forward,
    gradients,
    init_model,
    load_model,
    predict,
    save_model,
    train,
)
from cakenet.pipeline import PipelineConfig, run_training

import oracles
from cases import ACTS, check_gradient_case, gradient_case, random_model


def linear_data(n=30, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 7))
    y = x @ rng.normal(size=7) + 0.3
    x = (x - x.mean(0)) / x.std(0)
    y = (y - y.mean()) / y.std()
    return Dataset(x, y, normalized=True)


# --- init ----------------------------------------------------------------------

def test_init_deterministic():
    a = init_model((7, 8, 1), "tanh", seed=4)
    b = init_model((7, 8, 1), "tanh", seed=4)
    c = init_model((7, 8, 1), "tanh", seed=5)
    assert a.same_parameters(b)
    assert not a.same_parameters(c)


def test_init_shapes_and_glorot_bounds():
    m = init_model((7, 8, 1), "sigmoid", seed=0)
    assert [w.shape for w in m.weights] == [(8, 7), (1, 8)]
    assert [b.shape for b in m.biases] == [(8,), (1,)]
    assert all(np.all(b == 0) for b in m.biases)
    assert np.abs(m.weights[0]).max() <= np.sqrt(6 / 15)
    assert np.abs(m.weights[1]).max() <= np.sqrt(6 / 9)
    assert m.layer_sizes == (7, 8, 1)


def test_init_linear_model_allowed():
    m = init_model((7, 1), seed=0)
    assert m.layer_sizes == (7, 1)


@pytest.mark.parametrize("sizes", [(6, 1), (7, 2), (7,), (7, 0, 1), (7, 3.5, 1)])
def test_init_bad_architecture(sizes):
    with pytest.raises(BadArchitecture):
        init_model(sizes, seed=0)


def test_bad_activation():
    with pytest.raises(BadArchitecture):
        init_model((7, 3, 1), "softsign", seed=0)


def test_model_rejects_inconsistent_shapes():
    with pytest.raises(BadArchitecture):
        MlpModel([np.zeros((3, 7)), np.zeros((1, 4))], [np.zeros(3), np.zeros(1)])
    with pytest.raises(BadArchitecture):
        MlpModel([np.zeros((3, 7)), np.zeros((1, 3))], [np.zeros(2), np.zeros(1)])
    with pytest.raises(BadArchitecture):
        MlpModel([np.full((1, 7), np.nan)], [np.zeros(1)])


def test_model_is_immutable():
    m = init_model(seed=0)
    with pytest.raises(ValueError):
        m.weights[0][0, 0] = 1.0


# --- forward -------------------------------------------------------------------

def test_forward_zero_network_is_zero():
    m = MlpModel([np.zeros((5, 7)), np.zeros((1, 5))], [np.zeros(5), np.zeros(1)], "sigmoid")
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(10, 7)):
        assert forward(m, x) == 0.0


def test_forward_linear_is_affine():
    rng = np.random.default_rng(1)
    w, b = rng.normal(size=(1, 7)), rng.normal(size=1)
    m = MlpModel([w], [b])
    for x in rng.normal(size=(10, 7)):
        assert forward(m, x) == pytest.approx(float(w[0] @ x + b[0]), abs=1e-14)


@pytest.mark.parametrize("activation", ACTS)
def test_forward_matches_loop_oracle(activation):
    rng = np.random.default_rng(2)
    for widths in ([7, 5, 1], [7, 4, 3, 1], [7, 1], [7, 6, 6, 2, 1]):
        m = random_model(rng, widths, activation)
        xs = rng.normal(size=(20, 7))
        batch = forward(m, xs)
        for x, got in zip(xs, batch):
            want = oracles.loop_forward(m.weights, m.biases, activation, x)
            assert got == pytest.approx(want, abs=1e-12)
            assert forward(m, x) == pytest.approx(want, abs=1e-12)


def test_forward_dimension_mismatch():
    m = init_model(seed=0)
    with pytest.raises(DimensionMismatch):
        forward(m, np.zeros(6))


def test_sigmoid_is_overflow_safe():
    m = MlpModel([np.full((1, 7), 200.0), np.ones((1, 1))], [np.zeros(1), np.zeros(1)], "sigmoid")
    with np.errstate(over="raise", invalid="raise"):
        assert forward(m, np.full(7, -5.0)) == 0.0
        assert forward(m, np.full(7, 5.0)) == 1.0


# --- gradients -----------------------------------------------------------------

def test_gradients_match_finite_differences_small_sample():
    rng = np.random.default_rng(7)
    for case in range(15):
        m, x, y = gradient_case(rng, case)
        assert check_gradient_case(m, x, y) <= 1e-4


def test_gradients_loss_value():
    rng = np.random.default_rng(8)
    m, x, y = gradient_case(rng, 1)
    want = oracles.loop_loss(m.weights, m.biases, m.hidden_activation, x, y)
    assert gradients(m, x, y).loss == pytest.approx(want, rel=1e-12)


def test_gradients_zero_at_interpolation():
    rng = np.random.default_rng(9)
    m = random_model(rng, [7, 4, 1], "tanh")
    x = rng.normal(size=(6, 7))
    g = gradients(m, x, forward(m, x))
    assert g.loss == 0.0
    assert all(np.all(a == 0) for a in g.weights + g.biases)


def test_gradients_duplicated_batch_identical():
    rng = np.random.default_rng(10)
    m = random_model(rng, [7, 5, 1], "sigmoid")
    x = rng.normal(size=(5, 7))
    y = rng.normal(size=5)
    g1 = gradients(m, x, y)
    g2 = gradients(m, np.vstack([x, x]), np.r_[y, y])
    for a, b in zip(g1.weights + g1.biases, g2.weights + g2.biases):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_gradients_empty_batch():
    with pytest.raises(EmptyBatch):
        gradients(init_model(seed=0), np.zeros((0, 7)), np.zeros(0))


# --- training ------------------------------------------------------------------

def test_train_zero_learning_rate_keeps_weights():
    m = init_model(seed=3)
    trained, history = train(m, linear_data(), TrainConfig(learning_rate=0.0, epochs=5))
    assert trained.same_parameters(m)
    assert history.epochs == 5


def test_train_linear_loss_non_increasing():
    m = init_model((7, 1), seed=0)
    _, history = train(m, linear_data(), TrainConfig(learning_rate=0.01, momentum=0.0, epochs=200))
    losses = np.array(history.train_loss)
    assert np.all(np.diff(losses) <= 0)


def test_train_linear_default_config_converges():
    ds = linear_data(seed=4)
    trained, history = train(init_model((7, 1), seed=1), ds, TrainConfig())
    assert history.epochs == TrainConfig().epochs
    assert history.train_loss[-1] < 1e-6
    assert oracles.least_squares_mse(ds.features, ds.target) < 1e-20


def test_train_deterministic():
    ds = linear_data()
    cfg = TrainConfig(epochs=20, batch_size=7, seed=5)
    a, ha = train(init_model(seed=2), ds, cfg)
    b, hb = train(init_model(seed=2), ds, cfg)
    assert a.same_parameters(b)
    assert ha.train_loss == hb.train_loss
    assert save_model(a) == save_model(b)


def test_train_minibatch_and_no_shuffle():
    ds = linear_data()
    cfg = TrainConfig(epochs=50, batch_size=4, shuffle_each_epoch=False, learning_rate=0.005)
    _, history = train(init_model((7, 1), seed=0), ds, cfg)
    assert history.train_loss[-1] < history.train_loss[0]


def test_train_divergence_raises():
    with pytest.raises(NonFiniteLoss) as info:
        train(init_model(seed=0), linear_data(), TrainConfig(learning_rate=1e3, epochs=200))
    assert info.value.epoch >= 1


def test_train_requires_normalized_data():
    raw = generate_synthetic(default_design())
    with pytest.raises(DimensionMismatch):
        train(init_model(seed=0), raw, TrainConfig(epochs=1))


def test_early_stopping_restores_best():
    ds = linear_data(n=40, seed=1)
    noisy = Dataset(ds.features, ds.target + np.random.default_rng(0).normal(0, 1.0, 40), normalized=True)
    val = linear_data(n=20, seed=2)
    cfg = TrainConfig(epochs=3000, early_stop_patience=10, learning_rate=0.05)
    model, history = train(init_model((7, 30, 1), seed=0), noisy, cfg, validation=val)
    assert history.epochs < 3000
    assert len(history.val_loss) == history.epochs
    best = min(history.val_loss)
    assert history.val_loss[history.best_epoch - 1] == best
    got = float(np.mean((forward(model, val.features) - val.target) ** 2))
    assert got == pytest.approx(best, rel=1e-12)


@pytest.mark.parametrize("bad", [
    dict(learning_rate=-1.0), dict(momentum=1.0), dict(epochs=0),
    dict(batch_size=0), dict(init_scheme="he"), dict(early_stop_patience=0), dict(seed=-3),
])
def test_train_config_validation(bad):
    with pytest.raises(InvalidConfig):
        TrainConfig(**bad)


def test_train_config_dict_roundtrip():
    cfg = TrainConfig(batch_size=None, epochs=12)
    assert cfg.to_dict()["batch_size"] == "full"
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(InvalidConfig):
        TrainConfig.from_dict({"learnin_rate": 0.1})


def test_history_csv():
    _, history = train(init_model(seed=0), linear_data(), TrainConfig(epochs=3))
    lines = history.to_csv().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss"
    assert len(lines) == 4


# --- predict -------------------------------------------------------------------

def _stats():
    return fit_normalizer(generate_synthetic(default_design(seed=1)))


def test_predict_is_composition():
    rng = np.random.default_rng(11)
    stats = _stats()
    m = random_model(rng, [7, 6, 1], "tanh", stats=stats)
    raw = generate_synthetic(default_design()).features[:10]
    for x in raw:
        want = denormalize_target(forward(m, normalize_features(x, stats)), stats)
        assert predict(m, x) == want
    np.testing.assert_allclose(predict(m, raw), [predict(m, x) for x in raw], rtol=1e-14)


def test_predict_zero_model_gives_target_mean():
    stats = _stats()
    m = MlpModel([np.zeros((4, 7)), np.zeros((1, 4))], [np.zeros(4), np.zeros(1)], "tanh", stats)
    for x in generate_synthetic(default_design()).features[::17]:
        assert predict(m, x) == stats.target_mean


def test_predict_requires_stats_and_nondegenerate_target():
    with pytest.raises(DimensionMismatch):
        predict(init_model(seed=0), np.zeros(7))
    flat = NormalizationStats([0.0] * 7, [1.0] * 7, 0.2, 0.0)
    from cakenet.errors import DegenerateTarget
    with pytest.raises(DegenerateTarget):
        predict(init_model(seed=0, norm_stats=flat), np.ones(7))


def test_predict_after_noiseless_training_tracks_ground_truth():
    ds = generate_synthetic(default_design(noise_std=0.0))
    stats = fit_normalizer(ds)
    cfg = TrainConfig(epochs=5000)
    model, _ = train(init_model(seed=0, norm_stats=stats), normalize(ds, stats), cfg)
    err = np.abs(predict(model, ds.features) - ground_truth(ds.features))
    assert err.max() <= 0.005


def test_prediction_invariant_to_feature_rescaling():
    ds = generate_synthetic(default_design(seed=3))
    j = 0  # temperature
    for c in (3.7, 1e-3, 250.0):
        x = np.array(ds.features)
        x[:, j] *= c
        scaled = Dataset(x, ds.target, "synthetic")
        cfg = PipelineConfig(seed=3)
        base = run_training(ds, cfg)
        other = run_training(scaled, cfg)
        p1 = predict(base.model, base.test_set.features)
        p2 = predict(other.model, other.test_set.features)
        np.testing.assert_allclose(p2, p1, atol=1e-9)


# --- persistence ---------------------------------------------------------------

@pytest.mark.parametrize("activation", ACTS)
def test_save_load_bit_exact(activation):
    rng = np.random.default_rng(12)
    m = random_model(rng, [7, 9, 3, 1], activation, scale=np.pi, stats=_stats())
    again = load_model(save_model(m))
    assert again.same_parameters(m)
    assert again.norm_stats == m.norm_stats
    xs = rng.normal(size=(100, 7))
    np.testing.assert_array_equal(forward(again, xs), forward(m, xs))


def test_save_is_versioned_json():
    payload = json.loads(save_model(init_model(seed=0)))
    assert payload["version"] == "1"
    assert payload["layer_sizes"] == [7, 10, 1]
    assert payload["hidden_activation"] == "tanh"
    assert payload["output_activation"] == "identity"
    assert payload["norm_stats"] is None
    assert len(payload["weights"][0]) == 10 and len(payload["weights"][0][0]) == 7


def test_load_truncated_is_corrupt():
    text = save_model(init_model(seed=0, norm_stats=_stats()))
    with pytest.raises(CorruptModel):
        load_model(text[: len(text) // 2])


def test_load_version_mismatch():
    payload = json.loads(save_model(init_model(seed=0)))
    payload["version"] = "2"
    with pytest.raises(SchemaVersionMismatch):
        load_model(json.dumps(payload))


@pytest.mark.parametrize("mutate", [
    lambda p: p.pop("weights"),
    lambda p: p.update(layer_sizes=[7, 9, 1]),
    lambda p: p.update(hidden_activation="swish"),
    lambda p: p.update(format="other"),
    lambda p: p["weights"][0].pop(),
])
def test_load_malformed(mutate):
    payload = json.loads(save_model(init_model(seed=0)))
    mutate(payload)
    with pytest.raises((CorruptModel, BadArchitecture)):
        load_model(json.dumps(payload))
