import math

import numpy as np
import pytest
from sklearn.base import clone

from signkit import nn
from signkit.features import PoseFeaturizer, flip_horizontal
from signkit.models import (
    Adam,
    BiLstmClassifier,
    BiLstmConfig,
    EmptyDataset,
    PredictionOutcome,
    TrainConfig,
    TransformerCtcClassifier,
    TransformerCtcConfig,
    _batches,
    adam_step,
    build_bilstm_model,
    build_transformer_ctc_model,
    evaluate,
    history_to_ndjson,
    load_model,
    model_from_bytes,
    pad_batch,
    train,
)
from signkit.synthetic import SynthesisConfig, generate_dataset, signer_disjoint_split

TINY_LSTM = dict(projection_dim=16, lstm_hidden=8, lstm_layers=1, dropout=0.0)
TINY_TF = dict(d_model=16, heads=2, blocks=1, ff_dim=16, dropout=0.0)


@pytest.fixture(scope="module")
def small_data():
    return generate_dataset(SynthesisConfig(classes=3, samples_per_class=8, signers=4, seed=3))


def separable_arrays(seed=0, n=8, F=6):
    """Two classes whose every frame sits at +1 or -1 in all features, plus noise."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = [np.where(label, -1.0, 1.0) + 0.3 * rng.normal(size=(int(rng.integers(3, 7)), F)) for label in y]
    return X, y


# --------------------------------------------------------------------------- #
# architecture


def test_bilstm_parameter_count_default_config():
    net = build_bilstm_model(BiLstmConfig(input_dim=294, classes=10), nn.make_rng(0))
    bn = 2 * 294
    proj = 294 * 512 + 512
    lstm_dir = 4 * 256 * 512 + 4 * 256 * 256 + 4 * 256  # both layers see 512 inputs
    head = 512 * 10 + 10
    assert net.params.count() == bn + proj + 2 * 2 * lstm_dir + head == 3306582


def test_transformer_parameter_count_defaults():
    net = build_transformer_ctc_model(TransformerCtcConfig(input_dim=294, classes=10), nn.make_rng(0))
    proj = 294 * 128 + 128
    attn = 4 * (128 * 128 + 128)
    ff = (128 * 256 + 256) + (256 * 128 + 128)
    norms = 4 * 128
    head = 128 * 11 + 11
    assert net.params.count() == proj + 2 * (attn + ff + norms) + head == 304139


def test_forward_shapes():
    rng = np.random.default_rng(0)
    x, lengths = pad_batch([rng.normal(size=(t, 5)) for t in (4, 2, 3)])
    lstm = build_bilstm_model(BiLstmConfig(5, 4, 6, 3, 2), nn.make_rng(0))
    assert lstm.forward(x, lengths)[0].shape == (3, 4)
    tf = build_transformer_ctc_model(TransformerCtcConfig(5, 4, 8, 2, 1, 8), nn.make_rng(0))
    logp = tf.forward(x, lengths)[0]
    assert logp.shape == (3, 4, 5)
    np.testing.assert_allclose(np.logaddexp.reduce(logp, axis=-1), 0.0, atol=1e-9)


def test_builds_are_deterministic():
    a = build_bilstm_model(BiLstmConfig(5, 3, 6, 4), nn.make_rng(9))
    b = build_bilstm_model(BiLstmConfig(5, 3, 6, 4), nn.make_rng(9))
    assert nn.dump_checkpoint(a.params.state()) == nn.dump_checkpoint(b.params.state())


def test_forget_bias_and_init_bounds():
    net = build_bilstm_model(BiLstmConfig(10, 3, 6, 4, 2), nn.make_rng(0))
    np.testing.assert_array_equal(net.params["bilstm.0.fwd.b"], [0] * 4 + [1] * 4 + [0] * 8)
    assert np.abs(net.params["bilstm.0.fwd.w_ih"]).max() <= 1 / math.sqrt(6)
    assert np.abs(net.params["bilstm.1.bwd.w_ih"]).max() <= 1 / math.sqrt(8)
    assert np.abs(net.params["proj.w"]).max() <= 1 / math.sqrt(10)


def test_zero_block_transformer_is_framewise():
    tf = build_transformer_ctc_model(TransformerCtcConfig(4, 3, 8, 2, 0, 8), nn.make_rng(1))
    x = np.random.default_rng(1).normal(size=(1, 5, 4))
    base = tf.forward(x, [5])[0]
    x2 = x.copy()
    x2[0, 2] += 1.0
    moved = tf.forward(x2, [5])[0]
    changed = np.any(base != moved, axis=-1)[0]
    np.testing.assert_array_equal(changed, [False, False, True, False, False])
    ps = tf.params
    expected = nn.log_softmax((x @ ps["proj.w"].T + ps["proj.b"] + nn.positional_encoding(5, 8))
                              @ ps["head.w"].T + ps["head.b"])
    np.testing.assert_allclose(base, expected, atol=1e-12)


def test_config_invariants():
    with pytest.raises(ValueError):
        BiLstmConfig(0, 3)
    with pytest.raises(ValueError):
        BiLstmConfig(3, 3, dropout=1.0)
    with pytest.raises(nn.IndivisibleHeads):
        TransformerCtcConfig(3, 3, d_model=10, heads=4)


def test_shape_mismatch_at_forward():
    net = build_bilstm_model(BiLstmConfig(5, 3, 6, 4), nn.make_rng(0))
    with pytest.raises(nn.ShapeMismatch):
        net.forward(np.zeros((2, 3, 4)), [3, 3])


# --------------------------------------------------------------------------- #
# optimizer


def _scalar_params(value=0.0):
    ps = nn.ParameterSet()
    ps.add("w", np.array([value]))
    return ps


def test_adam_first_step():
    ps = _scalar_params()
    ps.grads["w"][:] = 1.0
    opt = Adam()
    adam_step(ps, opt)
    assert ps["w"][0] == pytest.approx(-1e-3 / (1 + 1e-8), rel=1e-12)
    assert opt.t == 1


def test_adam_zero_gradient():
    ps = _scalar_params(0.5)
    opt = Adam()
    opt.step(ps)
    assert ps["w"][0] == 0.5
    ps.grads["w"][:] = 2.0
    opt.step(ps)
    m, v = opt.m["w"].copy(), opt.v["w"].copy()
    ps.grads["w"][:] = 0.0
    opt.step(ps)
    np.testing.assert_allclose(opt.m["w"], 0.9 * m)
    np.testing.assert_allclose(opt.v["w"], 0.999 * v)


def test_adam_deterministic_ten_steps():
    def run():
        rng = np.random.default_rng(0)
        ps = nn.ParameterSet()
        ps.add("a", rng.normal(size=(3, 2)))
        opt = Adam()
        for _ in range(10):
            ps.grads["a"][:] = rng.normal(size=(3, 2))
            opt.step(ps)
        return ps["a"].tobytes()

    assert run() == run()


# --------------------------------------------------------------------------- #
# training


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(flip_mode="sometimes")
    X, y = separable_arrays()
    with pytest.raises(ValueError):
        BiLstmClassifier(epochs=0, **TINY_LSTM).fit(X, y)


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        BiLstmClassifier(**TINY_LSTM).fit([], [])
    with pytest.raises(EmptyDataset):
        train(BiLstmClassifier(**TINY_LSTM), [], TrainConfig())


def test_trailing_single_batch_is_merged():
    sizes = [len(b) for b in _batches(np.arange(9), 4)]
    assert sizes == [4, 5]
    assert [len(b) for b in _batches(np.arange(8), 4)] == [4, 4]


@pytest.mark.parametrize("cls, kw", [(BiLstmClassifier, TINY_LSTM), (TransformerCtcClassifier, TINY_TF)])
def test_overfits_separable_set(cls, kw):
    X, y = separable_arrays()
    model = cls(batch_size=8, epochs=50, learning_rate=1e-2, **kw).fit(X, y)
    assert model.score(X, y) == 1.0
    assert [r["epoch"] for r in model.history_] == list(range(1, 51))


def test_epoch_one_loss_near_log_c():
    rng = np.random.default_rng(0)
    X = [rng.normal(size=(5, 12)) for _ in range(40)]
    y = np.arange(40) % 10
    model = BiLstmClassifier(projection_dim=32, lstm_hidden=16, batch_size=40, epochs=1).fit(X, y)
    assert abs(model.history_[0]["loss"] - math.log(10)) < 0.1 * math.log(10)


@pytest.mark.parametrize("kind", ["bilstm", "transformer"])
def test_single_batch_overfit(small_data, kind):
    batch = small_data[::3][:8]
    feats = PoseFeaturizer().fit([s.pose for s in batch]).transform([s.pose for s in batch])
    x, lengths = pad_batch(feats)
    labels = np.array([s.label for s in batch])
    if kind == "bilstm":
        net = build_bilstm_model(BiLstmConfig(x.shape[2], 3, 32, 16, 2, dropout=0.0), nn.make_rng(0))
    else:
        net = build_transformer_ctc_model(TransformerCtcConfig(x.shape[2], 3, 16, 2, 1, 32, 0.0), nn.make_rng(0))
    opt = Adam(lr=3e-3)
    rng = nn.make_rng(0, 2)
    for step in range(500):
        loss, _ = net.loss_and_grad(x, lengths, labels, train=True, rng=rng)
        if loss < 0.01:
            break
        opt.step(net.params)
    assert loss < 0.01


def test_fit_is_deterministic(small_data):
    X = [s.pose for s in small_data]
    y = [s.label for s in small_data]

    def run():
        m = BiLstmClassifier(batch_size=8, epochs=2, flip_mode="all", random_state=5, **TINY_LSTM)
        m.fit(X, y, eval_set=(X[:6], y[:6]))
        return m.to_bytes(), history_to_ndjson(m.history_)

    a, b = run(), run()
    assert a == b
    assert a[1].count("\n") == 4


def test_functional_train_and_history(small_data):
    tr, va = signer_disjoint_split(small_data, 0.75, 0)
    model = TransformerCtcClassifier(**TINY_TF)
    hist = train(model, tr, TrainConfig(batch_size=8, epochs=2, seed=1), eval_set=va)
    assert [(r["epoch"], r["split"]) for r in hist] == [
        (1, "train"), (1, "validation"), (2, "train"), (2, "validation")
    ]
    assert all(set(r) == {"epoch", "split", "loss", "accuracy"} for r in hist)


# --------------------------------------------------------------------------- #
# evaluation and persistence


class AlwaysZero(BiLstmClassifier):
    def predict_details(self, X):
        return [(0, False) for _ in X]


def test_always_zero_balanced_accuracy():
    data = generate_dataset(SynthesisConfig(classes=4, samples_per_class=3, signers=2, seed=0))
    acc, outcomes = evaluate(AlwaysZero(), data)
    assert acc == 0.25
    assert len(outcomes) == len(data)
    assert [o.sample_id for o in outcomes] == [s.sample_id for s in data]
    assert all(o.correct == (o.predicted_label == o.true_label) for o in outcomes)


def test_evaluate_is_pure(small_data):
    X = [s.pose for s in small_data]
    y = [s.label for s in small_data]
    model = BiLstmClassifier(batch_size=8, epochs=1, **TINY_LSTM).fit(X, y)
    before = model.to_bytes()
    a = evaluate(model, small_data)
    b = evaluate(model, small_data)
    assert a == b
    assert model.to_bytes() == before


def test_reject_is_never_correct():
    o = PredictionOutcome("x", 2, None, False, 1.0)
    assert o.rejected and not o.correct


@pytest.mark.parametrize("cls, kw", [(BiLstmClassifier, TINY_LSTM), (TransformerCtcClassifier, TINY_TF)])
def test_save_load_roundtrip(tmp_path, small_data, cls, kw):
    X = [s.pose for s in small_data]
    y = [s.label for s in small_data]
    model = cls(batch_size=8, epochs=1, flip_mode="detected_left", **kw).fit(X, y)
    model.save(tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert type(back) is cls
    assert back.to_bytes() == model.to_bytes()
    np.testing.assert_array_equal(back.predict(X), model.predict(X))
    assert model_from_bytes(model.to_bytes()).get_params()["flip_mode"] == "detected_left"


def test_predict_shape_mismatch():
    X, y = separable_arrays()
    model = BiLstmClassifier(batch_size=8, epochs=1, **TINY_LSTM).fit(X, y)
    with pytest.raises(nn.ShapeMismatch, match=r"\(T, 6\)"):
        model.predict([np.zeros((3, 5))])


def test_sklearn_clone():
    m = TransformerCtcClassifier(d_model=32, heads=4)
    c = clone(m)
    assert c.get_params() == m.get_params()


def test_flip_consistency_with_flip_training():
    data = generate_dataset(SynthesisConfig(classes=4, samples_per_class=250, signers=6, seed=11))
    tr, va = signer_disjoint_split(data, 0.5, 0)
    assert len(va) >= 500
    model = BiLstmClassifier(projection_dim=32, lstm_hidden=16, lstm_layers=1, batch_size=32,
                             epochs=15, flip_mode="all", random_state=0)
    model.fit([s.pose for s in tr], [s.label for s in tr])
    yv = [s.label for s in va]
    plain = model.score([s.pose for s in va], yv)
    mirrored = model.score([flip_horizontal(s.pose) for s in va], yv)
    assert abs(plain - mirrored) <= 0.02
    assert plain > 0.9
