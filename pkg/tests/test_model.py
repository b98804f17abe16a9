import numpy as np
import pytest

from advmask.errors import WeightFormatError
from advmask.image import Image
from advmask.model import (
    Model,
    DenseLayer,
    FlattenLayer,
    build_model,
    evaluate_accuracy,
    forward,
    input_gradient,
    kink_margin,
    load_weights,
    loss,
    save_weights,
    train,
)

TINY_ARCH = (
    ("conv", 4, 3, 1),
    ("relu",),
    ("maxpool", 2),
    ("flatten",),
    ("dense",),
)


def tiny_model(seed=0, size=8, classes=3):
    return build_model((size, size, 1), classes, architecture=TINY_ARCH, seed=seed)


def linear_softmax_model(nin=4, classes=3, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(0, 0.5, (nin, classes))
    b = rng.normal(0, 0.1, classes)
    side = int(np.sqrt(nin))
    return Model(
        [FlattenLayer(), DenseLayer(w, b)],
        input_shape=(side, side, 1),
        num_classes=classes,
    ), w, b


def rel_err(a, b, floor=1e-6):
    return abs(a - b) / max(abs(a), abs(b), floor)


# -- forward -----------------------------------------------------------------


def test_softmax_symmetric():
    model, w, b = linear_softmax_model(4, 2, seed=1)
    model.layers[1].weights[:] = 0.0
    model.layers[1].bias[:] = 0.0
    pred = forward(model, Image.from_array(np.full((2, 2), 0.5)))
    assert np.allclose(pred.probabilities, [0.5, 0.5])


def test_softmax_ln3():
    model, _, _ = linear_softmax_model(4, 2, seed=1)
    model.layers[1].weights[:] = 0.0
    model.layers[1].bias[:] = [np.log(3.0), 0.0]
    pred = forward(model, Image.from_array(np.zeros((2, 2))))
    assert pred.probabilities[0] == pytest.approx(0.75, abs=1e-12)
    assert pred.probabilities[1] == pytest.approx(0.25, abs=1e-12)
    assert pred.label == 0
    assert pred.certainty == pytest.approx(0.75, abs=1e-12)


def test_probabilities_sum_to_one(rng):
    m = tiny_model(seed=2)
    for _ in range(5):
        pred = forward(m, Image(rng.uniform(0, 1, (8, 8, 1))))
        assert abs(pred.probabilities.sum() - 1.0) <= 1e-9
        assert ((pred.probabilities >= 0) & (pred.probabilities <= 1)).all()


def test_softmax_shift_invariance(rng):
    m, _, _ = linear_softmax_model(9, 4, seed=3)
    img = Image(rng.uniform(0, 1, (3, 3, 1)))
    p1 = forward(m, img).probabilities
    m.layers[1].bias += 500.0  # shift all logits by a constant
    p2 = forward(m, img).probabilities
    assert np.abs(p1 - p2).max() <= 1e-12


def test_forward_shape_mismatch():
    m = tiny_model()
    with pytest.raises(ValueError):
        forward(m, Image.from_array(np.zeros((4, 4))))


def test_argmax_tie_lowest_index():
    m, _, _ = linear_softmax_model(4, 3, seed=0)
    m.layers[1].weights[:] = 0.0
    m.layers[1].bias[:] = 0.0
    assert forward(m, Image.from_array(np.zeros((2, 2)))).label == 0


# -- loss ----------------------------------------------------------------------


def test_loss_values(rng):
    m = tiny_model(seed=4)
    img = Image(rng.uniform(0, 1, (8, 8, 1)))
    pred = forward(m, img)
    for y in range(3):
        expected = -np.log(max(pred.probabilities[y], 1e-12))
        assert loss(m, img, y) == pytest.approx(expected, rel=1e-12)


def test_loss_label_out_of_range():
    m = tiny_model()
    img = Image.from_array(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        loss(m, img, 3)
    with pytest.raises(ValueError):
        loss(m, img, -1)


def test_loss_clamp_example():
    # p_y = 0.99 -> -ln 0.99
    m, _, _ = linear_softmax_model(4, 2)
    m.layers[1].weights[:] = 0.0
    m.layers[1].bias[:] = [np.log(99.0), 0.0]
    img = Image.from_array(np.zeros((2, 2)))
    assert loss(m, img, 0) == pytest.approx(-np.log(0.99), rel=1e-9)
    assert loss(m, img, 1) == pytest.approx(-np.log(0.01), rel=1e-9)


# -- input gradient ---------------------------------------------------------------


def test_gradient_closed_form_linear_softmax(rng):
    model, w, b = linear_softmax_model(9, 4, seed=5)
    img = Image(rng.uniform(0, 1, (3, 3, 1)))
    y = 2
    pred = forward(model, img)
    expected = (w @ (pred.probabilities - np.eye(4)[y])).reshape(3, 3, 1)
    got = input_gradient(model, img, y)
    assert np.abs(got - expected).max() <= 1e-12


def test_gradient_shape_matches_input(rng):
    m = tiny_model(seed=6)
    img = Image(rng.uniform(0, 1, (8, 8, 1)))
    assert input_gradient(m, img, 1).shape == (8, 8, 1)


def test_gradient_finite_differences(rng):
    m = tiny_model(seed=7)
    h = 1e-5
    worst = 0.0
    checked = 0
    while checked < 8:
        x = rng.uniform(0, 1, (8, 8, 1))
        img = Image(x)
        if kink_margin(m, img) < 1e-6:
            continue
        checked += 1
        y = int(rng.integers(0, 3))
        g = input_gradient(m, img, y)
        for _ in range(12):
            i, j = rng.integers(0, 8, 2)
            xp = x.copy(); xp[i, j, 0] += h
            xm = x.copy(); xm[i, j, 0] -= h
            fd = (loss(m, Image(np.clip(xp, 0, 1)), y)
                  - loss(m, Image(np.clip(xm, 0, 1)), y)) / (2 * h)
            worst = max(worst, rel_err(g[i, j, 0], fd))
    assert worst <= 1e-4


def test_localized_step_decreases_target_loss(rng):
    # one small masked step along -sign(grad) must reduce J(x, target)
    m = tiny_model(seed=8)
    eps = 1e-4
    decreases = 0
    trials = 200
    for _ in range(trials):
        x = rng.uniform(0.05, 0.95, (8, 8, 1))
        img = Image(x)
        y = int(rng.integers(0, 3))
        mask = (rng.random((8, 8, 1)) < 0.6).astype(float)
        g = input_gradient(m, img, y)
        if np.abs(g * mask).max() == 0.0:
            decreases += 1
            continue
        stepped = np.clip(x - eps * mask * np.sign(g), 0, 1)
        decreases += loss(m, Image(stepped), y) < loss(m, img, y)
    assert decreases >= 0.99 * trials


# -- training -----------------------------------------------------------------------


def _separable_toy(n=40, seed=0):
    rng = np.random.default_rng(seed)
    xs = np.zeros((n, 4, 4, 1))
    ys = np.zeros(n, dtype=np.int64)
    for i in range(n):
        label = i % 2
        base = rng.uniform(0.05, 0.25, (4, 4, 1))
        if label:
            base[:, 2:, 0] += 0.7  # bright right half
        else:
            base[:, :2, 0] += 0.7  # bright left half
        xs[i] = np.clip(base, 0, 1)
        ys[i] = label
    return xs, ys


TOY_ARCH = (("flatten",), ("dense",))


def test_train_separable_toy():
    xs, ys = _separable_toy()
    m = build_model((4, 4, 1), 2, architecture=TOY_ARCH, seed=0)
    trained = train(m, (xs, ys), epochs=50, learning_rate=0.5, seed=1)
    assert trained.metrics["train_accuracy"] >= 0.99


def test_train_zero_epochs_keeps_weights():
    xs, ys = _separable_toy()
    m = build_model((4, 4, 1), 2, architecture=TOY_ARCH, seed=0)
    before = m.layers[1].weights.copy()
    trained = train(m, (xs, ys), epochs=0, learning_rate=0.5, seed=1)
    assert np.array_equal(trained.layers[1].weights, before)
    assert np.array_equal(m.layers[1].weights, before)  # input untouched


def test_train_deterministic():
    xs, ys = _separable_toy()
    m = build_model((4, 4, 1), 2, architecture=TOY_ARCH, seed=0)
    t1 = train(m, (xs, ys), epochs=5, learning_rate=0.3, seed=9)
    t2 = train(m, (xs, ys), epochs=5, learning_rate=0.3, seed=9)
    assert np.array_equal(t1.layers[1].weights, t2.layers[1].weights)
    t3 = train(m, (xs, ys), epochs=5, learning_rate=0.3, seed=10)
    assert not np.array_equal(t1.layers[1].weights, t3.layers[1].weights)


def test_train_validates_dataset():
    m = build_model((4, 4, 1), 2, architecture=TOY_ARCH, seed=0)
    with pytest.raises(ValueError):
        train(m, [], epochs=1, learning_rate=0.1)
    xs, ys = _separable_toy()
    with pytest.raises(ValueError):
        train(m, (xs, ys + 5), epochs=1, learning_rate=0.1)


def test_train_accepts_image_pairs():
    xs, ys = _separable_toy(n=8)
    pairs = [(Image(x), int(y)) for x, y in zip(xs, ys)]
    m = build_model((4, 4, 1), 2, architecture=TOY_ARCH, seed=0)
    trained = train(m, pairs, epochs=2, learning_rate=0.3, seed=0)
    assert "train_accuracy" in trained.metrics


# -- weight files ----------------------------------------------------------------------


def test_weight_round_trip(tmp_path, rng):
    m = tiny_model(seed=11)
    path = tmp_path / "m.nnw"
    save_weights(m, path)
    again = load_weights(path)
    assert again.describe() == m.describe()
    img = Image(rng.uniform(0, 1, (8, 8, 1)))
    p1 = forward(m, img)
    p2 = forward(again, img)
    assert np.abs(p1.logits - p2.logits).max() <= 1e-6  # float32 storage


def test_weight_round_trip_architecture_stable(tmp_path):
    m = build_model((28, 28, 1), 10, seed=0)
    p1 = tmp_path / "a.nnw"
    p2 = tmp_path / "b.nnw"
    save_weights(m, p1)
    save_weights(load_weights(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_weight_bad_magic(tmp_path):
    path = tmp_path / "bad.nnw"
    path.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(WeightFormatError) as err:
        load_weights(path)
    assert "magic" in str(err.value)


def test_weight_truncated_blob(tmp_path):
    m = tiny_model(seed=12)
    path = tmp_path / "m.nnw"
    save_weights(m, path)
    buf = path.read_bytes()
    path.write_bytes(buf[:-8])
    with pytest.raises(WeightFormatError) as err:
        load_weights(path)
    msg = str(err.value)
    assert "expected" in msg and "got" in msg


def test_reference_architecture_description():
    m = build_model((28, 28, 1), 10, seed=0)
    text = m.describe()
    assert text.splitlines()[0] == "input 28 28 1"
    assert "dense 1568 10" in text
    assert text.splitlines()[-1] == "classes 10"


def test_reference_architecture_color_variant(tmp_path, rng):
    # the same layer stack accepts 32x32x3 input (dense 8*8*32 -> 10)
    m = build_model((32, 32, 3), 10, seed=2)
    assert "dense 2048 10" in m.describe()
    img = Image(rng.uniform(0, 1, (32, 32, 3)))
    pred = forward(m, img)
    assert abs(pred.probabilities.sum() - 1.0) <= 1e-9
    assert input_gradient(m, img, 4).shape == (32, 32, 3)
    path = tmp_path / "c.nnw"
    save_weights(m, path)
    again = load_weights(path)
    assert np.abs(forward(again, img).logits - pred.logits).max() <= 1e-6
