"""GRU cell/classifier oracles, BPTT gradient checks, training behavior.

Frozen scalar oracle (H = D = 1, all weights 1, biases 0, x = 1,
h_prev = 0.5):

    z = r = sigmoid(1.5)        = 0.8175744761936437
    c = tanh(1 + r * 0.5)       = 0.8872363204513926
    h = (1 - z) * 0.5 + z * c   = 0.8165945318562012

and an untrained uniform 4-class model has cross-entropy ln 4 =
1.3862943611198906 on any batch.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adlisten.dialogue import DegreeDistribution
from adlisten.errors import (
    EmptyBatch,
    EmptyDataset,
    EmptySequence,
    FormatVersionMismatch,
    ShapeMismatch,
)
from adlisten.gru import (
    BiGRUClassifier,
    GRUCellParams,
    InputScaler,
    TrainConfig,
    accuracy,
    bigru_forward,
    classify,
    clip_gradients,
    gru_step,
    init_cell,
    init_classifier,
    load_model,
    loss_and_gradients,
    predict_proba,
    save_model,
    train,
    zero_grads,
)


def scalar_cell(weight=1.0):
    w = np.full((1, 1), weight)
    return GRUCellParams(
        wz=w.copy(), uz=w.copy(), bz=np.zeros(1),
        wr=w.copy(), ur=w.copy(), br=np.zeros(1),
        wh=w.copy(), uh=w.copy(), bh=np.zeros(1),
    )


def zeroed(model):
    for p in model.parameters().values():
        p[:] = 0.0
    return model


def manual_unroll(cell, xs):
    """Independent recurrence: plain loops, no shared helpers."""
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    h = np.zeros(cell.hidden_dim)
    states = []
    for x in xs:
        z = sig(cell.wz @ x + cell.uz @ h + cell.bz)
        r = sig(cell.wr @ x + cell.ur @ h + cell.br)
        c = np.tanh(cell.wh @ x + cell.uh @ (r * h) + cell.bh)
        h = (1.0 - z) * h + z * c
        states.append(h)
    return np.array(states)


class TestCellOracles:
    def test_frozen_scalar_step(self):
        h = gru_step(scalar_cell(), np.array([1.0]), np.array([0.5]))
        z = 1.0 / (1.0 + math.exp(-1.5))
        c = math.tanh(1.0 + z * 0.5)
        expected = (1.0 - z) * 0.5 + z * c
        assert z == pytest.approx(0.8175744761936437, abs=1e-15)
        assert c == pytest.approx(0.8872363204513926, abs=1e-15)
        assert h[0] == pytest.approx(expected, abs=1e-12)
        assert h[0] == pytest.approx(0.8165945318562012, abs=1e-12)

    def test_zero_weights_halve_state(self):
        # z = sigmoid(0) = 1/2 and c = 0, so h = h_prev / 2
        h = gru_step(scalar_cell(0.0), np.array([3.0]), np.array([0.8]))
        assert h[0] == pytest.approx(0.4, abs=1e-15)

    def test_zero_input_zero_state_is_fixed(self):
        h = gru_step(scalar_cell(), np.array([0.0]), np.array([0.0]))
        assert h[0] == 0.0

    def test_shape_checks(self):
        with pytest.raises(ShapeMismatch):
            gru_step(scalar_cell(), np.array([1.0, 2.0]), np.array([0.5]))
        with pytest.raises(ShapeMismatch):
            gru_step(scalar_cell(), np.array([1.0]), np.array([0.5, 0.5]))

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_state_stays_bounded(self, seed):
        # h is a convex mix of h_prev and tanh output, so the sup norm
        # never grows past max(1, |h_prev|_inf)
        rng = np.random.Generator(np.random.PCG64(seed))
        cell = init_cell(2, 3, rng)
        x = rng.uniform(-5.0, 5.0, size=2)
        h_prev = rng.uniform(-3.0, 3.0, size=3)
        h = gru_step(cell, x, h_prev)
        bound = max(1.0, float(np.abs(h_prev).max()))
        assert np.all(np.abs(h) <= bound + 1e-12)


class TestForwardOracles:
    def test_hand_unrolled_three_steps(self):
        model = init_classifier(2, 3, num_classes=4, seed=42)
        xs = np.array([[0.1, -0.2], [0.4, 0.3], [-0.5, 0.2]])
        fwd = manual_unroll(model.forward_cell, xs)
        bwd = manual_unroll(model.backward_cell, xs[::-1])
        expected = np.concatenate([fwd, bwd[::-1]], axis=1)
        out = bigru_forward(model, xs)
        assert out.shape == (3, 6)
        assert np.allclose(out, expected, atol=1e-12)

        pooled = np.concatenate([fwd[-1], bwd[-1]])
        logits = model.head_w @ pooled + model.head_b
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        assert np.allclose(predict_proba(model, xs), probs, atol=1e-12)

    def test_scaler_applied_before_recurrence(self):
        base = init_classifier(2, 3, seed=5)
        scaled = BiGRUClassifier(
            forward_cell=base.forward_cell,
            backward_cell=base.backward_cell,
            head_w=base.head_w,
            head_b=base.head_b,
            scaler=InputScaler(mu=np.array([1.0, -1.0]), sd=np.array([2.0, 0.5])),
        )
        xs = np.array([[3.0, 0.0], [1.0, -1.0]])
        manual = (xs - np.array([1.0, -1.0])) / np.array([2.0, 0.5])
        assert np.allclose(
            predict_proba(scaled, xs), predict_proba(base, manual), atol=1e-12
        )

    def test_one_dim_sequence_promoted(self):
        model = init_classifier(1, 2, seed=0)
        flat = predict_proba(model, np.array([0.1, 0.2, 0.3]))
        cols = predict_proba(model, np.array([[0.1], [0.2], [0.3]]))
        assert np.allclose(flat, cols, atol=1e-15)

    @given(
        st.integers(min_value=0, max_value=2**32 - 1),
        st.integers(min_value=1, max_value=5),
    )
    def test_probabilities_normalized(self, seed, steps):
        rng = np.random.Generator(np.random.PCG64(seed))
        model = init_classifier(3, 4, seed=seed % 100)
        xs = rng.standard_normal((steps, 3))
        probs = predict_proba(model, xs)
        assert probs.shape == (4,)
        assert np.all(probs >= 0.0)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_classify_requires_four_classes(self):
        model = init_classifier(2, 3, num_classes=2, seed=0)
        with pytest.raises(ShapeMismatch):
            classify(model, np.array([[0.1, 0.2]]))

    def test_classify_zero_model_is_uniform(self):
        model = zeroed(init_classifier(2, 3, seed=0))
        dist = classify(model, np.array([[0.3, -0.4], [0.1, 0.2]]))
        assert isinstance(dist, DegreeDistribution)
        assert dist.p == (0.25, 0.25, 0.25, 0.25)

    def test_empty_sequence_rejected(self):
        model = init_classifier(2, 3, seed=0)
        with pytest.raises(EmptySequence):
            predict_proba(model, np.zeros((0, 2)))

    def test_wrong_input_dim_rejected(self):
        model = init_classifier(2, 3, seed=0)
        with pytest.raises(ShapeMismatch):
            predict_proba(model, np.zeros((3, 5)))


class TestLossAndGradients:
    def test_uniform_model_loss_is_ln4(self):
        model = zeroed(init_classifier(3, 4, seed=0))
        rng = np.random.Generator(np.random.PCG64(1))
        batch = [(rng.standard_normal((4, 3)), k % 4) for k in range(5)]
        loss, grads = loss_and_gradients(model, batch)
        assert loss == pytest.approx(math.log(4.0), abs=1e-9)
        assert loss == pytest.approx(1.3862943611198906, abs=1e-9)
        # no signal reaches the recurrence through an all-zero head
        assert np.all(grads["fwd.wz"] == 0.0)
        assert np.any(grads["head.b"] != 0.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_finite_difference_gradients(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        model = init_classifier(3, 4, num_classes=4, seed=seed)
        batch = [
            (rng.standard_normal((5, 3)), int(rng.integers(4))),
            (rng.standard_normal((3, 3)), int(rng.integers(4))),
        ]
        _, grads = loss_and_gradients(model, batch)
        params = model.parameters()
        eps = 1e-5
        worst_rel = 0.0
        worst_abs = 0.0
        for name, p in params.items():
            flat = p.reshape(-1)
            an = grads[name].reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up, _ = loss_and_gradients(model, batch)
                flat[i] = orig - eps
                down, _ = loss_and_gradients(model, batch)
                flat[i] = orig
                fd = (up - down) / (2.0 * eps)
                diff = abs(fd - an[i])
                worst_abs = max(worst_abs, diff)
                if diff >= 1e-9:
                    # the relative metric only means something once the
                    # disagreement clears finite-difference roundoff
                    rel = diff / max(1e-8, abs(fd) + abs(an[i]))
                    worst_rel = max(worst_rel, rel)
        assert worst_rel < 1e-4
        assert worst_abs < 1e-7

    def test_empty_batch(self):
        with pytest.raises(EmptyBatch):
            loss_and_gradients(init_classifier(2, 2, seed=0), [])

    def test_label_out_of_range(self):
        model = init_classifier(2, 2, num_classes=2, seed=0)
        with pytest.raises(ValueError):
            loss_and_gradients(model, [(np.zeros((2, 2)), 2)])

    def test_zero_grads_cover_all_parameters(self):
        model = init_classifier(2, 3, seed=0)
        grads = zero_grads(model)
        assert set(grads) == set(model.parameters())
        assert all(np.all(g == 0.0) for g in grads.values())


class TestClipping:
    def test_below_threshold_untouched(self):
        grads = {"a": np.array([3.0, 4.0])}
        assert clip_gradients(grads, 5.0) == 5.0
        assert grads["a"].tolist() == [3.0, 4.0]

    def test_above_threshold_scaled(self):
        grads = {"a": np.array([6.0, 8.0])}
        assert clip_gradients(grads, 5.0) == 10.0
        assert np.allclose(grads["a"], [3.0, 4.0], atol=1e-12)

    def test_global_norm_across_tensors(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        total = clip_gradients(grads, 2.5)
        assert total == 5.0
        assert np.sqrt(sum((g**2).sum() for g in grads.values())) == pytest.approx(2.5)


class TestTraining:
    def make_dataset(self):
        rng = np.random.Generator(np.random.PCG64(7))
        data = []
        for _ in range(10):
            data.append((rng.standard_normal((6, 2)) * 0.1 + [0.8, -0.8], 0))
            data.append((rng.standard_normal((6, 2)) * 0.1 + [-0.8, 0.8], 1))
        return data

    def test_learns_separable_toy(self):
        data = self.make_dataset()
        model = init_classifier(2, 5, num_classes=2, seed=1)
        history = train(
            model,
            data,
            TrainConfig(learning_rate=0.15, epochs=200, batch_size=8, seed=3),
        )
        assert len(history) == 200
        assert history[-1] < history[0]
        assert history[-1] < 0.1
        assert accuracy(model, data) == 1.0

    def test_training_is_deterministic(self):
        data = self.make_dataset()
        cfg = TrainConfig(learning_rate=0.1, epochs=5, batch_size=4, seed=9)
        m1 = init_classifier(2, 3, num_classes=2, seed=2)
        m2 = init_classifier(2, 3, num_classes=2, seed=2)
        h1 = train(m1, data, cfg)
        h2 = train(m2, data, cfg)
        assert h1 == h2
        for name, p in m1.parameters().items():
            assert np.array_equal(p, m2.parameters()[name])

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            train(init_classifier(2, 2, seed=0), [], TrainConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-0.1)


class TestInitAndScaler:
    def test_init_range_and_determinism(self):
        a = init_classifier(3, 4, seed=11)
        b = init_classifier(3, 4, seed=11)
        c = init_classifier(3, 4, seed=12)
        some_different = False
        for name, p in a.parameters().items():
            assert np.all(np.abs(p) <= 0.08)
            assert np.array_equal(p, b.parameters()[name])
            some_different = some_different or not np.array_equal(
                p, c.parameters()[name]
            )
        assert some_different
        assert a.meta["seed"] == 11

    def test_scaler_fit(self):
        rows = np.array([[1.0, 10.0], [3.0, 10.0], [5.0, 10.0]])
        scaler = InputScaler.fit(rows)
        out = scaler.apply(rows)
        assert np.allclose(out.mean(axis=0), 0.0, atol=1e-12)
        # constant column: sd floored, output exactly zero
        assert np.all(out[:, 1] == 0.0)
        assert np.allclose(out[:, 0].std(), 1.0, atol=1e-12)

    def test_scaler_identity(self):
        scaler = InputScaler.identity(3)
        rows = np.array([[1.0, 2.0, 3.0]])
        assert np.array_equal(scaler.apply(rows), rows)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rows = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
        model = init_classifier(2, 3, seed=4, scaler=InputScaler.fit(rows))
        model.meta["note"] = "probe"
        path = str(tmp_path / "model.npz")
        save_model(model, path)
        loaded = load_model(path)
        for name, p in model.parameters().items():
            assert np.array_equal(p, loaded.parameters()[name])
        assert np.array_equal(loaded.scaler.mu, model.scaler.mu)
        assert np.array_equal(loaded.scaler.sd, model.scaler.sd)
        assert loaded.meta == {"seed": 4, "note": "probe"}
        xs = np.array([[0.5, -0.5], [1.5, 2.5]])
        assert np.array_equal(predict_proba(model, xs), predict_proba(loaded, xs))

    def test_round_trip_without_scaler(self, tmp_path):
        model = init_classifier(2, 2, seed=1)
        path = str(tmp_path / "m.npz")
        save_model(model, path)
        assert load_model(path).scaler is None

    def test_missing_header(self, tmp_path):
        path = str(tmp_path / "bad.npz")
        np.savez(path, a=np.zeros(3))
        with pytest.raises(FormatVersionMismatch):
            load_model(path)

    def test_wrong_kind(self, tmp_path):
        import json

        path = str(tmp_path / "bad.npz")
        np.savez(path, __meta__=json.dumps({"format_version": 1, "kind": "linear"}))
        with pytest.raises(FormatVersionMismatch):
            load_model(path)

    def test_class_count_check(self, tmp_path):
        model = init_classifier(2, 2, num_classes=4, seed=0)
        path = str(tmp_path / "m.npz")
        save_model(model, path)
        with pytest.raises(FormatVersionMismatch):
            load_model(path, expect_classes=2)
        assert load_model(path, expect_classes=4).num_classes == 4

    def test_not_an_archive(self, tmp_path):
        path = tmp_path / "m.npz"
        path.write_bytes(b"plain text, not a zip")
        with pytest.raises(FormatVersionMismatch):
            load_model(str(path))
