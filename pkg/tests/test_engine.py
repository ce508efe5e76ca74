"""Tape correctness: forward values, loss, reverse-mode gradients, Adam."""

import math

import mpmath
import numpy as np
import pytest

from sgnn import engine
from sgnn.errors import GraphValidationError, NumericFault
from sgnn.graph import build_graph
from sgnn.model import (
    GCNModel,
    OptimizerState,
    forward,
    init_model,
    optimizer_step,
    predict_logits,
)
from sgnn.rng import Rng


def _random_instance(rng, n=10, d=5, h=4, c=3, edge_prob=0.3):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < edge_prob
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    g = build_graph(edges, rng.normal(size=(n, d)), rng.integers(0, c, n),
                    (np.arange(n // 2), [], np.arange(n // 2, n)),
                    num_classes=c)
    model = init_model(d, h, c, Rng(int(rng.integers(1, 2**31))))
    return g, model


def _loss_value(model, g, mask):
    logits = predict_logits(model, g.normalized, g.features)
    idx = np.flatnonzero(mask)
    rows = logits[idx]
    shifted = rows - rows.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return float((lse - shifted[np.arange(len(idx)), g.labels[idx]]).mean())


def _tape_gradients(model, g, mask):
    logits, params = forward(model, g.normalized, g.features)
    loss = engine.masked_cross_entropy(logits, g.labels, mask)
    loss.backward()
    return float(loss.value), {k: v.grad for k, v in params.items()}


def _fd_gradient(model, g, mask, name, h=1e-5):
    p = model.params()[name]
    out = np.zeros_like(p)
    it = np.nditer(p, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = p[i]
        p[i] = old + h
        up = _loss_value(model, g, mask)
        p[i] = old - h
        down = _loss_value(model, g, mask)
        p[i] = old
        out[i] = (up - down) / (2 * h)
    return out


class TestForward:
    def test_zero_weights_zero_logits(self):
        rng = np.random.default_rng(0)
        g, model = _random_instance(rng)
        model.W1[:] = 0.0
        model.W2[:] = 0.0
        logits, _ = forward(model, g.normalized, g.features)
        assert np.all(logits.value == 0.0)

    def test_single_node_projects_features(self):
        g = build_graph([], np.array([[1.5, -2.0]]), [0], ([0], [], []),
                        num_classes=2)
        model = GCNModel(W1=np.eye(2), b1=np.zeros(2),
                         W2=np.array([[2.0, 0.0], [0.0, 1.0]]), b2=np.zeros(2))
        logits, _ = forward(model, g.normalized, g.features)
        # relu clips the negative channel before the second projection
        assert logits.value.tolist() == [[3.0, 0.0]]

    def test_matches_dense_replay(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            g, model = _random_instance(rng, n=12)
            logits, _ = forward(model, g.normalized, g.features)
            a = g.normalized.matrix.toarray()
            h = np.maximum(a @ (g.features @ model.W1) + model.b1, 0.0)
            expected = a @ (h @ model.W2) + model.b2
            np.testing.assert_allclose(logits.value, expected, rtol=1e-10)

    def test_tape_and_plain_forward_agree(self):
        rng = np.random.default_rng(4)
        g, model = _random_instance(rng)
        logits, _ = forward(model, g.normalized, g.features)
        assert np.array_equal(logits.value,
                              predict_logits(model, g.normalized, g.features))

    def test_nonfinite_features_fault(self):
        rng = np.random.default_rng(5)
        g, model = _random_instance(rng)
        x = g.features.copy()
        x[0, 0] = 1e308
        model.W1[:] = 1e308
        with pytest.raises(NumericFault):
            forward(model, g.normalized, x)


class TestMaskedCrossEntropy:
    def test_uniform_logits_ln_c(self):
        for c in (2, 5, 9):
            logits = engine.Var(np.zeros((4, c)))
            labels = np.array([0, 1, 2 % c, c - 1])
            loss = engine.masked_cross_entropy(logits, labels,
                                               np.ones(4, dtype=bool))
            assert abs(float(loss.value) - math.log(c)) < 1e-12

    def test_confident_correct_goes_to_zero(self):
        logits = engine.Var(np.array([[100.0, 0.0], [0.0, 100.0]]))
        loss = engine.masked_cross_entropy(logits, np.array([0, 1]),
                                           np.ones(2, dtype=bool))
        assert float(loss.value) < 1e-12

    def test_empty_mask_raises(self):
        logits = engine.Var(np.zeros((3, 2)))
        with pytest.raises(GraphValidationError):
            engine.masked_cross_entropy(logits, np.zeros(3, dtype=int),
                                        np.zeros(3, dtype=bool))

    def test_matches_high_precision_oracle(self):
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(5, 4)) * 3
        labels = rng.integers(0, 4, 5)
        mask = np.array([True, True, False, True, True])
        loss = engine.masked_cross_entropy(engine.Var(logits), labels, mask)

        with mpmath.workdps(60):
            total = mpmath.mpf(0)
            for i in np.flatnonzero(mask):
                denom = mpmath.fsum(mpmath.e**mpmath.mpf(v) for v in logits[i])
                p = mpmath.e**mpmath.mpf(logits[i, labels[i]]) / denom
                total += -mpmath.log(p)
            expected = float(total / int(mask.sum()))
        assert abs(float(loss.value) - expected) < 1e-12

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        rows = engine.softmax_rows(rng.normal(size=(50, 7)) * 20)
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, rtol=0, atol=1e-12)


class TestBackward:
    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(8)
        for trial in range(20):
            n = int(rng.integers(5, 21))
            g, model = _random_instance(rng, n=n)
            mask = g.train_mask
            _, grads = _tape_gradients(model, g, mask)
            for name in ("W1", "b1", "W2", "b2"):
                fd = _fd_gradient(model, g, mask, name)
                scale = max(np.abs(fd).max(), np.abs(grads[name]).max(), 1e-8)
                rel = np.abs(grads[name] - fd).max() / scale
                assert rel < 1e-4, (trial, name, rel)

    def test_masked_out_rows_decouple(self):
        # gradient flowing to the loss only via masked rows: a node with no
        # path into the mask contributes nothing
        g = build_graph([], np.eye(3), [0, 1, 0], ([0, 1], [], [2]),
                        num_classes=2)
        model = init_model(3, 4, 2, Rng(2))
        logits, params = forward(model, g.normalized, g.features)
        loss = engine.masked_cross_entropy(logits, g.labels, g.train_mask)
        loss.backward()
        # isolated node 2 is not in the mask; its feature row is e_2, so the
        # third row of W1 receives zero gradient
        assert np.allclose(params["W1"].grad[2], 0.0)
        assert not np.allclose(params["W1"].grad[:2], 0.0)

    def test_quadratic_fd_convergence(self):
        # central differences converge at order ~2: halving h quarters the error
        rng = np.random.default_rng(9)
        g, model = _random_instance(rng, n=8)
        mask = g.train_mask
        _, grads = _tape_gradients(model, g, mask)
        i = (0, 0)
        p = model.W1
        errors = []
        for h in (1e-2, 5e-3, 2.5e-3):
            old = p[i]
            p[i] = old + h
            up = _loss_value(model, g, mask)
            p[i] = old - h
            down = _loss_value(model, g, mask)
            p[i] = old
            errors.append(abs((up - down) / (2 * h) - grads["W1"][i]))
        slopes = [math.log(errors[k] / errors[k + 1]) / math.log(2)
                  for k in range(2)]
        assert all(1.7 < s < 2.3 for s in slopes), (errors, slopes)

    def test_backward_requires_scalar(self):
        v = engine.Var(np.ones((2, 2)))
        with pytest.raises(GraphValidationError):
            v.backward()


class TestOptimizer:
    def test_zero_gradient_no_move(self):
        model = init_model(3, 4, 2, Rng(1))
        before = {k: v.copy() for k, v in model.params().items()}
        state = OptimizerState(lr=0.1, weight_decay=0.0)
        zeros = {k: np.zeros_like(v) for k, v in model.params().items()}
        optimizer_step(model, zeros, state)
        for k, v in model.params().items():
            assert np.array_equal(v, before[k])

    def test_first_step_matches_hand_computation(self):
        model = GCNModel(W1=np.full((1, 1), 2.0), b1=np.zeros(1),
                         W2=np.ones((1, 1)), b2=np.zeros(1))
        state = OptimizerState(lr=0.05, weight_decay=0.0)
        grads = {"W1": np.array([[0.3]])}
        optimizer_step(model, grads, state)
        # bias-corrected m_hat = g, v_hat = g^2, so the step is
        # lr * g / (|g| + eps) ~= lr * sign(g)
        expected = 2.0 - 0.05 * 0.3 / (math.sqrt(0.3 ** 2) + 1e-8)
        assert abs(model.W1[0, 0] - expected) < 1e-15

    def test_weight_decay_only_on_w1(self):
        model = GCNModel(W1=np.full((1, 1), 1.0), b1=np.zeros(1),
                         W2=np.full((1, 1), 1.0), b2=np.zeros(1))
        state = OptimizerState(lr=0.1, weight_decay=0.5)
        zeros = {k: np.zeros_like(v) for k, v in model.params().items()}
        optimizer_step(model, zeros, state)
        assert model.W1[0, 0] != 1.0   # decay acts through the gradient
        assert model.W2[0, 0] == 1.0

    def test_shape_mismatch(self):
        model = init_model(2, 3, 2, Rng(4))
        state = OptimizerState()
        with pytest.raises(GraphValidationError):
            optimizer_step(model, {"W1": np.zeros((1, 1))}, state)

    def test_two_runs_bitwise_identical(self):
        def run():
            rng = np.random.default_rng(10)
            g, _ = _random_instance(rng, n=12)
            model = init_model(g.feature_dim, 4, g.num_classes, Rng(7))
            state = OptimizerState(lr=0.01, weight_decay=5e-4)
            for _ in range(25):
                _, grads = _tape_gradients(model, g, g.train_mask)
                optimizer_step(model, grads, state)
            return model

        a, b = run(), run()
        for k in a.params():
            assert np.array_equal(a.params()[k], b.params()[k])


class TestInitModel:
    def test_glorot_bounds_and_determinism(self):
        a = init_model(30, 16, 7, Rng(5))
        b = init_model(30, 16, 7, Rng(5))
        assert np.array_equal(a.W1, b.W1) and np.array_equal(a.W2, b.W2)
        limit1 = math.sqrt(6.0 / (30 + 16))
        assert np.abs(a.W1).max() <= limit1
        assert np.all(a.b1 == 0.0) and np.all(a.b2 == 0.0)
