import math

import numpy as np
import pytest

from hdmargin.datasets import make_separable
from hdmargin.maxmargin import (HINGE, SQUARED_HINGE, LossReport, MarginConfig,
                                fit, gradients, objective, train_step,
                                violation_sets)
from hdmargin.prototypes import (DivergenceError, PrototypePair,
                                 init_prototypes, predict_binary)


def random_instance(rng, n=8, dim=6, away_from_kink=1e-3):
    """Random prototypes and points with no margin exactly at the hinge kink."""
    while True:
        encoded = rng.standard_normal((n, dim))
        labels = rng.choice([-1, 1], size=n)
        proto = PrototypePair(0.3 * rng.standard_normal(dim),
                              0.3 * rng.standard_normal(dim))
        gaps = 1.0 - labels * (encoded @ proto.w)
        if np.min(np.abs(gaps)) > away_from_kink:
            return proto, encoded, labels


def fd_gradients(proto, encoded, labels, C, loss, eps=1e-6):
    """Central finite differences of the objective, coordinate by coordinate."""

    def value(p_plus, p_minus):
        return objective(PrototypePair(p_plus, p_minus), encoded, labels,
                         C, loss).objective

    dim = proto.dim
    g_plus = np.zeros(dim)
    g_minus = np.zeros(dim)
    for i in range(dim):
        step = np.zeros(dim)
        step[i] = eps
        g_plus[i] = (value(proto.p_plus + step, proto.p_minus)
                     - value(proto.p_plus - step, proto.p_minus)) / (2 * eps)
        g_minus[i] = (value(proto.p_plus, proto.p_minus + step)
                      - value(proto.p_plus, proto.p_minus - step)) / (2 * eps)
    return g_plus, g_minus


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


class TestMarginConfig:
    def test_defaults_valid(self):
        cfg = MarginConfig()
        assert cfg.C == 500.0 and cfg.batch_size == 1000

    @pytest.mark.parametrize("kwargs", [
        {"C": 0.0}, {"C": -1.0}, {"lr": 0.0}, {"batch_size": 0},
        {"epochs": -1}, {"loss": "l2"}, {"similarity": "hamming"},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            MarginConfig(**kwargs)

    def test_infinite_c_allowed(self):
        assert math.isinf(MarginConfig(C=math.inf).C)


class TestViolationSets:
    def test_inside_margin_included(self):
        proto = PrototypePair(np.array([1.0]), np.array([0.0]))  # w = [1]
        sets = violation_sets(proto, np.array([[0.5]]), np.array([1]))
        assert list(sets.plus) == [0] and list(sets.minus) == []

    def test_beyond_margin_excluded(self):
        proto = PrototypePair(np.array([1.0]), np.array([0.0]))
        sets = violation_sets(proto, np.array([[1.5]]), np.array([1]))
        assert list(sets.plus) == [] and list(sets.minus) == []

    def test_boundary_is_strictly_excluded(self):
        # margin exactly 1: gap is 0, strict inequality keeps the point out
        proto = PrototypePair(np.array([1.0]), np.array([0.0]))
        sets = violation_sets(proto, np.array([[-1.0]]), np.array([-1]))
        assert list(sets.plus) == [] and list(sets.minus) == []

    def test_partition_by_label(self):
        rng = np.random.default_rng(0)
        proto, encoded, labels = random_instance(rng, n=20)
        sets = violation_sets(proto, encoded, labels)
        gaps = 1.0 - labels * (encoded @ proto.w)
        expected = set(np.flatnonzero(gaps > 0))
        assert set(sets.plus) | set(sets.minus) == expected
        assert set(sets.plus).isdisjoint(set(sets.minus))
        assert all(labels[i] == 1 for i in sets.plus)
        assert all(labels[j] == -1 for j in sets.minus)


class TestObjective:
    def test_identical_prototypes(self):
        proto = PrototypePair(np.ones(4), np.ones(4))
        report = objective(proto, np.random.default_rng(0).standard_normal((3, 4)),
                           np.array([1, -1, 1]), C=1.0)
        assert report.objective == pytest.approx(3.0)
        assert report.regularizer == 0.0

    def test_all_margins_satisfied(self):
        proto = PrototypePair(np.array([2.0]), np.array([0.0]))  # w = [2]
        encoded = np.array([[1.0], [-1.0]])
        labels = np.array([1, -1])
        report = objective(proto, encoded, labels, C=10.0)
        assert report.hinge_sum == 0.0
        assert report.objective == pytest.approx(0.5 / 10.0 * 4.0)

    @pytest.mark.parametrize("loss", [HINGE, SQUARED_HINGE])
    def test_matches_naive_summation(self, loss):
        rng = np.random.default_rng(1)
        proto, encoded, labels = random_instance(rng, n=6, dim=5)
        report = objective(proto, encoded, labels, C=3.0, loss=loss)
        w = proto.p_plus - proto.p_minus
        total = 0.5 / 3.0 * float(w @ w)
        for h, y in zip(encoded, labels):
            slack = max(0.0, 1.0 - y * float(h @ w))
            total += slack if loss == HINGE else slack ** 2
        assert abs(report.objective - total) <= 1e-12

    def test_report_identity(self):
        rng = np.random.default_rng(2)
        for loss in (HINGE, SQUARED_HINGE):
            proto, encoded, labels = random_instance(rng)
            report = objective(proto, encoded, labels, C=7.0, loss=loss)
            assert abs(report.objective - (report.regularizer + report.hinge_sum)) <= 1e-9
            assert (report.per_point_hinge >= 0.0).all()

    def test_violation_soundness(self):
        rng = np.random.default_rng(3)
        proto, encoded, labels = random_instance(rng, n=15)
        sets = violation_sets(proto, encoded, labels)
        report = objective(proto, encoded, labels, C=math.inf)
        members = set(sets.plus) | set(sets.minus)
        for i in range(len(encoded)):
            if i in members:
                # removing a violator strictly decreases the hinge sum
                assert report.per_point_hinge[i] > 0.0
                keep = [j for j in range(len(encoded)) if j != i]
                reduced = objective(proto, encoded[keep], labels[keep], C=math.inf)
                assert reduced.hinge_sum < report.hinge_sum
            else:
                # excluded points contribute exactly zero
                assert report.per_point_hinge[i] == 0.0


class TestGradients:
    def test_no_violations_no_regularizer(self):
        proto = PrototypePair(np.array([2.0]), np.array([0.0]))
        g_plus, g_minus = gradients(proto, np.array([[1.0], [-1.0]]),
                                    np.array([1, -1]), C=math.inf)
        assert np.array_equal(g_plus, np.zeros(1))
        assert np.array_equal(g_minus, np.zeros(1))

    def test_single_violating_point_literal_form(self):
        # one misclassified positive point with no regularizer: the gradient
        # pulls p_plus toward it and pushes p_minus away, exactly
        h = np.array([0.2, -0.4, 1.0])
        proto = PrototypePair(np.zeros(3), np.zeros(3))
        g_plus, g_minus = gradients(proto, h[None, :], np.array([1]), C=math.inf)
        assert np.array_equal(g_plus, -h)
        assert np.array_equal(g_minus, h)

    def test_antisymmetry_is_exact(self):
        rng = np.random.default_rng(4)
        for loss in (HINGE, SQUARED_HINGE):
            proto, encoded, labels = random_instance(rng)
            g_plus, g_minus = gradients(proto, encoded, labels, C=5.0, loss=loss)
            assert np.array_equal(g_minus, -g_plus)

    @pytest.mark.parametrize("loss", [HINGE, SQUARED_HINGE])
    def test_matches_finite_differences(self, loss):
        rng = np.random.default_rng(5)
        for _ in range(10):
            proto, encoded, labels = random_instance(rng)
            g_plus, g_minus = gradients(proto, encoded, labels, C=10.0, loss=loss)
            fd_plus, fd_minus = fd_gradients(proto, encoded, labels, 10.0, loss)
            assert rel_error(g_plus, fd_plus) <= 1e-5
            assert rel_error(g_minus, fd_minus) <= 1e-5

    def test_infinite_c_leaves_only_data_sums(self):
        rng = np.random.default_rng(6)
        proto, encoded, labels = random_instance(rng, n=12)
        sets = violation_sets(proto, encoded, labels)
        g_plus, _ = gradients(proto, encoded, labels, C=math.inf)
        expected = -(encoded[sets.plus].sum(axis=0)
                     - encoded[sets.minus].sum(axis=0))
        assert np.array_equal(g_plus, expected)

    def test_empty_batch_rejected(self):
        proto = PrototypePair(np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            gradients(proto, np.empty((0, 2)), np.array([]), C=1.0)


def perceptron_style_batch(rng, n=10, dim=5):
    """Batch whose margin violators are all strictly misclassified."""
    proto = PrototypePair(rng.standard_normal(dim), rng.standard_normal(dim))
    w = proto.w
    encoded = []
    labels = []
    for _ in range(n):
        y = int(rng.choice([-1, 1]))
        while True:
            h = rng.standard_normal(dim)
            m = y * float(h @ w)
            if m < -1e-6:
                break  # misclassified
            if m > 1e-6:
                h = h * (1.5 / m)  # push beyond the unit margin
                break
        encoded.append(h)
        labels.append(y)
    return proto, np.array(encoded), np.array(labels)


class TestTrainStep:
    def test_zero_gradient_is_identity(self):
        proto = PrototypePair(np.array([2.0]), np.array([0.0]))
        cfg = MarginConfig(C=math.inf, lr=0.1, batch_size=2, epochs=1)
        before_plus = proto.p_plus.copy()
        train_step(proto, np.array([[1.0], [-1.0]]), np.array([1, -1]), cfg)
        assert np.array_equal(proto.p_plus, before_plus)

    def test_equals_summed_perceptron_updates(self):
        # with no regularizer and only misclassified violators, one step is
        # exactly the aggregated mistake-driven update with the same rate
        rng = np.random.default_rng(7)
        for _ in range(20):
            proto, encoded, labels = perceptron_style_batch(rng)
            assert np.array_equal(
                predict_binary(proto, encoded) != labels,
                1.0 - labels * (encoded @ proto.w) > 0)
            lr = 0.01
            sets = violation_sets(proto, encoded, labels)
            pull_plus = encoded[sets.plus].sum(axis=0)
            pull_minus = encoded[sets.minus].sum(axis=0)
            expected_plus = proto.p_plus + lr * (pull_plus - pull_minus)
            expected_minus = proto.p_minus - lr * (pull_plus - pull_minus)
            cfg = MarginConfig(C=math.inf, lr=lr, batch_size=len(encoded))
            train_step(proto, encoded, labels, cfg)
            assert proto.p_plus.tobytes() == expected_plus.tobytes()
            assert proto.p_minus.tobytes() == expected_minus.tobytes()

    def test_objective_non_increasing_with_small_step(self):
        rng = np.random.default_rng(8)
        encoded = rng.standard_normal((20, 8))
        labels = rng.choice([-1, 1], size=20)
        proto = init_prototypes(encoded, labels)
        cfg = MarginConfig(C=10.0, lr=1e-3, batch_size=20)
        values = [objective(proto, encoded, labels, cfg.C).objective]
        for _ in range(100):
            train_step(proto, encoded, labels, cfg)
            values.append(objective(proto, encoded, labels, cfg.C).objective)
        diffs = np.diff(values)
        assert (diffs <= 1e-9).all()

    def test_non_finite_update_aborts(self):
        # two violating points whose summed pull overflows to infinity
        proto = PrototypePair(np.zeros(2), np.zeros(2))
        cfg = MarginConfig(C=math.inf, lr=1.0, batch_size=2)
        huge = np.array([[1e308, 1e308], [1e308, 1e308]])
        with np.errstate(over="ignore"), pytest.raises(DivergenceError):
            train_step(proto, huge, np.array([1, 1]), cfg)

    def test_cosine_mode_keeps_equal_norms(self):
        rng = np.random.default_rng(9)
        encoded = rng.standard_normal((12, 6))
        labels = rng.choice([-1, 1], size=12)
        proto = init_prototypes(encoded, labels)
        cfg = MarginConfig(C=5.0, lr=0.05, batch_size=12, similarity="cosine")
        for _ in range(10):
            train_step(proto, encoded, labels, cfg)
            n_plus = np.linalg.norm(proto.p_plus)
            n_minus = np.linalg.norm(proto.p_minus)
            assert abs(n_plus - n_minus) <= 1e-9


class TestFit:
    def test_reaches_full_accuracy_on_separable_set(self):
        ls = make_separable(25, 12, margin=3.0, seed=1)
        cfg = MarginConfig(C=500.0, lr=5e-3, batch_size=50, epochs=60, seed=3)
        proto, trace = fit(ls.points, ls.labels, cfg)
        assert trace[-1].train_acc == 1.0

    def test_zero_epochs_returns_init_unchanged(self):
        rng = np.random.default_rng(10)
        encoded = rng.standard_normal((10, 4))
        labels = np.array([1, -1] * 5)
        init = init_prototypes(encoded, labels)
        cfg = MarginConfig(epochs=0)
        proto, trace = fit(encoded, labels, cfg, init=init)
        assert trace == []
        assert np.array_equal(proto.p_plus, init.p_plus)
        assert proto is not init  # caller's prototypes are not aliased

    def test_identical_seed_identical_trace(self):
        rng = np.random.default_rng(11)
        encoded = rng.standard_normal((30, 5))
        labels = rng.choice([-1, 1], size=30)
        cfg = MarginConfig(C=20.0, lr=1e-2, batch_size=8, epochs=5, seed=12)
        proto_a, trace_a = fit(encoded, labels, cfg)
        proto_b, trace_b = fit(encoded, labels, cfg)
        assert trace_a == trace_b
        assert proto_a.p_plus.tobytes() == proto_b.p_plus.tobytes()

    def test_trace_records_test_accuracy(self):
        rng = np.random.default_rng(12)
        encoded = rng.standard_normal((20, 4))
        labels = rng.choice([-1, 1], size=20)
        cfg = MarginConfig(C=10.0, lr=1e-2, batch_size=10, epochs=3)
        _, trace = fit(encoded, labels, cfg, test_encoded=encoded,
                       test_labels=labels)
        assert [t.epoch for t in trace] == [1, 2, 3]
        for record in trace:
            assert record.test_acc is not None
            assert 0.0 <= record.train_acc <= 1.0

    def test_adam_option_runs(self):
        rng = np.random.default_rng(13)
        encoded = rng.standard_normal((20, 4))
        labels = rng.choice([-1, 1], size=20)
        cfg = MarginConfig(C=10.0, lr=1e-2, batch_size=20, epochs=20)
        proto, trace = fit(encoded, labels, cfg, optimizer="adam")
        assert np.isfinite(proto.p_plus).all()
        assert len(trace) == 20
