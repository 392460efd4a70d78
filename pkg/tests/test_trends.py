"""Desk-scale training-behavior checks on the bundled handwritten digits.

The primary benchmark datasets are not downloadable in offline CI, so these
tests exercise the full multi-run protocol on the small real dataset that
ships with scikit-learn. They pin the robust relationships at this scale:
the margin trainer beats the mistake-driven baseline, and every method
trains to a sensible accuracy end to end. The dataset-specific acceptance
criteria run in test_acceptance.py when the real data is present.
"""

import numpy as np
import pytest

from hdmargin.datasets import preprocess
from hdmargin.harness import ExperimentConfig, train_one_run


def mean_final(data, method, lr, seeds=3, epochs=40, dim=256):
    finals = []
    for seed in range(seeds):
        cfg = ExperimentConfig(dataset="digits", data_dir="-", method=method,
                               dim=dim, lr=lr, epochs=epochs, batch_size=200,
                               runs=1, seed=seed)
        record, _ = train_one_run(cfg, data, 0)
        finals.append(record.final_test_acc)
    return float(np.mean(finals)), finals


@pytest.fixture(scope="module")
def digits(digits_dataset):
    return preprocess(digits_dataset)


def test_margin_trainer_beats_mistake_driven_baseline(digits):
    mm_mean, mm_finals = mean_final(digits, "mm-hdc", lr=1e-2)
    perc_mean, perc_finals = mean_final(digits, "perceptron", lr=1e-3)
    assert mm_mean >= perc_mean + 0.005, (mm_finals, perc_finals)
    assert mm_mean >= 0.95


def test_all_methods_train_to_reasonable_accuracy(digits):
    for method, lr in (("perceptron", 1e-3), ("onlinehd", 1e-3),
                       ("svm", 1e-3)):
        mean, finals = mean_final(digits, method, lr=lr, seeds=2, epochs=30)
        assert mean >= 0.9, (method, finals)


def test_margin_trainer_is_stable_over_training(digits):
    # the margin trainer's final accuracy stays near its per-run peak
    for seed in range(3):
        cfg = ExperimentConfig(dataset="digits", data_dir="-",
                               method="mm-hdc", dim=256, lr=1e-2, epochs=40,
                               batch_size=200, runs=1, seed=seed)
        record, _ = train_one_run(cfg, digits, 0)
        accs = [e.test_acc for e in record.records]
        assert max(accs) - accs[-1] <= 0.01
