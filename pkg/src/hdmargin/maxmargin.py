"""Maximum-margin prototype training.

Minimizes the regularized hinge objective over the prototype pair,

    0.5/C * ||p_plus - p_minus||^2 + sum_i [1 - y_i <h_i, p_plus - p_minus>]_+

(optionally with the bracket squared), by batched gradient descent on both
prototypes. ``C = inf`` drops the regularizer, which reduces the hinge update
to summed mistake-driven retraining; the squared-hinge update with
``C = inf`` is the batch form of the margin-weighted baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .optim import adam_init, adam_step
from .prototypes import (COSINE, DOT, SIMILARITY_KINDS, DivergenceError,
                         PrototypePair, accuracy, init_prototypes, renormalize)

HINGE = "hinge"
SQUARED_HINGE = "squared_hinge"
LOSS_KINDS = (HINGE, SQUARED_HINGE)

SGD = "sgd"
ADAM = "adam"


@dataclass
class MarginConfig:
    """Training hyperparameters for the margin trainer."""

    C: float = 500.0
    lr: float = 1e-5
    batch_size: int = 1000
    epochs: int = 1
    loss: str = HINGE
    similarity: str = DOT
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive (inf allowed), got {self.C}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.similarity not in SIMILARITY_KINDS:
            raise ValueError(f"similarity must be one of {SIMILARITY_KINDS}, "
                             f"got {self.similarity!r}")


@dataclass
class ViolationSets:
    """Indices of margin violators (functional margin < 1), split by label."""

    plus: np.ndarray   # label +1 indices
    minus: np.ndarray  # label -1 indices


@dataclass
class LossReport:
    objective: float
    regularizer: float
    hinge_sum: float
    per_point_hinge: np.ndarray  # slack [1 - y <h, w>]_+ per point, unsquared


@dataclass
class TraceRecord:
    epoch: int
    objective: float
    regularizer: float
    hinge_sum: float
    train_acc: float
    test_acc: Optional[float] = None


def _inv_c(C: float) -> float:
    return 0.0 if math.isinf(C) else 1.0 / C


def violation_sets(proto: PrototypePair, encoded: np.ndarray,
                   labels: np.ndarray) -> ViolationSets:
    """Points that are misclassified or inside the unit margin, strictly."""
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels)
    gaps = 1.0 - labels * (encoded @ proto.w)
    violating = gaps > 0.0
    return ViolationSets(np.flatnonzero(violating & (labels > 0)),
                         np.flatnonzero(violating & (labels < 0)))


def objective(proto: PrototypePair, encoded: np.ndarray, labels: np.ndarray,
              C: float, loss: str = HINGE) -> LossReport:
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    w = proto.w
    slack = np.maximum(0.0, 1.0 - labels * (encoded @ w))
    reg = 0.5 * _inv_c(C) * float(np.dot(w, w))
    if loss == HINGE:
        loss_sum = float(np.sum(slack))
    elif loss == SQUARED_HINGE:
        loss_sum = float(np.sum(slack * slack))
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return LossReport(reg + loss_sum, reg, loss_sum, slack)


def gradients(proto: PrototypePair, encoded: np.ndarray, labels: np.ndarray,
              C: float, loss: str = HINGE):
    """(Sub)gradients of the objective w.r.t. both prototypes.

    The objective depends on the prototypes only through their difference, so
    the negative-prototype gradient is exactly the negation of the positive
    one. At the hinge kink (margin exactly 1) the zero subgradient is chosen:
    such points are excluded from the violation sets.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels)
    if len(encoded) == 0:
        raise ValueError("empty batch")
    sets = violation_sets(proto, encoded, labels)
    if loss == HINGE:
        pull_plus = encoded[sets.plus].sum(axis=0)
        pull_minus = encoded[sets.minus].sum(axis=0)
    elif loss == SQUARED_HINGE:
        gaps = 1.0 - labels * (encoded @ proto.w)
        weights = 2.0 * np.maximum(0.0, gaps)
        pull_plus = weights[sets.plus] @ encoded[sets.plus]
        pull_minus = weights[sets.minus] @ encoded[sets.minus]
    else:
        raise ValueError(f"unknown loss {loss!r}")
    data_term = pull_plus - pull_minus
    inv_c = _inv_c(C)
    if inv_c == 0.0:
        g_plus = -data_term
    else:
        g_plus = inv_c * (proto.p_plus - proto.p_minus) - data_term
    return g_plus, -g_plus


def train_step(proto: PrototypePair, encoded: np.ndarray, labels: np.ndarray,
               config: MarginConfig, opt: Optional[tuple] = None) -> PrototypePair:
    """One gradient step on a batch; mutates and returns ``proto``.

    In cosine-similarity mode the step is followed by the projection that
    rescales both prototypes to unit norm.
    """
    g_plus, g_minus = gradients(proto, encoded, labels, config.C, config.loss)
    if opt is None:
        proto.p_plus -= config.lr * g_plus
        proto.p_minus -= config.lr * g_minus
    else:
        state_plus, state_minus = opt
        proto.p_plus -= adam_step(state_plus, g_plus, config.lr)
        proto.p_minus -= adam_step(state_minus, g_minus, config.lr)
    if not (np.isfinite(proto.p_plus).all() and np.isfinite(proto.p_minus).all()):
        raise DivergenceError(
            f"non-finite prototype update (lr={config.lr}, C={config.C}); "
            "training aborted")
    if config.similarity == COSINE:
        renormalize(proto)
    return proto


def run_epoch(proto: PrototypePair, encoded: np.ndarray, labels: np.ndarray,
              config: MarginConfig, rng: np.random.Generator,
              opt: Optional[tuple] = None) -> None:
    """Shuffle once and apply ``train_step`` to consecutive batches."""
    order = rng.permutation(len(encoded))
    for start in range(0, len(order), config.batch_size):
        idx = order[start:start + config.batch_size]
        train_step(proto, encoded[idx], labels[idx], config, opt)


def fit(encoded: np.ndarray, labels: np.ndarray, config: MarginConfig,
        init: Optional[PrototypePair] = None,
        test_encoded: Optional[np.ndarray] = None,
        test_labels: Optional[np.ndarray] = None,
        optimizer: str = SGD):
    """Train prototypes by batched gradient descent.

    Starts from the class-mean prototypes unless ``init`` is given, shuffles
    with ``config.seed`` each epoch, and records the full-set objective and
    training accuracy per epoch. Returns ``(prototypes, trace)``.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels)
    proto = (init_prototypes(encoded, labels) if init is None else init).copy()
    if config.similarity == COSINE:
        renormalize(proto)
    rng = np.random.default_rng(config.seed)
    opt = None
    if optimizer == ADAM:
        opt = (adam_init(proto.dim), adam_init(proto.dim))
    elif optimizer != SGD:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    trace: list[TraceRecord] = []
    for epoch in range(1, config.epochs + 1):
        run_epoch(proto, encoded, labels, config, rng, opt)
        report = objective(proto, encoded, labels, config.C, config.loss)
        test_acc = None
        if test_encoded is not None:
            test_acc = accuracy(proto, test_encoded, test_labels, config.similarity)
        trace.append(TraceRecord(epoch, report.objective, report.regularizer,
                                 report.hinge_sum,
                                 accuracy(proto, encoded, labels, config.similarity),
                                 test_acc))
    return proto, trace
