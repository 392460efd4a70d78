"""Class prototypes: construction, similarity, decision rule, baseline retraining.

A binary classifier is a pair of prototype hypervectors; the decision compares
similarities against both. With dot-product similarity the rule is equivalent
to ``sign(<h, p_plus - p_minus>)``, i.e. a zero-bias linear classifier whose
weight vector is the prototype difference.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

DOT = "dot"
COSINE = "cosine"
SIMILARITY_KINDS = (DOT, COSINE)

_NORM_EPS = 1e-12


class DivergenceError(RuntimeError):
    """Raised when a training update produces non-finite prototype entries."""


@dataclass
class LabeledSet:
    """Points with binary labels in {-1, +1}."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 2 or len(self.points) == 0:
            raise ValueError("points must be a nonempty 2-D array")
        if self.labels.shape != (len(self.points),):
            raise ValueError("labels must be one per point")
        if not np.isin(self.labels, (-1, 1)).all():
            raise ValueError("labels must be -1 or +1")


class PrototypePair:
    """The two class prototypes; their difference is the separating hyperplane."""

    __slots__ = ("p_plus", "p_minus")

    def __init__(self, p_plus: np.ndarray, p_minus: np.ndarray):
        p_plus = np.asarray(p_plus, dtype=np.float64)
        p_minus = np.asarray(p_minus, dtype=np.float64)
        if p_plus.ndim != 1 or p_plus.shape != p_minus.shape:
            raise ValueError("prototypes must be 1-D vectors of equal length")
        self.p_plus = p_plus
        self.p_minus = p_minus

    @property
    def dim(self) -> int:
        return self.p_plus.shape[0]

    @property
    def w(self) -> np.ndarray:
        """Separating hyperplane: difference of the prototypes."""
        return self.p_plus - self.p_minus

    def copy(self) -> "PrototypePair":
        return PrototypePair(self.p_plus.copy(), self.p_minus.copy())


def init_prototypes(encoded: np.ndarray, labels: np.ndarray) -> PrototypePair:
    """Bundle each class into its prototype as the mean of its hypervectors."""
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels > 0
    neg = labels < 0
    if not pos.any() or not neg.any():
        raise ValueError("both classes must be present to initialize prototypes")
    return PrototypePair(encoded[pos].mean(axis=0), encoded[neg].mean(axis=0))


def similarity(a: np.ndarray, b: np.ndarray, kind: str = DOT) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if kind == DOT:
        return float(np.dot(a, b))
    if kind == COSINE:
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na <= _NORM_EPS or nb <= _NORM_EPS:
            return 0.0
        return float(np.dot(a, b)) / (na * nb)
    raise ValueError(f"unknown similarity kind {kind!r}")


def _similarities(proto: PrototypePair, h: np.ndarray, kind: str):
    """Similarity of h (single vector or rows) against both prototypes."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != proto.dim:
        raise ValueError(f"expected hypervectors of length {proto.dim}, "
                         f"got shape {h.shape}")
    s_plus = h @ proto.p_plus
    s_minus = h @ proto.p_minus
    if kind == COSINE:
        n_plus = float(np.linalg.norm(proto.p_plus))
        n_minus = float(np.linalg.norm(proto.p_minus))
        nh = np.linalg.norm(h, axis=-1)
        nh = np.where(nh > _NORM_EPS, nh, 1.0)
        s_plus = s_plus / (nh * n_plus) if n_plus > _NORM_EPS else np.zeros_like(s_plus)
        s_minus = s_minus / (nh * n_minus) if n_minus > _NORM_EPS else np.zeros_like(s_minus)
    elif kind != DOT:
        raise ValueError(f"unknown similarity kind {kind!r}")
    return s_plus, s_minus


def predict_binary(proto: PrototypePair, h: np.ndarray, kind: str = DOT):
    """Most-similar-prototype label in {-1, +1}; exact ties predict +1.

    Accepts a single hypervector or a batch of rows.
    """
    s_plus, s_minus = _similarities(proto, h, kind)
    pred = np.where(s_plus >= s_minus, 1, -1)
    return int(pred) if np.ndim(pred) == 0 else pred


def margin_score(proto: PrototypePair, h: np.ndarray):
    """Unsigned functional margin ``<h, p_plus - p_minus>`` (dot-similarity mode)."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != proto.dim:
        raise ValueError(f"expected hypervectors of length {proto.dim}, "
                         f"got shape {h.shape}")
    score = h @ proto.w
    return float(score) if np.ndim(score) == 0 else score


def accuracy(proto: PrototypePair, encoded: np.ndarray, labels: np.ndarray,
             kind: str = DOT) -> float:
    return float(np.mean(predict_binary(proto, encoded, kind) == labels))


def perceptron_epoch(proto: PrototypePair, encoded: np.ndarray,
                     labels: np.ndarray, lr: float) -> int:
    """One online pass of mistake-driven retraining, in data order.

    Each misclassified point is added to its true prototype and subtracted
    from the predicted one, scaled by ``lr``. Mutates ``proto`` and returns
    the mistake count.
    """
    if not 0.0 <= lr <= 1.0:
        raise ValueError(f"lr must be in [0, 1], got {lr}")
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels)
    if len(encoded) == 0:
        raise ValueError("empty batch")
    mistakes = 0
    for h, y in zip(encoded, labels):
        score = float(h @ proto.p_plus) - float(h @ proto.p_minus)
        pred = 1 if score >= 0.0 else -1
        if pred != y:
            mistakes += 1
            if y > 0:
                proto.p_plus += lr * h
                proto.p_minus -= lr * h
            else:
                proto.p_minus += lr * h
                proto.p_plus -= lr * h
    _check_finite(proto)
    return mistakes


def onlinehd_epoch(proto: PrototypePair, encoded: np.ndarray,
                   labels: np.ndarray, lr: float) -> PrototypePair:
    """One online pass of margin-weighted retraining, in data order.

    A point with functional margin m = y * <h, w> below 1 updates both
    prototypes with weight ``2 * (1 - m)`` (squared-hinge rule without
    regularization); points at or beyond the unit margin are untouched.
    Mutates and returns ``proto``.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels)
    for h, y in zip(encoded, labels):
        margin = y * (float(h @ proto.p_plus) - float(h @ proto.p_minus))
        gap = 1.0 - margin
        if gap > 0.0:
            step = lr * 2.0 * gap
            if y > 0:
                proto.p_plus += step * h
                proto.p_minus -= step * h
            else:
                proto.p_minus += step * h
                proto.p_plus -= step * h
    _check_finite(proto)
    return proto


def renormalize(proto: PrototypePair) -> PrototypePair:
    """Scale each prototype to unit L2 norm in place; zero vectors stay put."""
    for p in (proto.p_plus, proto.p_minus):
        n = float(np.linalg.norm(p))
        if n > _NORM_EPS:
            p /= n
    return proto


def _check_finite(proto: PrototypePair) -> None:
    if not (np.isfinite(proto.p_plus).all() and np.isfinite(proto.p_minus).all()):
        raise DivergenceError(
            "prototype update produced non-finite entries; lower the learning rate")


def write_prototypes(f, proto: PrototypePair) -> None:
    """Append the prototype block: dim as u64, then both vectors as f64."""
    f.write(struct.pack("<Q", proto.dim))
    f.write(np.ascontiguousarray(proto.p_plus, dtype="<f8").tobytes())
    f.write(np.ascontiguousarray(proto.p_minus, dtype="<f8").tobytes())


def read_prototypes(f) -> PrototypePair:
    raw = f.read(8)
    if len(raw) != 8:
        raise ValueError("truncated prototype block")
    (dim,) = struct.unpack("<Q", raw)
    data = f.read(16 * dim)
    if len(data) != 16 * dim:
        raise ValueError("truncated prototype block")
    vals = np.frombuffer(data, dtype="<f8")
    return PrototypePair(vals[:dim].copy(), vals[dim:].copy())
