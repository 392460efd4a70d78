"""One-vs-one ensembles of binary classifiers for K-class problems.

Every unordered class pair (a, b) with a < b gets one binary model trained on
the points of those two classes only, with class a mapped to +1. Prediction
casts one vote per pair; plurality wins, ties are broken by the summed
functional margins of the tied classes, then by the smallest class id.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .encoding import Encoder, encode, read_encoder, write_encoder
from .prototypes import (COSINE, DOT, PrototypePair, read_prototypes,
                         write_prototypes)
from .svm import LinearModel

_MODEL_MAGIC = b"HDMARGIN"
_PROTO_TAG = 0
_LINEAR_TAG = 1
_SIM_TAG = {DOT: 0, COSINE: 1}
_TAG_SIM = {v: k for k, v in _SIM_TAG.items()}


class ModelFileError(ValueError):
    """Raised when a model file is malformed or truncated."""


@dataclass
class OvOEnsemble:
    n_classes: int
    pairs: list  # ordered (a, b) with a < b, lexicographic
    models: list  # one PrototypePair or LinearModel per pair
    encoder: Optional[Encoder] = None
    similarity: str = DOT

    def __post_init__(self):
        expected = self.n_classes * (self.n_classes - 1) // 2
        if len(self.pairs) != expected or len(self.models) != expected:
            raise ValueError(f"expected {expected} pair models for "
                             f"{self.n_classes} classes")


def class_pairs(n_classes: int) -> list:
    return [(a, b) for a in range(n_classes) for b in range(a + 1, n_classes)]


def ovo_fit(encoded: np.ndarray, labels: np.ndarray,
            trainer: Callable[[np.ndarray, np.ndarray, tuple], object],
            encoder: Optional[Encoder] = None,
            similarity: str = DOT) -> OvOEnsemble:
    """Train one binary model per class pair.

    ``trainer(sub_encoded, pm_labels, pair)`` receives only the two classes'
    points, with the pair's lower class mapped to +1, and returns the model.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min(initial=0) < 0:
        raise ValueError("multiclass labels must be 0..K-1")
    n_classes = int(labels.max()) + 1
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    counts = np.bincount(labels, minlength=n_classes)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"class {missing} has no training points")
    models = []
    pairs = class_pairs(n_classes)
    for pair in pairs:
        a, b = pair
        mask = (labels == a) | (labels == b)
        pm = np.where(labels[mask] == a, 1, -1)
        models.append(trainer(encoded[mask], pm, pair))
    return OvOEnsemble(n_classes, pairs, models, encoder, similarity)


def decision_vector(model, similarity: str = DOT):
    """Effective (weight vector, bias) whose sign reproduces the binary rule."""
    if isinstance(model, PrototypePair):
        if similarity == COSINE:
            def unit(p):
                n = float(np.linalg.norm(p))
                return p / n if n > 1e-12 else p
            return unit(model.p_plus) - unit(model.p_minus), 0.0
        return model.w, 0.0
    if isinstance(model, LinearModel):
        return model.w, model.b
    raise TypeError(f"unsupported binary model type {type(model).__name__}")


def ovo_decision_encoded(ensemble: OvOEnsemble, encoded: np.ndarray):
    """Vote counts and summed per-class margins for already-encoded rows.

    Returns ``(votes, margin_sums)``, both of shape (n, K). Every row's votes
    sum to K(K-1)/2.
    """
    encoded = np.atleast_2d(np.asarray(encoded, dtype=np.float64))
    stacked = np.empty((len(ensemble.pairs), encoded.shape[1]))
    biases = np.empty(len(ensemble.pairs))
    for k, model in enumerate(ensemble.models):
        stacked[k], biases[k] = decision_vector(model, ensemble.similarity)
    margins = encoded @ stacked.T - biases  # (n, n_pairs)
    votes = np.zeros((len(encoded), ensemble.n_classes), dtype=np.int64)
    margin_sums = np.zeros((len(encoded), ensemble.n_classes))
    for k, (a, b) in enumerate(ensemble.pairs):
        wins_a = margins[:, k] >= 0.0
        votes[:, a] += wins_a
        votes[:, b] += ~wins_a
        margin_sums[:, a] += margins[:, k]
        margin_sums[:, b] -= margins[:, k]
    return votes, margin_sums


def ovo_predict_encoded(ensemble: OvOEnsemble, encoded: np.ndarray) -> np.ndarray:
    votes, margin_sums = ovo_decision_encoded(ensemble, encoded)
    tied = votes == votes.max(axis=1, keepdims=True)
    tied_margins = np.where(tied, margin_sums, -np.inf)
    best = tied & (tied_margins == tied_margins.max(axis=1, keepdims=True))
    return best.argmax(axis=1)  # first True wins: smallest class id


def ovo_predict(ensemble: OvOEnsemble, x: np.ndarray):
    """Predict class ids for raw input; encodes each point exactly once."""
    if ensemble.encoder is None:
        raise ValueError("ensemble has no encoder attached")
    x = np.asarray(x, dtype=np.float64)
    h = encode(ensemble.encoder, x)
    pred = ovo_predict_encoded(ensemble, h)
    return int(pred[0]) if x.ndim == 1 else pred


def save_ensemble(path, ensemble: OvOEnsemble) -> None:
    if ensemble.encoder is None:
        raise ValueError("cannot save an ensemble without its encoder")
    kinds = {type(m) for m in ensemble.models}
    if kinds == {PrototypePair}:
        tag = _PROTO_TAG
    elif kinds == {LinearModel}:
        tag = _LINEAR_TAG
    else:
        raise ValueError("ensemble must hold one model type")
    with open(path, "wb") as f:
        f.write(_MODEL_MAGIC)
        f.write(struct.pack("<QQQQ", ensemble.n_classes, len(ensemble.pairs),
                            tag, _SIM_TAG[ensemble.similarity]))
        for a, b in ensemble.pairs:
            f.write(struct.pack("<QQ", a, b))
        write_encoder(f, ensemble.encoder)
        for model in ensemble.models:
            if tag == _PROTO_TAG:
                write_prototypes(f, model)
            else:
                f.write(struct.pack("<Q", len(model.w)))
                f.write(np.ascontiguousarray(model.w, dtype="<f8").tobytes())
                f.write(struct.pack("<d", model.b))


def load_ensemble(path) -> OvOEnsemble:
    try:
        with open(path, "rb") as f:
            magic = f.read(len(_MODEL_MAGIC))
            if magic != _MODEL_MAGIC:
                raise ModelFileError(f"not a model file: bad magic {magic!r}")
            header = f.read(32)
            if len(header) != 32:
                raise ModelFileError("truncated model header")
            n_classes, n_pairs, tag, sim_tag = struct.unpack("<QQQQ", header)
            if sim_tag not in _TAG_SIM or tag not in (_PROTO_TAG, _LINEAR_TAG):
                raise ModelFileError("unknown model/similarity tag")
            pairs = []
            for _ in range(n_pairs):
                raw = f.read(16)
                if len(raw) != 16:
                    raise ModelFileError("truncated pair table")
                pairs.append(tuple(struct.unpack("<QQ", raw)))
            encoder = read_encoder(f)
            models = []
            for _ in range(n_pairs):
                if tag == _PROTO_TAG:
                    models.append(read_prototypes(f))
                else:
                    raw = f.read(8)
                    if len(raw) != 8:
                        raise ModelFileError("truncated weight block")
                    (dim,) = struct.unpack("<Q", raw)
                    data = f.read(8 * dim + 8)
                    if len(data) != 8 * dim + 8:
                        raise ModelFileError("truncated weight block")
                    w = np.frombuffer(data[:8 * dim], dtype="<f8").copy()
                    (b,) = struct.unpack("<d", data[8 * dim:])
                    models.append(LinearModel(w, b))
            return OvOEnsemble(int(n_classes), pairs, models, encoder,
                               _TAG_SIM[sim_tag])
    except (ValueError, struct.error) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
