"""Benchmark harness: seeded multi-run training, evaluation, dimension sweeps.

A run trains one method on one dataset end to end: encode with a per-run
seeded encoder, train every class-pair model epoch by epoch, and record the
ensemble's train/test accuracy and summed objective after each epoch.
Metric files are deterministic for a fixed config: per-run wall times go to a
separate timings file so the metric payload stays byte-reproducible.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import maxmargin as mm
from .datasets import RawDataset, load_dataset, preprocess
from .encoding import Encoder, encode, new_encoder
from .multiclass import (OvOEnsemble, class_pairs, load_ensemble,
                         ovo_predict_encoded, save_ensemble)
from .optim import adam_init, adam_step
from .prototypes import (DOT, init_prototypes, onlinehd_epoch,
                         perceptron_epoch, renormalize)
from .svm import LinearModel, svm_primal_loss

MM_HDC = "mm-hdc"
PERCEPTRON = "perceptron"
ONLINEHD = "onlinehd"
SVM = "svm"
METHODS = (MM_HDC, PERCEPTRON, ONLINEHD, SVM)

_DEFAULT_LR = {MM_HDC: 1e-5, SVM: 1e-4, PERCEPTRON: 1e-5, ONLINEHD: 1e-5}
_DEFAULT_OPTIMIZER = {MM_HDC: "sgd", SVM: "adam", PERCEPTRON: "sgd",
                      ONLINEHD: "sgd"}

_ENCODE_BLOCK = 4096
SWEEP_LR = 1e-4  # dimension sweeps use a higher rate unless overridden

METRICS_FILE = "metrics.jsonl"
SUMMARY_FILE = "summary.json"
TIMINGS_FILE = "timings.txt"
MODEL_FILE = "model.hdm"


@dataclass
class ExperimentConfig:
    dataset: str
    data_dir: str
    method: str = MM_HDC
    encoder: str = "onlinehd"
    dim: int = 5000
    sigma: float = 1.0
    lr: Optional[float] = None          # None -> method default
    reg_c: float = 500.0
    batch_size: int = 1000
    epochs: int = 20
    similarity: str = DOT
    loss: str = mm.HINGE
    optimizer: Optional[str] = None     # None -> method default
    runs: int = 5
    seed: int = 0
    out_dir: str = "runs"
    jobs: int = 0                       # 0 -> one worker per cpu
    renorm_baselines: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; "
                             f"expected one of {METHODS}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")

    @property
    def resolved_lr(self) -> float:
        return self.lr if self.lr is not None else _DEFAULT_LR[self.method]

    @property
    def resolved_optimizer(self) -> str:
        return (self.optimizer if self.optimizer is not None
                else _DEFAULT_OPTIMIZER[self.method])


@dataclass
class EpochRecord:
    epoch: int
    train_acc: float
    test_acc: float
    objective: float


@dataclass
class RunRecord:
    run: int
    seed: int
    records: list = field(default_factory=list)
    final_test_acc: float = 0.0
    wall_time_s: float = 0.0


def _pair_seed(run_seed: int, pair_index: int) -> int:
    return int(np.random.SeedSequence([run_seed, pair_index]).generate_state(1)[0])


class _MarginPairTrainer:
    """Epoch-stepped margin trainer over one class pair's points."""

    def __init__(self, encoded, labels, indices, cfg: ExperimentConfig, seed):
        self._encoded = encoded
        self._labels = labels
        self._indices = indices
        self.config = mm.MarginConfig(
            C=cfg.reg_c, lr=cfg.resolved_lr, batch_size=cfg.batch_size,
            epochs=cfg.epochs, loss=cfg.loss, similarity=cfg.similarity,
            seed=seed)
        sub, sub_labels = self._subset()
        self.model = init_prototypes(sub, sub_labels)
        if cfg.similarity != DOT:
            renormalize(self.model)
        self._rng = np.random.default_rng(seed)
        self._opt = None
        if cfg.resolved_optimizer == mm.ADAM:
            self._opt = (adam_init(self.model.dim), adam_init(self.model.dim))

    def _subset(self):
        return self._encoded[self._indices], self._labels[self._indices]

    def step_epoch(self):
        sub, sub_labels = self._subset()
        mm.run_epoch(self.model, sub, sub_labels, self.config, self._rng,
                     self._opt)

    def objective(self) -> float:
        sub, sub_labels = self._subset()
        return mm.objective(self.model, sub, sub_labels, self.config.C,
                            self.config.loss).objective


class _BaselinePairTrainer:
    """Online mistake-driven or margin-weighted retraining over one pair."""

    def __init__(self, encoded, labels, indices, cfg: ExperimentConfig, seed):
        self._encoded = encoded
        self._labels = labels
        self._indices = indices
        self._rule = cfg.method
        self._lr = cfg.resolved_lr
        self._renorm = cfg.renorm_baselines
        self._rng = np.random.default_rng(seed)
        self._loss = mm.HINGE if cfg.method == PERCEPTRON else mm.SQUARED_HINGE
        sub, sub_labels = encoded[indices], labels[indices]
        self.model = init_prototypes(sub, sub_labels)

    def step_epoch(self):
        order = self._indices[self._rng.permutation(len(self._indices))]
        sub, sub_labels = self._encoded[order], self._labels[order]
        if self._rule == PERCEPTRON:
            perceptron_epoch(self.model, sub, sub_labels, self._lr)
        else:
            onlinehd_epoch(self.model, sub, sub_labels, self._lr)
        if self._renorm:
            renormalize(self.model)

    def objective(self) -> float:
        sub = self._encoded[self._indices]
        sub_labels = self._labels[self._indices]
        return mm.objective(self.model, sub, sub_labels, math.inf,
                            self._loss).objective


class _SvmPairTrainer:
    """Batched hinge-loss trainer for a zero-bias linear model on one pair."""

    def __init__(self, encoded, labels, indices, cfg: ExperimentConfig, seed):
        self._encoded = encoded
        self._labels = labels
        self._indices = indices
        self._C = cfg.reg_c
        self._lr = cfg.resolved_lr
        self._batch = cfg.batch_size
        self._rng = np.random.default_rng(seed)
        dim = encoded.shape[1]
        self.model = LinearModel(np.zeros(dim), 0.0)
        self._opt = None
        if cfg.resolved_optimizer == mm.ADAM:
            self._opt = adam_init(dim)

    def step_epoch(self):
        w = self.model.w
        inv_c = 0.0 if math.isinf(self._C) else 1.0 / self._C
        order = self._indices[self._rng.permutation(len(self._indices))]
        for start in range(0, len(order), self._batch):
            idx = order[start:start + self._batch]
            xb = self._encoded[idx]
            yb = self._labels[idx].astype(np.float64)
            viol = 1.0 - yb * (xb @ w) > 0.0
            g = inv_c * w - yb[viol] @ xb[viol]
            if self._opt is None:
                w -= self._lr * g
            else:
                w -= adam_step(self._opt, g, self._lr)

    def objective(self) -> float:
        sub = self._encoded[self._indices]
        sub_labels = self._labels[self._indices]
        return svm_primal_loss(self.model, sub, sub_labels, self._C)


_TRAINERS = {
    MM_HDC: _MarginPairTrainer,
    PERCEPTRON: _BaselinePairTrainer,
    ONLINEHD: _BaselinePairTrainer,
    SVM: _SvmPairTrainer,
}


def encode_blocks(enc: Encoder, points: np.ndarray,
                  block: int = _ENCODE_BLOCK) -> np.ndarray:
    """Encode a large matrix in fixed-size row blocks to bound temporaries."""
    out = np.empty((len(points), enc.dim))
    for start in range(0, len(points), block):
        out[start:start + block] = encode(enc, points[start:start + block])
    return out


def train_one_run(cfg: ExperimentConfig, data: RawDataset, run_index: int):
    """Train one seeded run; returns ``(RunRecord, OvOEnsemble)``."""
    started = time.perf_counter()
    run_seed = cfg.seed + run_index
    enc = new_encoder(cfg.encoder, data.input_dim, cfg.dim, cfg.sigma,
                      seed=run_seed)
    h_train = encode_blocks(enc, data.train_x)
    h_test = encode_blocks(enc, data.test_x)

    n_classes = data.n_classes
    pairs = class_pairs(n_classes)
    counts = np.bincount(data.train_y, minlength=n_classes)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"class {missing} has no training points")

    trainer_cls = _TRAINERS[cfg.method]
    trainers = []
    for k, (a, b) in enumerate(pairs):
        idx = np.flatnonzero((data.train_y == a) | (data.train_y == b))
        pm = np.where(data.train_y == a, 1, -1)  # only rows in idx are used
        trainers.append(trainer_cls(h_train, pm, idx, cfg,
                                    _pair_seed(run_seed, k)))
    ensemble = OvOEnsemble(n_classes, pairs, [t.model for t in trainers],
                           enc, cfg.similarity)

    workers = cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)
    record = RunRecord(run=run_index, seed=run_seed)
    for epoch in range(1, cfg.epochs + 1):
        if workers > 1 and len(trainers) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda t: t.step_epoch(), trainers))
        else:
            for t in trainers:
                t.step_epoch()
        train_acc = float(np.mean(
            ovo_predict_encoded(ensemble, h_train) == data.train_y))
        test_acc = float(np.mean(
            ovo_predict_encoded(ensemble, h_test) == data.test_y))
        total_objective = float(sum(t.objective() for t in trainers))
        record.records.append(EpochRecord(epoch, train_acc, test_acc,
                                          total_objective))
    if record.records:
        record.final_test_acc = record.records[-1].test_acc
    else:
        record.final_test_acc = float(np.mean(
            ovo_predict_encoded(ensemble, h_test) == data.test_y))
    record.wall_time_s = time.perf_counter() - started
    return record, ensemble


def aggregate(records: list) -> dict:
    """Mean and (5, 95) percentiles of the final test accuracies."""
    finals = np.array([r.final_test_acc for r in records])
    return {
        "runs": len(records),
        "mean_final_test_acc": float(np.mean(finals)),
        "p5_final_test_acc": float(np.percentile(finals, 5)),
        "p95_final_test_acc": float(np.percentile(finals, 95)),
    }


def record_payload(record: RunRecord) -> dict:
    """Deterministic metric payload; wall time is reported separately."""
    return {
        "run": record.run,
        "seed": record.seed,
        "final_test_acc": record.final_test_acc,
        "epochs": [dataclasses.asdict(e) for e in record.records],
    }


def write_outputs(out_dir, cfg: ExperimentConfig, records: list,
                  ensemble: Optional[OvOEnsemble] = None) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / METRICS_FILE, "w") as f:
        for record in records:
            f.write(json.dumps(record_payload(record), sort_keys=True) + "\n")
    summary = {"config": dataclasses.asdict(cfg), **aggregate(records)}
    with open(out_dir / SUMMARY_FILE, "w") as f:
        json.dump(summary, f, sort_keys=True, indent=2)
        f.write("\n")
    with open(out_dir / TIMINGS_FILE, "w") as f:
        for record in records:
            f.write(f"run {record.run}: {record.wall_time_s:.3f} s\n")
    if ensemble is not None:
        save_ensemble(out_dir / MODEL_FILE, ensemble)
    return summary


def run_experiment(cfg: ExperimentConfig, data: Optional[RawDataset] = None):
    """Execute ``cfg.runs`` seeded runs and write metric/summary/model files.

    The dataset is loaded and validated before any output is created, so a
    bad data directory leaves no partial output behind.
    """
    if data is None:
        data = preprocess(load_dataset(cfg.dataset, cfg.data_dir))
    records = []
    first_ensemble = None
    for run_index in range(cfg.runs):
        record, ensemble = train_one_run(cfg, data, run_index)
        if first_ensemble is None:
            first_ensemble = ensemble
        records.append(record)
    summary = write_outputs(cfg.out_dir, cfg, records, first_ensemble)
    return records, summary


def sweep_dims(cfg: ExperimentConfig, dims: list):
    """Re-run the experiment per hypervector size under ``out_dir/d<dim>``.

    Sweeps default to the higher learning rate unless one was set explicitly.
    """
    if not dims:
        raise ValueError("dimension list must be nonempty")
    data = preprocess(load_dataset(cfg.dataset, cfg.data_dir))
    results = {}
    for dim in dims:
        sub = dataclasses.replace(
            cfg, dim=dim,
            lr=cfg.lr if cfg.lr is not None else SWEEP_LR,
            out_dir=str(Path(cfg.out_dir) / f"d{dim}"))
        _, summary = run_experiment(sub, data)
        results[dim] = summary
    return results


def evaluate_model(model_path, data: RawDataset, split: str = "test") -> dict:
    """Accuracy and per-class confusion counts of a saved model on a dataset."""
    ensemble = load_ensemble(model_path)
    points = data.test_x if split == "test" else data.train_x
    labels = data.test_y if split == "test" else data.train_y
    if ensemble.encoder.input_dim != points.shape[1]:
        raise ValueError(
            f"model expects {ensemble.encoder.input_dim}-dimensional input, "
            f"dataset has {points.shape[1]}")
    encoded = encode_blocks(ensemble.encoder, points)
    pred = ovo_predict_encoded(ensemble, encoded)
    k = max(ensemble.n_classes, int(labels.max()) + 1)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    return {
        "split": split,
        "n_points": int(len(labels)),
        "accuracy": float(np.mean(pred == labels)),
        "confusion": confusion.tolist(),
    }
