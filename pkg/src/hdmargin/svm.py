"""Reference linear soft-margin SVM with zero bias, plus a dual oracle.

The primal trainer minimizes

    0.5/C * ||w||^2 + sum_i [1 - y_i (<x_i, w> - b)]_+

by batched subgradient or Adam steps (``b`` fixed at 0 unless bias training
is requested). The dual solver is a small-instance verification oracle: cyclic
coordinate ascent on

    max_lambda  sum_i lambda_i - 0.5 * sum_ij lambda_i lambda_j y_i y_j <x_i, x_j>
    s.t.        0 <= lambda_i <= C

whose certificate carries the reconstructed weight vector, both objective
values, the duality gap, and the worst KKT residual.

Note on scales: the dual above pairs with the margin-form primal
``0.5 ||w||^2 + C sum_i zeta_i``, which is exactly ``C`` times the
regularized loss returned by :func:`svm_primal_loss`. Certificate objectives
are reported on the margin-form scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .maxmargin import TraceRecord
from .optim import adam_init, adam_step
from .prototypes import DivergenceError, PrototypePair

SGD = "sgd"
ADAM = "adam"

MAX_DUAL_POINTS = 10000


@dataclass
class LinearModel:
    w: np.ndarray
    b: float = 0.0


@dataclass
class DualCertificate:
    """Solution and verification data from the dual solver.

    ``eta`` are the slack multipliers ``C - lambda``. Objectives use the
    margin-form scale (see module docstring).
    """

    lam: np.ndarray
    eta: np.ndarray
    w_reconstructed: np.ndarray
    dual_objective: float
    primal_objective: float
    gap: float
    kkt_max_violation: float
    converged: bool
    sweeps: int
    sweep_objectives: list = field(default_factory=list)


@dataclass
class KKTReport:
    max_violation: float
    passed: bool
    box_violation: float
    complementarity_violation: float
    stationarity_gap: float


def decision_scores(model: LinearModel, points: np.ndarray) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) @ model.w - model.b


def predict(model: LinearModel, points: np.ndarray) -> np.ndarray:
    return np.where(decision_scores(model, points) >= 0.0, 1, -1)


def svm_primal_loss(model: LinearModel, points: np.ndarray, labels: np.ndarray,
                    C: float) -> float:
    """Regularized hinge loss ``0.5/C ||w||^2 + sum_i [1 - y_i(<x_i,w> - b)]_+``."""
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    w = model.w
    slack = np.maximum(0.0, 1.0 - labels * (points @ w - model.b))
    inv_c = 0.0 if math.isinf(C) else 1.0 / C
    reg = 0.5 * inv_c * float(np.dot(w, w))
    return reg + float(np.sum(slack))


def svm_fit_primal(points: np.ndarray, labels: np.ndarray, C: float,
                   lr: float = 1e-4, epochs: int = 100, batch_size: int = 1000,
                   optimizer: str = ADAM, seed: int = 0,
                   train_bias: bool = False,
                   test_points: Optional[np.ndarray] = None,
                   test_labels: Optional[np.ndarray] = None,
                   init: Optional[LinearModel] = None):
    """Minimize the regularized hinge loss from a zero model (or ``init``).

    Returns ``(model, trace)`` where the trace holds one record per epoch
    (loss on the full set, train accuracy, optional test accuracy).
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if not ((labels > 0).any() and (labels < 0).any()):
        raise ValueError("both classes must be present")
    n, d = points.shape
    w = np.zeros(d) if init is None else np.array(init.w, dtype=np.float64)
    b = 0.0 if init is None else float(init.b)
    inv_c = 0.0 if math.isinf(C) else 1.0 / C
    rng = np.random.default_rng(seed)
    if optimizer == ADAM:
        state_w, state_b = adam_init(d), adam_init(())
    elif optimizer == SGD:
        state_w = state_b = None
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    model = LinearModel(w, b)
    trace = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = points[idx], labels[idx]
            gaps = 1.0 - yb * (xb @ w - b)
            viol = gaps > 0.0
            g_w = inv_c * w - yb[viol] @ xb[viol]
            if optimizer == ADAM:
                w -= adam_step(state_w, g_w, lr)
            else:
                w -= lr * g_w
            if train_bias:
                g_b = float(np.sum(yb[viol]))
                if optimizer == ADAM:
                    b -= float(adam_step(state_b, g_b, lr))
                else:
                    b -= lr * g_b
            if not np.isfinite(w).all() or not math.isfinite(b):
                raise DivergenceError(
                    f"non-finite SVM update at epoch {epoch} (lr={lr}, C={C})")
        model = LinearModel(w, b)
        test_acc = None
        if test_points is not None:
            test_acc = float(np.mean(predict(model, test_points) == test_labels))
        loss = svm_primal_loss(model, points, labels, C)
        reg = 0.5 * inv_c * float(np.dot(w, w))
        trace.append(TraceRecord(epoch, loss, reg, loss - reg,
                                 float(np.mean(predict(model, points) == labels)),
                                 test_acc))
    return model, trace


def svm_dual_solve(points: np.ndarray, labels: np.ndarray, C: float,
                   tol: float = 1e-10, max_iter: int = 10000) -> DualCertificate:
    """Cyclic coordinate ascent over the box-constrained dual.

    Each coordinate is moved to its clipped unconstrained maximizer, so the
    multipliers stay in [0, C] exactly and the dual objective never decreases.
    Terminates when the largest coordinate change in a sweep drops below
    ``tol``; non-convergence is flagged on the certificate rather than raised.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n = len(points)
    if n > MAX_DUAL_POINTS:
        raise ValueError(f"dual oracle limited to {MAX_DUAL_POINTS} points, got {n}")
    if not (C > 0 and math.isfinite(C)):
        raise ValueError(f"dual solver needs finite C > 0, got {C}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    qdiag = np.einsum("ij,ij->i", points, points)
    lam = np.zeros(n)
    w = np.zeros(points.shape[1])
    converged = False
    sweeps = 0
    sweep_objectives = []
    for sweeps in range(1, max_iter + 1):
        max_change = 0.0
        for i in range(n):
            if qdiag[i] <= 0.0:
                continue  # zero point: its coordinate never binds
            margin = labels[i] * float(points[i] @ w)
            target = lam[i] + (1.0 - margin) / qdiag[i]
            new = min(max(target, 0.0), C)
            delta = new - lam[i]
            if delta != 0.0:
                w += (delta * labels[i]) * points[i]
                lam[i] = new
                max_change = max(max_change, abs(delta))
        sweep_objectives.append(float(np.sum(lam)) - 0.5 * float(w @ w))
        if max_change < tol:
            converged = True
            break

    pos = labels > 0
    neg = labels < 0
    p_plus = lam[pos] @ points[pos]
    p_minus = lam[neg] @ points[neg]
    w_rec = p_plus - p_minus
    dual_obj = float(np.sum(lam)) - 0.5 * float(w_rec @ w_rec)
    primal_obj = C * svm_primal_loss(LinearModel(w_rec, 0.0), points, labels, C)
    cert = DualCertificate(
        lam=lam, eta=C - lam, w_reconstructed=w_rec,
        dual_objective=dual_obj, primal_objective=primal_obj,
        gap=primal_obj - dual_obj, kkt_max_violation=0.0,
        converged=converged, sweeps=sweeps, sweep_objectives=sweep_objectives)
    cert.kkt_max_violation = check_kkt(cert, points, labels, C).max_violation
    return cert


def check_kkt(cert: DualCertificate, points: np.ndarray, labels: np.ndarray,
              C: float, tol: float = 1e-6) -> KKTReport:
    """Verify box feasibility, complementary slackness, and stationarity.

    Margins are evaluated against the weight vector implied by the
    certificate's multipliers, and the certificate's stored weight vector is
    checked against it, so a tampered certificate cannot pass.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    lam = cert.lam
    w_lam = (lam * labels) @ points
    margins = labels * (points @ w_lam)

    box = float(np.max(np.maximum(-lam, lam - C), initial=0.0))
    interior = (lam > 0.0) & (lam < C)
    at_zero = lam == 0.0
    at_cap = lam >= C
    comp = 0.0
    if interior.any():
        comp = max(comp, float(np.max(np.abs(margins[interior] - 1.0))))
    if at_zero.any():
        comp = max(comp, float(np.max(np.maximum(0.0, 1.0 - margins[at_zero]))))
    if at_cap.any():
        comp = max(comp, float(np.max(np.maximum(0.0, margins[at_cap] - 1.0))))
    stationarity = float(np.max(np.abs(cert.w_reconstructed - w_lam), initial=0.0))
    worst = max(box, comp, stationarity)
    return KKTReport(worst, worst <= tol, box, comp, stationarity)


def prototype_decomposition(cert: DualCertificate, labels: np.ndarray,
                            encoded: np.ndarray) -> PrototypePair:
    """Rebuild the class prototypes as multiplier-weighted support-vector sums.

    The difference of the returned prototypes reproduces the certificate's
    weight vector.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels > 0
    neg = labels < 0
    return PrototypePair(cert.lam[pos] @ encoded[pos],
                         cert.lam[neg] @ encoded[neg])


def certificate_to_text(cert: DualCertificate) -> str:
    """Structured text record of the certificate, for logs."""
    lines = [
        f"converged={cert.converged} sweeps={cert.sweeps}",
        f"dual_objective={cert.dual_objective!r}",
        f"primal_objective={cert.primal_objective!r}",
        f"gap={cert.gap!r}",
        f"kkt_max_violation={cert.kkt_max_violation!r}",
        "lambda=" + np.array2string(cert.lam, max_line_width=100000,
                                    threshold=MAX_DUAL_POINTS),
        "eta=" + np.array2string(cert.eta, max_line_width=100000,
                                 threshold=MAX_DUAL_POINTS),
    ]
    return "\n".join(lines) + "\n"
