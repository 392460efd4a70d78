"""Margin-based hyperdimensional computing classifiers.

Binary classifiers over seeded random hypervector encodings, trained either
by the classic mistake-driven/margin-weighted baselines or by gradient
descent on a regularized hinge objective, plus a reference linear SVM (primal
trainer and small-instance dual oracle), one-vs-one multiclass ensembles, and
a benchmark CLI.
"""

from .encoding import (Encoder, encode, load_encoder, new_encoder,
                       normalize_l2, save_encoder)
from .maxmargin import (LossReport, MarginConfig, TraceRecord, ViolationSets,
                        fit, gradients, objective, train_step, violation_sets)
from .multiclass import (OvOEnsemble, load_ensemble, ovo_fit, ovo_predict,
                         ovo_predict_encoded, save_ensemble)
from .prototypes import (DivergenceError, LabeledSet, PrototypePair,
                         init_prototypes, margin_score, onlinehd_epoch,
                         perceptron_epoch, predict_binary, renormalize,
                         similarity)
from .svm import (DualCertificate, KKTReport, LinearModel, check_kkt,
                  prototype_decomposition, svm_dual_solve, svm_fit_primal,
                  svm_primal_loss)

__version__ = "0.1.0"

__all__ = [
    "Encoder", "encode", "new_encoder", "normalize_l2", "save_encoder",
    "load_encoder",
    "PrototypePair", "LabeledSet", "DivergenceError", "init_prototypes",
    "similarity", "predict_binary", "margin_score", "perceptron_epoch",
    "onlinehd_epoch", "renormalize",
    "MarginConfig", "ViolationSets", "LossReport", "TraceRecord",
    "violation_sets", "objective", "gradients", "train_step", "fit",
    "LinearModel", "DualCertificate", "KKTReport", "svm_primal_loss",
    "svm_fit_primal", "svm_dual_solve", "check_kkt",
    "prototype_decomposition",
    "OvOEnsemble", "ovo_fit", "ovo_predict", "ovo_predict_encoded",
    "save_ensemble", "load_ensemble",
    "__version__",
]
