"""Violation classifiers over embedding features, and their evaluation."""

from __future__ import annotations

import json

import numpy as np

from ..dataset import N_LABELS
from ..errors import DataError
from .base import DegenerateData, DimensionMismatch, NonFiniteLoss, Standardizer, TrainedModel
from .features import (
    FeatureSpace,
    MissingNode,
    featurize_dataset,
    featurize_example,
    featurize_rules,
    permission_vocabulary,
)
from .forest import DecisionTree, ForestConfig, RandomForest, train_random_forest
from .metrics import LabelMetrics, MetricsReport, classification_report, confusion_matrix, metrics_from_confusion
from .mlp import MLP, MLPConfig, gradient_check, loss_and_grads, train_mlp
from .split import LabelTooSmall, stratified_folds, stratified_split
from .stacking import MetaConfig, StackingConfig, StackingEnsemble, train_stacking
from .svm import LinearSVM, SVMConfig, train_svm

MODEL_SCHEMA_VERSION = 1
MODEL_KINDS = {
    "rf": RandomForest,
    "svm": LinearSVM,
    "mlp": MLP,
    "stacking": StackingEnsemble,
}
_BY_KIND = {cls.kind: cls for cls in MODEL_KINDS.values()}


def evaluate(model: TrainedModel, X, y) -> MetricsReport:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) == 0:
        raise DataError("cannot evaluate on an empty test set")
    return classification_report(y, model.predict(X), N_LABELS)


def predict_with_report(model: TrainedModel, X) -> list[tuple[int, list[float]]]:
    """(predicted label, 11 per-label scores) per row.

    Scores are softmax probabilities for MLP and stacking, raw margins for the
    SVM (``-inf`` for labels absent from training) and vote fractions for RF.
    """
    scores = model.predict_scores(X)
    preds = np.argmax(scores, axis=1)
    return [(int(p), [float(s) for s in row]) for p, row in zip(preds, scores)]


def model_to_json(model: TrainedModel) -> str:
    doc = {"schema_version": MODEL_SCHEMA_VERSION, **model.to_dict()}
    if model.feature_space is not None:
        doc["feature_space"] = model.feature_space
    return json.dumps(doc)


def model_from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise DataError(f"unsupported model schema {doc.get('schema_version')!r}")
    cls = _BY_KIND.get(doc.get("kind"))
    if cls is None:
        raise DataError(f"unknown model kind {doc.get('kind')!r}")
    model = cls.from_dict(doc)
    model.feature_space = doc.get("feature_space")
    if model.feature_space is not None:
        expected = FeatureSpace.from_dict(model.feature_space).size
        if expected != model.feature_dimension:
            raise DimensionMismatch(
                f"model has {model.feature_dimension} inputs but its feature space yields {expected}"
            )
    return model


__all__ = [
    "DecisionTree", "DegenerateData", "DimensionMismatch", "FeatureSpace", "ForestConfig", "LabelMetrics",
    "LabelTooSmall", "LinearSVM", "MLP", "MLPConfig", "MODEL_KINDS", "MetaConfig", "MetricsReport",
    "MissingNode", "NonFiniteLoss", "RandomForest", "SVMConfig", "StackingConfig", "StackingEnsemble",
    "Standardizer", "TrainedModel", "classification_report", "confusion_matrix", "evaluate",
    "featurize_dataset", "featurize_example", "featurize_rules", "gradient_check", "loss_and_grads",
    "metrics_from_confusion", "model_from_json", "model_to_json", "permission_vocabulary",
    "predict_with_report", "stratified_folds", "stratified_split", "train_mlp", "train_random_forest",
    "train_stacking", "train_svm",
]
