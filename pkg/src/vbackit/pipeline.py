"""End-to-end training pipeline per model family.

Family split conventions follow the source protocols: logistic uses a
70/30 split with imputation and drop-first encoding; MLP and GBT use a
stratified 80/20 split on complete cases, full one-hot encoding, and
correlation pruning at 0.95, with a further stratified 10% of the
training split held out for early stopping.

All randomness derives from one root seed, fanned out per stage by a
labeled hash so stages are independently reproducible.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass

import numpy as np

from . import gbt as gbt_mod
from . import linmod as linmod_mod
from . import mlp as mlp_mod
from .bundle import ModelBundle
from .cohort import LabeledCohort
from .features import (
    compute_class_weights,
    fit_preprocess,
    stratified_split,
)
from .metrics import EvalReport, classification_report, optimal_f1_threshold
from .records import CATEGORICAL_FIELDS, NUMERIC_FIELDS

DEFAULT_PREDICTORS = tuple(
    [f for f in NUMERIC_FIELDS if f != "plurality"] + list(CATEGORICAL_FIELDS)
)


def stage_seed(root_seed: int, stage: str) -> int:
    """Labeled fan-out of the root seed, stable across runs and platforms."""
    return (root_seed * 1_000_003 + zlib.crc32(stage.encode())) % (2**31)


@dataclass(frozen=True)
class TrainSettings:
    family: str
    predictors: tuple[str, ...] = DEFAULT_PREDICTORS
    seed: int = 0
    test_fraction: float | None = None  # default: 0.3 logistic, 0.2 mlp/gbt
    validation_fraction: float = 0.1  # of the training split, mlp/gbt only
    prune_threshold: float = 0.95
    threshold_strategy: str = "default"  # default | fixed:<x> | f1_validation
    ridge_lambda: float = 0.0
    mlp: mlp_mod.MlpConfig | None = None
    gbt: gbt_mod.GbtConfig | None = None
    created: str | None = None

    def resolved_test_fraction(self) -> float:
        if self.test_fraction is not None:
            return self.test_fraction
        return 0.3 if self.family == "logistic" else 0.2


@dataclass
class TrainResult:
    bundle: ModelBundle
    report: EvalReport
    test_scores: np.ndarray
    test_labels: np.ndarray
    history: object | None = None  # TrainHistory (mlp) or val-AUC trace (gbt)
    coefficients: object | None = None  # CoefficientReport for logistic


def settings_hash(settings: TrainSettings) -> str:
    payload = {
        "family": settings.family,
        "predictors": list(settings.predictors),
        "seed": settings.seed,
        "test_fraction": settings.resolved_test_fraction(),
        "validation_fraction": settings.validation_fraction,
        "prune_threshold": settings.prune_threshold,
        "threshold_strategy": settings.threshold_strategy,
        "ridge_lambda": settings.ridge_lambda,
    }
    if settings.mlp is not None:
        payload["mlp"] = sorted(settings.mlp.__dict__.items())
    if settings.gbt is not None:
        payload["gbt"] = sorted(settings.gbt.__dict__.items())
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _resolve_threshold(strategy: str, val_scores, val_labels) -> float:
    if strategy.startswith("fixed:"):
        return float(strategy.split(":", 1)[1])
    if strategy == "f1_validation":
        if val_scores is None:
            raise ValueError("f1_validation threshold needs a validation split")
        threshold, _ = optimal_f1_threshold(val_scores, val_labels)
        return float(np.clip(threshold, 1e-6, 1 - 1e-6))
    raise ValueError(f"unknown threshold strategy {strategy!r}")


def train_family(cohort: LabeledCohort, settings: TrainSettings) -> TrainResult:
    family = settings.family
    if family not in ("logistic", "mlp", "gbt"):
        raise ValueError(f"unknown model family {family!r}")
    records = list(cohort.records)
    labels = np.asarray(cohort.labels)
    predictors = list(settings.predictors)

    split_seed = stage_seed(settings.seed, f"split:{family}")
    train_idx, test_idx = stratified_split(labels, settings.resolved_test_fraction(), split_seed)
    train_records = [records[i] for i in train_idx]
    test_records = [records[i] for i in test_idx]
    y_train_full = labels[train_idx]
    y_test = labels[test_idx]

    if family == "logistic":
        prep = fit_preprocess(
            train_records,
            predictors,
            drop_first=True,
            prune_threshold=None,
            impute_missing=True,
        )
        X_train = prep.transform_records(train_records)
        model = linmod_mod.fit_logistic(
            X_train, y_train_full, ridge_lambda=settings.ridge_lambda
        )
        coefficients = None
        if settings.ridge_lambda == 0.0:
            try:
                coefficients = linmod_mod.wald_report(model, X_train)
            except linmod_mod.SingularInformationError:
                coefficients = None
        strategy = "fixed:0.5" if settings.threshold_strategy == "default" else settings.threshold_strategy
        train_scores = linmod_mod.predict_proba(model, X_train)
        threshold = _resolve_threshold(strategy, train_scores, y_train_full)
        test_scores = linmod_mod.predict_proba(model, prep.transform_records(test_records))
        history = None
    else:
        prep = fit_preprocess(
            train_records,
            predictors,
            drop_first=False,
            prune_threshold=settings.prune_threshold,
            impute_missing=False,
        )
        X_all_train = prep.transform_records(train_records)
        val_seed = stage_seed(settings.seed, f"val:{family}")
        fit_idx, val_idx = stratified_split(
            y_train_full, settings.validation_fraction, val_seed
        )
        X_fit = X_all_train.values[fit_idx]
        X_val = X_all_train.values[val_idx]
        y_fit = y_train_full[fit_idx]
        y_val = y_train_full[val_idx]

        if family == "mlp":
            base = settings.mlp or mlp_mod.MlpConfig()
            cfg = mlp_mod.MlpConfig(
                **{**base.__dict__, "seed": stage_seed(settings.seed, "mlp")}
            )
            weights = compute_class_weights(y_fit)
            model, history = mlp_mod.train(cfg, X_fit, y_fit, X_val, y_val, weights)
            val_scores = mlp_mod.predict(model, X_val)
            test_scores = mlp_mod.predict(model, prep.transform_records(test_records))
        else:
            base = settings.gbt or gbt_mod.GbtConfig()
            cfg = gbt_mod.GbtConfig(
                **{**base.__dict__, "seed": stage_seed(settings.seed, "gbt")}
            )
            model = gbt_mod.train_boosted(cfg, X_fit, y_fit, X_val, y_val)
            history = list(model.val_auc_trace)
            val_scores = gbt_mod.predict_proba(model, X_val)
            test_scores = gbt_mod.predict_proba(model, prep.transform_records(test_records))

        if settings.threshold_strategy == "default":
            strategy = "f1_validation" if family == "gbt" else "fixed:0.5"
        else:
            strategy = settings.threshold_strategy
        threshold = _resolve_threshold(strategy, val_scores, y_val)
        coefficients = None

    report = classification_report(test_scores, y_test, threshold)
    metadata = {
        "config_hash": settings_hash(settings),
        "seed": settings.seed,
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
        "eval_summary": {
            "roc_auc": report.roc_auc,
            "pr_auc": report.pr_auc,
            "weighted_f1": report.weighted_f1,
            "accuracy": report.accuracy,
        },
    }
    if settings.created is not None:
        metadata["created"] = settings.created
    bundle = ModelBundle(
        family=family,
        preprocess=prep,
        model=model,
        threshold=threshold,
        metadata=metadata,
    )
    return TrainResult(
        bundle=bundle,
        report=report,
        test_scores=test_scores,
        test_labels=y_test,
        history=history,
        coefficients=coefficients,
    )
