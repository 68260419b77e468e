"""Multivariable logistic regression: IRLS (Newton-Raphson) maximum
likelihood with step-halving, Wald standard errors and 95% confidence
intervals, coefficient ranking, and k-fold cross-validated AUROC.

One exact MLE path serves both inference and deployment. Ridge (lambda > 0)
is available for separable data; Wald SEs are reported only at lambda = 0.
The intercept is never penalized, so mean(p_hat) = mean(y) holds on
training rows at any lambda.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .metrics import roc_auc

PROB_CLAMP = 1e-12
Z_95 = 1.959963984540054  # two-sided 95% normal quantile


class LinModError(Exception):
    pass


class SingularInformationError(LinModError):
    def __init__(self, columns: list[str]):
        super().__init__(f"information matrix is singular; dependent columns: {columns}")
        self.columns = columns


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    column_names: list[str] = field(default_factory=list)
    ridge_lambda: float = 0.0
    iterations: int = 0
    converged: bool = False
    final_nll: float = float("nan")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _nll(y: np.ndarray, p: np.ndarray, beta: np.ndarray, lam: float) -> float:
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    data = -(y * np.log(p) + (1 - y) * np.log(1 - p)).sum()
    return float(data + 0.5 * lam * (beta[1:] @ beta[1:]))


def fit_logistic(
    X,
    y,
    ridge_lambda: float = 0.0,
    max_iter: int = 100,
    grad_tol: float = 1e-8,
    ll_tol: float = 1e-10,
    column_names: list[str] | None = None,
) -> LogisticModel:
    """Maximize the (optionally ridge-penalized) log-likelihood via IRLS.

    Converged when max |gradient| <= grad_tol or the relative penalized
    log-likelihood change <= ll_tol. Non-convergence returns the model with
    converged=False and a warning; diverging coefficients (perfect
    separation at lambda = 0) also warn.
    """
    values = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.isfinite(values).all():
        raise LinModError("design matrix contains non-finite entries")
    if not np.isin(y, (0.0, 1.0)).all():
        raise LinModError("labels must be 0/1")
    n, k = values.shape
    if n <= k:
        warnings.warn(f"n ({n}) <= feature count ({k}); estimates may be unstable", ConvergenceWarning)
    if column_names is None:
        column_names = X.column_names() if hasattr(X, "column_names") else [f"x{j}" for j in range(k)]

    design = np.hstack([np.ones((n, 1)), values])
    beta = np.zeros(k + 1)
    lam = float(ridge_lambda)
    penalty_mask = np.ones(k + 1)
    penalty_mask[0] = 0.0  # intercept unpenalized

    p = _sigmoid(design @ beta)
    nll = _nll(y, p, beta, lam)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = design.T @ (p - y) + lam * penalty_mask * beta
        if np.abs(grad).max() <= grad_tol:
            converged = True
            iterations -= 1
            break
        w = p * (1.0 - p)
        hess = design.T @ (design * w[:, None]) + lam * np.diag(penalty_mask)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]

        # step-halving keeps the penalized log-likelihood non-decreasing
        scale = 1.0
        for _ in range(50):
            candidate = beta - scale * step
            p_new = _sigmoid(design @ candidate)
            nll_new = _nll(y, p_new, candidate, lam)
            if nll_new <= nll + 1e-12:
                break
            scale *= 0.5
        beta, p = candidate, p_new
        if nll > 0 and abs(nll - nll_new) / max(abs(nll), 1.0) <= ll_tol:
            nll = nll_new
            grad = design.T @ (p - y) + lam * penalty_mask * beta
            converged = bool(np.abs(grad).max() <= max(grad_tol, 1e-6))
            break
        nll = nll_new

    if not converged:
        warnings.warn(
            f"IRLS did not converge within {max_iter} iterations", ConvergenceWarning
        )
    if lam == 0.0 and np.abs(beta).max() > 15.0:
        warnings.warn(
            "coefficients are diverging; data may be perfectly separated "
            "(consider ridge_lambda > 0)",
            ConvergenceWarning,
        )
    return LogisticModel(
        intercept=float(beta[0]),
        coefficients=beta[1:].copy(),
        column_names=list(column_names),
        ridge_lambda=lam,
        iterations=iterations,
        converged=converged,
        final_nll=nll,
    )


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    """p = sigmoid(b0 + X @ b), clamped away from 0/1 for downstream logs."""
    values = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
    if values.shape[1] != model.coefficients.size:
        raise LinModError(
            f"column mismatch: model has {model.coefficients.size} coefficients, "
            f"matrix has {values.shape[1]} columns"
        )
    p = _sigmoid(model.intercept + values @ model.coefficients)
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    z: float
    p: float
    significant: bool  # p < 0.05


@dataclass(frozen=True)
class CoefficientReport:
    rows: tuple[CoefficientRow, ...]

    def to_csv(self) -> str:
        lines = ["feature,estimate,se,ci_low,ci_high,p,significant"]
        for r in self.rows:
            lines.append(
                f"{r.name},{r.estimate!r},{r.se!r},{r.ci_low!r},{r.ci_high!r},"
                f"{float(r.p)!r},{str(r.significant).lower()}"
            )
        return "\n".join(lines) + "\n"


def wald_report(model: LogisticModel, X) -> CoefficientReport:
    """Wald SEs from the inverse observed information (X'WX)^-1.

    Only meaningful at lambda = 0 (penalized SEs are out of scope).
    """
    if model.ridge_lambda != 0.0:
        raise LinModError("Wald standard errors are reported only for unpenalized fits")
    values = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
    n = values.shape[0]
    design = np.hstack([np.ones((n, 1)), values])
    p = _sigmoid(design @ np.concatenate(([model.intercept], model.coefficients)))
    w = p * (1.0 - p)
    info = design.T @ (design * w[:, None])

    # detect dependent columns before inverting
    rank = np.linalg.matrix_rank(info)
    if rank < info.shape[0]:
        _, _, vt = np.linalg.svd(info)
        null_weights = np.abs(vt[rank:]).max(axis=0)
        names = ["(intercept)"] + list(model.column_names)
        dependent = [names[j] for j in np.flatnonzero(null_weights > 1e-8)]
        raise SingularInformationError(dependent)

    cov = np.linalg.inv(info)
    ses = np.sqrt(np.diag(cov))
    estimates = np.concatenate(([model.intercept], model.coefficients))
    names = ["(intercept)"] + list(model.column_names)
    rows = []
    for name, est, se in zip(names, estimates, ses):
        z = est / se if se > 0 else 0.0
        p_val = float(2.0 * ndtr(-abs(z)))
        rows.append(
            CoefficientRow(
                name=name,
                estimate=float(est),
                se=float(se),
                ci_low=float(est - Z_95 * se),
                ci_high=float(est + Z_95 * se),
                z=float(z),
                p=p_val,
                significant=p_val < 0.05,
            )
        )
    return CoefficientReport(rows=tuple(rows))


def rank_coefficients(report: CoefficientReport, include_intercept: bool = False) -> list[CoefficientRow]:
    """Descending by |estimate|; ties break by column name."""
    rows = [r for r in report.rows if include_intercept or r.name != "(intercept)"]
    return sorted(rows, key=lambda r: (-abs(r.estimate), r.name))


def cross_validate_auc(
    records,
    labels,
    predictors: list[str],
    k: int,
    seed: int,
    ridge_lambda: float = 0.0,
) -> tuple[list[float], float]:
    """Stratified k-fold AUROC; every fold refits preprocessing on its own
    training portion (no leakage)."""
    from .features import fit_preprocess, stratified_kfold

    labels = np.asarray(labels)
    folds = stratified_kfold(labels, k, seed)
    all_idx = np.arange(labels.size)
    aucs = []
    for fold_i, test_idx in enumerate(folds):
        train_mask = np.ones(labels.size, dtype=bool)
        train_mask[test_idx] = False
        train_idx = all_idx[train_mask]
        train_records = [records[i] for i in train_idx]
        test_records = [records[i] for i in test_idx]
        try:
            prep = fit_preprocess(
                train_records, predictors, drop_first=True, prune_threshold=None,
                impute_missing=True,
            )
            X_train = prep.transform_records(train_records)
            X_test = prep.transform_records(test_records)
            model = fit_logistic(X_train, labels[train_idx], ridge_lambda=ridge_lambda)
            scores = predict_proba(model, X_test)
        except Exception as exc:
            raise LinModError(f"fold {fold_i}: {exc}") from exc
        aucs.append(roc_auc(scores, labels[test_idx]))
    return aucs, float(np.mean(aucs))
