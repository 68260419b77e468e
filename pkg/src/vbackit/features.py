"""Feature engineering: imputation, one-hot encoding, standardization,
correlation pruning, stratified splits, and class weights.

Two preprocessing paths share this module: the logistic path imputes
missing predictors and drops one reference level per categorical; the
MLP/GBT path assumes complete cases and keeps every level. Indicator
columns pass through the scaler like numeric columns, so coefficients are
interpreted on the scaled scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .records import DeliveryRecord, field_kind

class FeatureError(Exception):
    pass


class AllMissingError(FeatureError):
    """A predictor column has zero stated values, so no statistic exists."""


class UnseenLevelError(FeatureError):
    def __init__(self, field_name: str, level: str, allowed: tuple[str, ...]):
        super().__init__(f"unseen level {level!r} for field {field_name!r}; allowed: {allowed}")
        self.field_name = field_name
        self.level = level
        self.allowed = allowed


@dataclass(frozen=True)
class ColumnMeta:
    """Lineage of one matrix column back to its source field."""

    source_field: str
    level: str  # category level, or "numeric"
    mean: float = 0.0
    sd: float = 1.0


@dataclass
class FeatureMatrix:
    values: np.ndarray
    column_meta: list[ColumnMeta]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise FeatureError("feature matrix must be 2-D")
        if self.values.shape[1] != len(self.column_meta):
            raise FeatureError("column_meta length must equal column count")
        if not np.isfinite(self.values).all():
            raise FeatureError("feature matrix contains non-finite entries")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column_names(self) -> list[str]:
        return [
            m.source_field if m.level == "numeric" else f"{m.source_field}={m.level}"
            for m in self.column_meta
        ]


def impute(records: list[DeliveryRecord], predictors: list[str]) -> list[DeliveryRecord]:
    """Fill not-stated predictor values: mode for categorical, median for numeric.

    Statistics come from stated values only. Mode ties break toward the
    lexicographically smallest level so the result is deterministic.
    """
    fills = {}
    for name in predictors:
        stated = [r.get(name) for r in records if r.get(name) is not None]
        if not stated:
            raise AllMissingError(f"predictor {name!r} has zero stated values")
        if field_kind(name) == "numeric":
            fills[name] = float(np.median(stated))
        else:
            counts: dict[str, int] = {}
            for value in stated:
                counts[value] = counts.get(value, 0) + 1
            fills[name] = min(counts, key=lambda lvl: (-counts[lvl], lvl))

    out = []
    for record in records:
        changes = {
            name: fills[name] for name in predictors if record.get(name) is None
        }
        out.append(record.replace(**changes) if changes else record)
    return out


@dataclass(frozen=True)
class OneHotEncoder:
    """Fitted encoder: category levels per field, in lexicographic order."""

    predictors: tuple[str, ...]
    levels: dict[str, tuple[str, ...]]
    drop_first: bool = False

    def transform(self, records: list[DeliveryRecord]) -> FeatureMatrix:
        meta = self.column_meta()
        out = np.zeros((len(records), len(meta)), dtype=np.float64)
        col = 0
        for name in self.predictors:
            if field_kind(name) == "numeric":
                for i, record in enumerate(records):
                    value = record.get(name)
                    if value is None:
                        raise FeatureError(f"not-stated value in numeric field {name!r} at row {i}")
                    out[i, col] = value
                col += 1
            else:
                allowed = self.levels[name]
                index = {lvl: j for j, lvl in enumerate(allowed)}
                start = 1 if self.drop_first else 0
                for i, record in enumerate(records):
                    value = record.get(name)
                    if value not in index:
                        raise UnseenLevelError(name, value, allowed)
                    j = index[value]
                    if j >= start:
                        out[i, col + j - start] = 1.0
                col += len(allowed) - start
        return FeatureMatrix(values=out, column_meta=meta)

    def column_meta(self) -> list[ColumnMeta]:
        meta = []
        for name in self.predictors:
            if field_kind(name) == "numeric":
                meta.append(ColumnMeta(source_field=name, level="numeric"))
            else:
                start = 1 if self.drop_first else 0
                for level in self.levels[name][start:]:
                    meta.append(ColumnMeta(source_field=name, level=level))
        return meta


def fit_one_hot(
    records: list[DeliveryRecord], predictors: list[str], drop_first: bool = False
) -> OneHotEncoder:
    levels = {}
    for name in predictors:
        if field_kind(name) == "categorical":
            seen = {r.get(name) for r in records}
            if None in seen:
                raise FeatureError(f"not-stated value in categorical field {name!r}; impute or filter first")
            levels[name] = tuple(sorted(seen))
    return OneHotEncoder(predictors=tuple(predictors), levels=levels, drop_first=drop_first)


def one_hot_encode(
    records: list[DeliveryRecord], predictors: list[str], drop_first: bool = False
) -> tuple[FeatureMatrix, OneHotEncoder]:
    """Fit an encoder on the records and transform them in one step."""
    encoder = fit_one_hot(records, predictors, drop_first=drop_first)
    return encoder.transform(records), encoder


@dataclass(frozen=True)
class ScalerParams:
    """Per-column mean/sd fit on training rows; zero-variance columns dropped.

    Population (divide-by-n) standard deviation throughout.
    """

    means: np.ndarray
    sds: np.ndarray
    kept: np.ndarray  # bool mask over input columns
    dropped_columns: tuple[str, ...] = ()


def fit_standardizer(matrix: FeatureMatrix, rows: np.ndarray | None = None) -> ScalerParams:
    values = matrix.values if rows is None else matrix.values[rows]
    means = values.mean(axis=0)
    sds = values.std(axis=0)  # ddof=0
    kept = sds > 0.0
    dropped = tuple(
        name for name, keep in zip(matrix.column_names(), kept) if not keep
    )
    return ScalerParams(means=means, sds=sds, kept=kept, dropped_columns=dropped)


def apply_standardizer(matrix: FeatureMatrix, params: ScalerParams) -> FeatureMatrix:
    kept = params.kept
    values = (matrix.values[:, kept] - params.means[kept]) / params.sds[kept]
    meta = [
        ColumnMeta(m.source_field, m.level, mean=float(mu), sd=float(sd))
        for m, mu, sd, keep in zip(matrix.column_meta, params.means, params.sds, kept)
        if keep
    ]
    return FeatureMatrix(values=values, column_meta=meta)


@dataclass(frozen=True)
class PruneReport:
    """(removed column, earliest high-correlation partner, r) triples."""

    removed: tuple[tuple[str, str, float], ...]
    removed_indices: tuple[int, ...]


def prune_correlated(
    matrix: FeatureMatrix, threshold: float = 0.95
) -> tuple[FeatureMatrix, PruneReport]:
    """Drop the later column of every pair with |r| >= threshold.

    Greedy in column order: column j is marked when any earlier column i has
    |r_ij| >= threshold, whether or not i was itself marked (the classic
    upper-triangle rule). The boundary is inclusive so exact duplicates are
    removed even at threshold 1.0.
    """
    if not 0.0 < threshold <= 1.0:
        raise FeatureError(f"threshold must be in (0, 1], got {threshold}")
    values = matrix.values
    n_cols = values.shape[1]
    if n_cols < 2:
        return matrix, PruneReport(removed=(), removed_indices=())

    sds = values.std(axis=0)
    centered = values - values.mean(axis=0)
    denom = np.where(sds > 0, sds, 1.0)
    corr = (centered / denom).T @ (centered / denom) / values.shape[0]
    corr[np.ix_(sds == 0, np.arange(n_cols))] = 0.0
    corr[np.ix_(np.arange(n_cols), sds == 0)] = 0.0

    names = matrix.column_names()
    removed, removed_idx = [], []
    # 1e-12 slack keeps exact duplicates (|r| == 1 up to rounding) inside the
    # inclusive boundary even at threshold 1.0
    for j in range(1, n_cols):
        partners = np.flatnonzero(np.abs(corr[:j, j]) >= threshold - 1e-12)
        if partners.size:
            i = int(partners[0])
            removed.append((names[j], names[i], float(corr[i, j])))
            removed_idx.append(j)

    kept_mask = np.ones(n_cols, dtype=bool)
    kept_mask[removed_idx] = False
    pruned = FeatureMatrix(
        values=values[:, kept_mask],
        column_meta=[m for m, keep in zip(matrix.column_meta, kept_mask) if keep],
    )
    return pruned, PruneReport(removed=tuple(removed), removed_indices=tuple(removed_idx))


def stratified_split(
    labels: np.ndarray, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Class-preserving train/test index split, deterministic per seed."""
    labels = np.asarray(labels)
    if not 0.0 < test_fraction < 1.0:
        raise FeatureError(f"test_fraction must be in (0, 1), got {test_fraction}")
    classes = np.unique(labels)
    if classes.size < 2:
        raise FeatureError("both classes must be present")
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise FeatureError(f"class {cls} has fewer than 2 members")
        idx = rng.permutation(idx)
        n_test = int(round(idx.size * test_fraction))
        n_test = min(max(n_test, 1), idx.size - 1)
        test_parts.append(idx[:n_test])
        train_parts.append(idx[n_test:])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return train, test


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """k disjoint, exhaustive folds with per-class proportions within one member."""
    labels = np.asarray(labels)
    if k < 2:
        raise FeatureError(f"k must be >= 2, got {k}")
    classes = np.unique(labels)
    if classes.size < 2:
        raise FeatureError("both classes must be present")
    rng = np.random.default_rng(seed)
    folds: list[list[np.ndarray]] = [[] for _ in range(k)]
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise FeatureError(f"class {cls} has {idx.size} members, fewer than k={k}")
        idx = rng.permutation(idx)
        for f in range(k):
            folds[f].append(idx[f::k])
    return [np.sort(np.concatenate(parts)) for parts in folds]


@dataclass(frozen=True)
class ClassWeights:
    """Balanced heuristic w_c = N / (2 * N_c)."""

    weight_for_label_0: float
    weight_for_label_1: float

    def as_array(self) -> np.ndarray:
        return np.array([self.weight_for_label_0, self.weight_for_label_1])


def compute_class_weights(labels: np.ndarray) -> ClassWeights:
    labels = np.asarray(labels)
    n = labels.size
    n1 = int(labels.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise FeatureError("both classes must be present to compute class weights")
    return ClassWeights(weight_for_label_0=n / (2.0 * n0), weight_for_label_1=n / (2.0 * n1))


# ---------------------------------------------------------------------------
# Fitted end-to-end preprocessing, shared by training and serving.


@dataclass
class FittedPreprocess:
    """Encoder + scaler + prune mask, reconstructing the training-time
    feature order exactly for any new raw record."""

    encoder: OneHotEncoder
    scaler: ScalerParams
    prune_mask: np.ndarray  # bool over scaled columns
    column_meta: list[ColumnMeta] = field(default_factory=list)
    numeric_domains: dict[str, tuple[float, float]] = field(default_factory=dict)
    impute_values: dict[str, float | str] = field(default_factory=dict)

    def transform_records(self, records: list[DeliveryRecord]) -> FeatureMatrix:
        if self.impute_values:
            records = [
                r.replace(**{k: v for k, v in self.impute_values.items() if r.get(k) is None})
                if any(r.get(k) is None for k in self.impute_values)
                else r
                for r in records
            ]
        encoded = self.encoder.transform(records)
        scaled = apply_standardizer(encoded, self.scaler)
        values = scaled.values[:, self.prune_mask]
        meta = [m for m, keep in zip(scaled.column_meta, self.prune_mask) if keep]
        return FeatureMatrix(values=values, column_meta=meta)


def fit_preprocess(
    records: list[DeliveryRecord],
    predictors: list[str],
    drop_first: bool = False,
    prune_threshold: float | None = 0.95,
    impute_missing: bool = False,
) -> FittedPreprocess:
    """Fit the full preprocessing chain on (training) records."""
    impute_values: dict[str, float | str] = {}
    if impute_missing:
        fills = {}
        for name in predictors:
            stated = [r.get(name) for r in records if r.get(name) is not None]
            if not stated:
                raise AllMissingError(f"predictor {name!r} has zero stated values")
            if field_kind(name) == "numeric":
                fills[name] = float(np.median(stated))
            else:
                counts: dict[str, int] = {}
                for v in stated:
                    counts[v] = counts.get(v, 0) + 1
                fills[name] = min(counts, key=lambda lvl: (-counts[lvl], lvl))
        impute_values = fills
        records = impute(records, predictors)

    encoder = fit_one_hot(records, predictors, drop_first=drop_first)
    encoded = encoder.transform(records)
    scaler = fit_standardizer(encoded)
    scaled = apply_standardizer(encoded, scaler)
    if prune_threshold is not None:
        pruned, report = prune_correlated(scaled, prune_threshold)
        prune_mask = np.ones(scaled.n_cols, dtype=bool)
        prune_mask[list(report.removed_indices)] = False
        meta = pruned.column_meta
    else:
        prune_mask = np.ones(scaled.n_cols, dtype=bool)
        meta = scaled.column_meta

    domains = {}
    for name in predictors:
        if field_kind(name) == "numeric":
            column = np.array([r.get(name) for r in records], dtype=np.float64)
            domains[name] = (float(column.min()), float(column.max()))

    return FittedPreprocess(
        encoder=encoder,
        scaler=scaler,
        prune_mask=prune_mask,
        column_meta=meta,
        numeric_domains=domains,
        impute_values=impute_values,
    )
