"""Gradient-boosted decision trees with a pluggable second-order objective.

The shipped objective is the alpha-weighted log loss: the label-1 term of
the binary cross-entropy is multiplied by alpha, adjusting both gradient
and Hessian. Which clinical class sits on label 1 is the caller's mapping;
`alpha_on="label0"` mirrors the weight onto the other term.

Split finding is exact over sorted feature values (midpoint candidates),
depth-wise, with the per-level scan compiled by numba. Row subsampling is
without replacement. With subsample = colsample = 1 the RNG is never
consulted, so training is seed-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .metrics import roc_auc

PROB_CLAMP = 1e-12


class GbtError(Exception):
    pass


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 600
    learning_rate: float = 0.01
    max_depth: int = 5
    subsample: float = 0.9
    colsample: float = 0.8
    early_stop_rounds: int = 10
    alpha: float = 2.5
    leaf_lambda: float = 1.0
    min_split_gain: float = 0.0
    seed: int = 0
    alpha_on: str = "label1"
    auc_improvement: float = 1e-6

    def __post_init__(self):
        if self.learning_rate < 0:
            raise GbtError("learning rate must be non-negative")
        if self.max_depth < 1:
            raise GbtError("max depth must be >= 1")
        if not (0.0 < self.subsample <= 1.0 and 0.0 < self.colsample <= 1.0):
            raise GbtError("subsample and colsample must be in (0, 1]")
        if self.alpha <= 0:
            raise GbtError("alpha must be positive")
        if self.alpha_on not in ("label1", "label0"):
            raise GbtError("alpha_on must be 'label1' or 'label0'")


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(t: np.ndarray) -> np.ndarray:
    # stable log(1 + e^t); -ln(sigmoid(z)) = softplus(-z)
    return np.where(t > 0, t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def weighted_logloss(margin, label, alpha: float) -> np.ndarray:
    """Per-sample loss L = -[alpha * y * ln p + (1-y) * ln(1-p)], p = sigmoid(z)."""
    z = np.asarray(margin, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    return alpha * y * _softplus(-z) + (1.0 - y) * _softplus(z)


def weighted_logloss_grad_hess(margin, label, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of the per-sample alpha-weighted log loss in z.

    g = alpha*y*(p-1) + (1-y)*p,  h = p(1-p) * (alpha*y + (1-y)).
    alpha = 1 reduces exactly to (p - y, p(1-p)).
    """
    if alpha <= 0:
        raise GbtError("alpha must be positive")
    z = np.asarray(margin, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    p = sigmoid(z)
    g = alpha * y * (p - 1.0) + (1.0 - y) * p
    h = p * (1.0 - p) * (alpha * y + (1.0 - y))
    return g, h


@dataclass(frozen=True)
class Tree:
    """Flat node table; feature == -1 marks a leaf."""

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64, leaf weight

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        internal = self.feature[node] >= 0
        while internal.any():
            idx = np.flatnonzero(internal)
            cur = node[idx]
            goes_left = X[idx, self.feature[cur]] < self.threshold[cur]
            node[idx] = np.where(goes_left, self.left[cur], self.right[cur])
            internal = self.feature[node] >= 0
        return self.value[node]

    def scaled(self, factor: float) -> "Tree":
        return Tree(
            feature=self.feature,
            threshold=self.threshold,
            left=self.left,
            right=self.right,
            value=self.value * factor,
        )

    def max_depth(self) -> int:
        depth = {0: 0}
        best = 0
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
                best = max(best, depth[i] + 1)
        return best

    def dump_text(self) -> str:
        lines = []

        def walk(i: int, indent: int):
            pad = "  " * indent
            if self.feature[i] < 0:
                lines.append(f"{pad}leaf value={self.value[i]:.6g}")
            else:
                lines.append(
                    f"{pad}node feature={self.feature[i]} threshold={self.threshold[i]:.6g}"
                )
                walk(self.left[i], indent + 1)
                walk(self.right[i], indent + 1)

        walk(0, 0)
        return "\n".join(lines) + "\n"


@njit(cache=True, parallel=True)
def _scan_level(
    x_t,  # (F, n) feature-major values
    sorted_idx,  # (F, n) row order per feature, ascending value
    in_round,  # (n,) bool: row participates in this tree
    node_slot,  # (n,) int32 slot of active splittable node, -1 otherwise
    g,
    h,
    n_slots,
    g_tot,  # (slots,)
    h_tot,
    lam,
):
    n_feat, n_rows = x_t.shape
    best_gain = np.full((n_feat, n_slots), -1.0)
    best_thr = np.zeros((n_feat, n_slots))
    best_gl = np.zeros((n_feat, n_slots))
    best_hl = np.zeros((n_feat, n_slots))
    best_nl = np.zeros((n_feat, n_slots), dtype=np.int64)
    for f in prange(n_feat):
        gl = np.zeros(n_slots)
        hl = np.zeros(n_slots)
        nl = np.zeros(n_slots, dtype=np.int64)
        prev = np.zeros(n_slots)
        for k in range(n_rows):
            row = sorted_idx[f, k]
            if not in_round[row]:
                continue
            slot = node_slot[row]
            if slot < 0:
                continue
            v = x_t[f, row]
            if nl[slot] > 0 and v != prev[slot]:
                gr = g_tot[slot] - gl[slot]
                hr = h_tot[slot] - hl[slot]
                dl = hl[slot] + lam
                dr = hr + lam
                dp = h_tot[slot] + lam
                gain = 0.0
                if dl > 0.0:
                    gain += gl[slot] * gl[slot] / dl
                if dr > 0.0:
                    gain += gr * gr / dr
                if dp > 0.0:
                    gain -= g_tot[slot] * g_tot[slot] / dp
                gain *= 0.5
                if gain > best_gain[f, slot]:
                    best_gain[f, slot] = gain
                    best_thr[f, slot] = 0.5 * (prev[slot] + v)
                    best_gl[f, slot] = gl[slot]
                    best_hl[f, slot] = hl[slot]
                    best_nl[f, slot] = nl[slot]
            gl[slot] += g[row]
            hl[slot] += h[row]
            nl[slot] += 1
            prev[slot] = v
    return best_gain, best_thr, best_gl, best_hl, best_nl


def _leaf_value(g_sum: float, h_sum: float, lam: float) -> float:
    denom = h_sum + lam
    return -g_sum / denom if denom > 0 else 0.0


class _TreeBuilder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def finish(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value, dtype=np.float64),
        )


def fit_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    config: GbtConfig,
    columns: np.ndarray | None = None,
    row_mask: np.ndarray | None = None,
    sorted_idx: np.ndarray | None = None,
) -> Tree:
    """Grow one tree depth-wise by exact greedy split search.

    Gain = 0.5*[GL^2/(HL+lam) + GR^2/(HR+lam) - (GL+GR)^2/(HL+HR+lam)];
    a node splits only when the best gain exceeds min_split_gain. Leaf
    weight is -G/(H+lam). Candidate thresholds are midpoints between
    consecutive distinct sorted values within the node.
    """
    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if (h < 0).any():
        raise GbtError("hessians must be non-negative")
    n, n_feat_all = X.shape
    if columns is None:
        columns = np.arange(n_feat_all)
    columns = np.asarray(columns, dtype=np.int64)
    if row_mask is None:
        row_mask = np.ones(n, dtype=bool)
    x_t = np.ascontiguousarray(X.T[columns])
    if sorted_idx is None:
        sorted_idx = np.argsort(x_t, axis=1, kind="stable").astype(np.int32)
    else:
        sorted_idx = np.ascontiguousarray(sorted_idx[columns])

    builder = _TreeBuilder()
    root = builder.add()
    node_slot = np.where(row_mask, 0, -1).astype(np.int32)
    # node ids of the current level's slots
    slot_nodes = [root]
    g_tot = np.array([g[row_mask].sum()])
    h_tot = np.array([h[row_mask].sum()])
    n_tot = np.array([int(row_mask.sum())], dtype=np.int64)
    lam = config.leaf_lambda

    for depth in range(config.max_depth):
        if not slot_nodes:
            break
        gains, thrs, gls, hls, nls = _scan_level(
            x_t,
            sorted_idx,
            row_mask,
            node_slot,
            g,
            h,
            len(slot_nodes),
            g_tot,
            h_tot,
            lam,
        )
        # best feature per slot: highest gain, earliest feature on ties
        best_f = gains.argmax(axis=0)
        best_gain = gains[best_f, np.arange(len(slot_nodes))]

        new_slot_nodes = []
        new_g, new_h, new_n = [], [], []
        remap = np.full((len(slot_nodes), 2), -1, dtype=np.int32)
        split_feature = np.full(len(slot_nodes), -1, dtype=np.int64)
        split_thr = np.zeros(len(slot_nodes))
        for s, node in enumerate(slot_nodes):
            f = int(best_f[s])
            if best_gain[s] <= config.min_split_gain or nls[f, s] == 0 or nls[f, s] == n_tot[s]:
                builder.value[node] = _leaf_value(g_tot[s], h_tot[s], lam)
                continue
            li = builder.add()
            ri = builder.add()
            builder.feature[node] = int(columns[f])
            builder.threshold[node] = float(thrs[f, s])
            builder.left[node] = li
            builder.right[node] = ri
            split_feature[s] = f
            split_thr[s] = thrs[f, s]
            remap[s, 0] = len(new_slot_nodes)
            new_slot_nodes.append(li)
            new_g.append(gls[f, s])
            new_h.append(hls[f, s])
            new_n.append(int(nls[f, s]))
            remap[s, 1] = len(new_slot_nodes)
            new_slot_nodes.append(ri)
            new_g.append(g_tot[s] - gls[f, s])
            new_h.append(h_tot[s] - hls[f, s])
            new_n.append(int(n_tot[s]) - int(nls[f, s]))

        if not new_slot_nodes:
            break
        # reassign rows to child slots
        active = node_slot >= 0
        rows = np.flatnonzero(active)
        slots = node_slot[rows]
        feat = split_feature[slots]
        splittable = feat >= 0
        rows_s = rows[splittable]
        slots_s = slots[splittable]
        goes_left = (
            x_t[feat[splittable], rows_s] < split_thr[slots_s]
        )
        node_slot[rows] = -1
        node_slot[rows_s] = np.where(
            goes_left, remap[slots_s, 0], remap[slots_s, 1]
        ).astype(np.int32)

        slot_nodes = new_slot_nodes
        g_tot = np.array(new_g)
        h_tot = np.array(new_h)
        n_tot = np.array(new_n, dtype=np.int64)

    # anything still active at max depth becomes a leaf
    for s, node in enumerate(slot_nodes):
        builder.value[node] = _leaf_value(g_tot[s], h_tot[s], lam)
    return builder.finish()


@dataclass
class GbtModel:
    config: GbtConfig
    base_score: float  # initial margin (log-odds of training prevalence)
    trees: list[Tree] = field(default_factory=list)
    best_iteration: int = -1  # inclusive; -1 means base score only
    val_auc_trace: list[float] = field(default_factory=list)

    def margins(self, X, n_trees: int | None = None) -> np.ndarray:
        values = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
        limit = (self.best_iteration + 1) if n_trees is None else n_trees
        z = np.full(values.shape[0], self.base_score)
        for tree in self.trees[:limit]:
            z += tree.predict(values)
        return z

    def n_features(self) -> int | None:
        for tree in self.trees:
            internal = tree.feature[tree.feature >= 0]
            if internal.size:
                return int(internal.max()) + 1
        return None


def predict_proba(model: GbtModel, X) -> np.ndarray:
    """sigmoid(base + sum of stored tree outputs), clamped away from 0/1.

    Stored trees already carry the learning-rate scaling from training.
    """
    values = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
    needed = model.n_features()
    if needed is not None and values.shape[1] < needed:
        raise GbtError(f"column mismatch: model uses {needed} features, matrix has {values.shape[1]}")
    return np.clip(sigmoid(model.margins(values)), PROB_CLAMP, 1 - PROB_CLAMP)


def _grad_hess_any(config: GbtConfig, z: np.ndarray, y: np.ndarray):
    if config.alpha_on == "label1":
        return weighted_logloss_grad_hess(z, y, config.alpha)
    # alpha on the label-0 term: L = -[y ln p + alpha (1-y) ln(1-p)]
    p = sigmoid(z)
    g = y * (p - 1.0) + config.alpha * (1.0 - y) * p
    h = p * (1.0 - p) * (y + config.alpha * (1.0 - y))
    return g, h


def train_boosted(
    config: GbtConfig,
    X_train,
    y_train,
    X_val,
    y_val,
) -> GbtModel:
    """Boost with row/column subsampling and validation-AUC early stopping.

    Per round: sample rows (without replacement) and columns, compute
    (g, h) at current margins, fit a tree, add it eta-scaled, update all
    margins. Stops after `early_stop_rounds` rounds without an AUC
    improvement > auc_improvement; best_iteration marks the peak round.
    """
    X_train = X_train.values if hasattr(X_train, "values") else np.asarray(X_train, dtype=np.float64)
    X_val = X_val.values if hasattr(X_val, "values") else np.asarray(X_val, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if np.unique(y_val).size < 2:
        raise GbtError("validation set must contain both classes")

    n, n_feat = X_train.shape
    prevalence = float(np.clip(y_train.mean(), PROB_CLAMP, 1 - PROB_CLAMP))
    base = float(np.log(prevalence / (1.0 - prevalence)))
    model = GbtModel(config=config, base_score=base)

    rng = np.random.default_rng(config.seed)
    x_t = np.ascontiguousarray(X_train.T)
    sorted_idx = np.argsort(x_t, axis=1, kind="stable").astype(np.int32)

    margins = np.full(n, base)
    margins_val = np.full(X_val.shape[0], base)
    best_auc = -np.inf
    stale = 0
    n_sample = int(round(n * config.subsample))
    n_cols = max(1, int(round(n_feat * config.colsample)))

    for _ in range(config.rounds):
        if config.subsample < 1.0:
            row_mask = np.zeros(n, dtype=bool)
            row_mask[rng.choice(n, size=n_sample, replace=False)] = True
        else:
            row_mask = np.ones(n, dtype=bool)
        if config.colsample < 1.0:
            columns = np.sort(rng.choice(n_feat, size=n_cols, replace=False))
        else:
            columns = np.arange(n_feat)

        g, h = _grad_hess_any(config, margins, y_train)
        tree = fit_tree(
            X_train, g, h, config, columns=columns, row_mask=row_mask, sorted_idx=sorted_idx
        ).scaled(config.learning_rate)
        model.trees.append(tree)
        delta = tree.predict(X_train)
        margins += delta
        margins_val += tree.predict(X_val)

        val_auc = roc_auc(margins_val, y_val)
        model.val_auc_trace.append(val_auc)
        if val_auc > best_auc + config.auc_improvement:
            best_auc = val_auc
            model.best_iteration = len(model.trees) - 1
            stale = 0
        else:
            stale += 1
            if stale >= config.early_stop_rounds:
                break
    if model.best_iteration < 0:
        model.best_iteration = len(model.trees) - 1
    return model
