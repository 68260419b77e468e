"""Feed-forward binary classifier trained from scratch.

Architecture: per hidden layer, affine -> batch norm -> leaky ReLU ->
dropout (inverted scaling); sigmoid output. Class-weighted binary
cross-entropy with an L2 penalty on weight matrices, optimized with Adam,
early-stopped on validation AUC with best-weight restore.

Batch norm accumulates the same biased (divide-by-n) batch variance it
normalizes with, so inference converges to the train-mode output once the
running statistics reach stationarity on a fixed batch.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .metrics import roc_auc

# small enough that normalized batch variance stays within 1e-5 of 1.0 for
# any unit with variance above 1e-3; float64 makes a larger guard unnecessary
BN_EPS = 1e-8
PROB_CLAMP = 1e-12


class MlpError(Exception):
    pass


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (128, 64, 32)
    leaky_slope: float = 0.01
    dropout_rates: tuple[float, ...] = (0.4, 0.3, 0.0)
    l2_lambda: float = 1e-4
    learning_rate: float = 1e-4
    batch_size: int = 256
    max_epochs: int = 60
    patience: int = 5
    seed: int = 0
    bn_momentum: float = 0.99
    auc_improvement: float = 1e-5  # strictly-greater margin for patience

    def __post_init__(self):
        if any(s <= 0 for s in self.hidden_sizes):
            raise MlpError("hidden sizes must be positive")
        if len(self.dropout_rates) != len(self.hidden_sizes):
            raise MlpError("one dropout rate per hidden layer required")
        if any(not 0.0 <= r < 1.0 for r in self.dropout_rates):
            raise MlpError("dropout rates must be in [0, 1)")
        if self.learning_rate <= 0:
            raise MlpError("learning rate must be positive")


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class MlpModel:
    config: MlpConfig
    n_features: int
    hidden: list[Layer]
    out_weight: np.ndarray  # (last_hidden, 1)
    out_bias: np.ndarray  # (1,)

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.hidden:
            params.extend([layer.weight, layer.bias, layer.gamma, layer.beta])
        params.extend([self.out_weight, self.out_bias])
        return params

    def weight_matrices(self) -> list[np.ndarray]:
        return [layer.weight for layer in self.hidden] + [self.out_weight]


def init_model(config: MlpConfig, n_features: int) -> MlpModel:
    """He-style scaled normal init (suits leaky ReLU), seeded."""
    rng = np.random.default_rng(config.seed)
    hidden = []
    fan_in = n_features
    for size in config.hidden_sizes:
        weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, size))
        hidden.append(
            Layer(
                weight=weight,
                bias=np.zeros(size),
                gamma=np.ones(size),
                beta=np.zeros(size),
                running_mean=np.zeros(size),
                running_var=np.ones(size),
            )
        )
        fan_in = size
    out_weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, 1))
    return MlpModel(
        config=config,
        n_features=n_features,
        hidden=hidden,
        out_weight=out_weight,
        out_bias=np.zeros(1),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ForwardCache:
    """Per-layer intermediates needed for exact backprop."""

    x: np.ndarray
    layer_inputs: list[np.ndarray] = field(default_factory=list)
    pre_bn: list[np.ndarray] = field(default_factory=list)
    bn_mean: list[np.ndarray] = field(default_factory=list)
    bn_var: list[np.ndarray] = field(default_factory=list)
    x_hat: list[np.ndarray] = field(default_factory=list)
    pre_act: list[np.ndarray] = field(default_factory=list)
    drop_masks: list[np.ndarray | None] = field(default_factory=list)
    probs: np.ndarray | None = None


def forward(
    model: MlpModel,
    batch: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
    update_running: bool = False,
) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass. Train mode uses batch statistics and dropout; infer
    mode uses running statistics and no dropout (bit-for-bit deterministic).
    """
    if mode not in ("train", "infer"):
        raise MlpError(f"mode must be 'train' or 'infer', got {mode!r}")
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.n_features:
        raise MlpError(
            f"batch must be (n, {model.n_features}), got {batch.shape}"
        )
    train = mode == "train"
    if train and rng is None and any(r > 0 for r in model.config.dropout_rates):
        raise MlpError("train-mode forward with dropout requires an rng")

    cache = ForwardCache(x=batch)
    h = batch
    cfg = model.config
    for layer, rate in zip(model.hidden, cfg.dropout_rates):
        cache.layer_inputs.append(h)
        z = h @ layer.weight + layer.bias
        cache.pre_bn.append(z)
        if train:
            mean = z.mean(axis=0)
            var = z.var(axis=0)  # biased, matches running accumulation
            if update_running:
                m = cfg.bn_momentum
                layer.running_mean = m * layer.running_mean + (1 - m) * mean
                layer.running_var = m * layer.running_var + (1 - m) * var
        else:
            mean, var = layer.running_mean, layer.running_var
        x_hat = (z - mean) / np.sqrt(var + BN_EPS)
        cache.bn_mean.append(mean)
        cache.bn_var.append(var)
        cache.x_hat.append(x_hat)
        a = layer.gamma * x_hat + layer.beta
        cache.pre_act.append(a)
        h = np.where(a > 0, a, cfg.leaky_slope * a)
        if train and rate > 0:
            mask = (rng.random(h.shape) >= rate) / (1.0 - rate)
            h = h * mask
            cache.drop_masks.append(mask)
        else:
            cache.drop_masks.append(None)
    cache.layer_inputs.append(h)
    logits = h @ model.out_weight + model.out_bias
    probs = _sigmoid(logits[:, 0])
    cache.probs = probs
    return probs, cache


def weighted_bce(
    probs: np.ndarray,
    labels: np.ndarray,
    class_weights,
    model: MlpModel | None = None,
    l2_lambda: float | None = None,
) -> float:
    """Mean of -w_y [y ln p + (1-y) ln(1-p)] plus lambda * sum ||W||^2."""
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1 - PROB_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    w = np.asarray(class_weights.as_array() if hasattr(class_weights, "as_array") else class_weights)
    sample_w = np.where(y == 1, w[1], w[0])
    data = float(np.mean(-sample_w * (y * np.log(p) + (1 - y) * np.log(1 - p))))
    if model is not None:
        lam = model.config.l2_lambda if l2_lambda is None else l2_lambda
        data += lam * sum(float((wm**2).sum()) for wm in model.weight_matrices())
    return data


def backward(
    model: MlpModel,
    cache: ForwardCache,
    labels: np.ndarray,
    class_weights,
    l2_lambda: float | None = None,
) -> dict[str, list[np.ndarray]]:
    """Exact gradients of weighted_bce w.r.t. every parameter, including the
    through-batch-statistics batch-norm terms."""
    if cache.probs is None:
        raise MlpError("backward requires the cache from a train-mode forward pass")
    y = np.asarray(labels, dtype=np.float64)
    w = np.asarray(class_weights.as_array() if hasattr(class_weights, "as_array") else class_weights)
    cfg = model.config
    lam = cfg.l2_lambda if l2_lambda is None else l2_lambda
    n = y.size
    p = cache.probs

    # d(mean data loss)/d logit
    dz = (w[1] * y * (p - 1.0) + w[0] * (1.0 - y) * p)[:, None] / n

    grads_w: list[np.ndarray] = [None] * len(model.hidden)
    grads_b: list[np.ndarray] = [None] * len(model.hidden)
    grads_gamma: list[np.ndarray] = [None] * len(model.hidden)
    grads_beta: list[np.ndarray] = [None] * len(model.hidden)

    last_hidden = cache.layer_inputs[-1]
    grad_out_w = last_hidden.T @ dz + 2.0 * lam * model.out_weight
    grad_out_b = dz.sum(axis=0)
    dh = dz @ model.out_weight.T

    for li in range(len(model.hidden) - 1, -1, -1):
        layer = model.hidden[li]
        mask = cache.drop_masks[li]
        if mask is not None:
            dh = dh * mask
        a = cache.pre_act[li]
        da = dh * np.where(a > 0, 1.0, cfg.leaky_slope)
        x_hat = cache.x_hat[li]
        grads_gamma[li] = (da * x_hat).sum(axis=0)
        grads_beta[li] = da.sum(axis=0)

        dxhat = da * layer.gamma
        m = dxhat.shape[0]
        inv_std = 1.0 / np.sqrt(cache.bn_var[li] + BN_EPS)
        # full batch-norm backward (batch statistics are functions of z)
        dzpre = (
            inv_std
            / m
            * (m * dxhat - dxhat.sum(axis=0) - x_hat * (dxhat * x_hat).sum(axis=0))
        )
        grads_w[li] = cache.layer_inputs[li].T @ dzpre + 2.0 * lam * layer.weight
        grads_b[li] = dzpre.sum(axis=0)
        dh = dzpre @ layer.weight.T

    return {
        "weights": grads_w,
        "biases": grads_b,
        "gammas": grads_gamma,
        "betas": grads_beta,
        "out_weight": grad_out_w,
        "out_bias": grad_out_b,
    }


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    t: int,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-7,
) -> None:
    """Standard Adam with bias correction, updating params in place; t >= 1."""
    if t < 1:
        raise MlpError("Adam step count t must be >= 1")
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _flat_grads(model: MlpModel, grads: dict) -> list[np.ndarray]:
    out = []
    for li in range(len(model.hidden)):
        out.extend([grads["weights"][li], grads["biases"][li], grads["gammas"][li], grads["betas"][li]])
    out.extend([grads["out_weight"], grads["out_bias"]])
    return out


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    train_auc: list[float] = field(default_factory=list)
    val_auc: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based

    def n_epochs(self) -> int:
        return len(self.val_auc)


def predict(model: MlpModel, X) -> np.ndarray:
    values = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
    probs, _ = forward(model, values, mode="infer")
    return np.clip(probs, PROB_CLAMP, 1 - PROB_CLAMP)


def train(
    config: MlpConfig,
    X_train,
    y_train,
    X_val,
    y_val,
    class_weights=None,
) -> tuple[MlpModel, TrainHistory]:
    """Mini-batch Adam with per-epoch validation AUC early stopping.

    Stops after `patience` consecutive epochs without an AUC improvement of
    at least config.auc_improvement, or at max_epochs; restores the
    parameters from the best-AUC epoch.
    """
    X_train = X_train.values if hasattr(X_train, "values") else np.asarray(X_train, dtype=np.float64)
    X_val = X_val.values if hasattr(X_val, "values") else np.asarray(X_val, dtype=np.float64)
    y_train = np.asarray(y_train)
    y_val = np.asarray(y_val)
    if np.unique(y_val).size < 2:
        raise MlpError("validation set must contain both classes (AUC undefined)")
    if class_weights is None:
        class_weights = np.array([1.0, 1.0])

    model = init_model(config, X_train.shape[1])
    rng = np.random.default_rng(config.seed + 1)
    params = model.parameters()
    state = AdamState.for_params(params)
    history = TrainHistory()

    best_auc = -np.inf
    best_snapshot = None
    best_epoch = 0
    stale = 0
    t = 0
    n = X_train.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if idx.size < 2:
                continue  # batch norm needs at least two rows
            t += 1
            probs, cache = forward(
                model, X_train[idx], mode="train", rng=rng, update_running=True
            )
            grads = backward(model, cache, y_train[idx], class_weights)
            adam_step(params, _flat_grads(model, grads), state, t, config.learning_rate)

        train_probs = predict(model, X_train)
        val_probs = predict(model, X_val)
        history.train_loss.append(weighted_bce(train_probs, y_train, class_weights, model))
        history.val_loss.append(weighted_bce(val_probs, y_val, class_weights, model))
        history.train_auc.append(
            roc_auc(train_probs, y_train) if np.unique(y_train).size > 1 else float("nan")
        )
        val_auc = roc_auc(val_probs, y_val)
        history.val_auc.append(val_auc)

        if val_auc > best_auc + config.auc_improvement:
            best_auc = val_auc
            best_epoch = epoch
            best_snapshot = (
                copy.deepcopy(model.hidden),
                model.out_weight.copy(),
                model.out_bias.copy(),
            )
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    if best_snapshot is not None:
        model.hidden, model.out_weight, model.out_bias = (
            copy.deepcopy(best_snapshot[0]),
            best_snapshot[1].copy(),
            best_snapshot[2].copy(),
        )
        # rebind: parameters list held by Adam is stale after restore, but
        # training is over, so only the model needs the best weights
    history.best_epoch = best_epoch
    return model, history
