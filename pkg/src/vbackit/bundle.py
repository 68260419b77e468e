"""Single-file model bundles: preprocessing parameters, model parameters,
decision threshold, and training metadata for any of the three families.

Format: magic + version, then named sections (JSON metadata or raw
little-endian arrays), then a CRC32 of the section payload. Arrays round
trip bit-exactly; bundles built from the same config and seed are
byte-identical.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import gbt as gbt_mod
from . import linmod as linmod_mod
from . import mlp as mlp_mod
from .features import FittedPreprocess, OneHotEncoder, ScalerParams
from .records import DeliveryRecord, field_kind

_MAGIC = b"VBMB"
_VERSION = 1

FAMILIES = ("logistic", "mlp", "gbt")


class BundleError(Exception):
    pass


class BundleVersionError(BundleError):
    pass


class BundleChecksumError(BundleError):
    pass


@dataclass
class ModelBundle:
    family: str
    preprocess: FittedPreprocess
    model: object
    threshold: float
    metadata: dict

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BundleError(f"unknown model family {self.family!r}")
        if not 0.0 < self.threshold < 1.0:
            raise BundleError(f"threshold must be in (0, 1), got {self.threshold}")

    def predict_matrix(self, X) -> np.ndarray:
        if self.family == "logistic":
            return linmod_mod.predict_proba(self.model, X)
        if self.family == "mlp":
            return mlp_mod.predict(self.model, X)
        return gbt_mod.predict_proba(self.model, X)

    def predict_records(self, records: list[DeliveryRecord]) -> np.ndarray:
        X = self.preprocess.transform_records(records)
        return self.predict_matrix(X)

    def predictor_fields(self) -> list[str]:
        return list(self.preprocess.encoder.predictors)


def _write_section(out: io.BytesIO, name: str, payload: bytes, kind: int) -> None:
    encoded = name.encode()
    out.write(struct.pack("<H", len(encoded)))
    out.write(encoded)
    out.write(struct.pack("<BQ", kind, len(payload)))
    out.write(payload)


def _array_payload(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    dtype = arr.dtype.newbyteorder("<")
    desc = dtype.str.encode()
    head = struct.pack("<H", len(desc)) + desc + struct.pack("<B", arr.ndim)
    head += b"".join(struct.pack("<Q", d) for d in arr.shape)
    return head + arr.astype(dtype, copy=False).tobytes()


def _parse_array(payload: bytes) -> np.ndarray:
    try:
        view = io.BytesIO(payload)
        (dlen,) = struct.unpack("<H", view.read(2))
        desc = view.read(dlen).decode()
        (ndim,) = struct.unpack("<B", view.read(1))
        shape = tuple(struct.unpack("<Q", view.read(8))[0] for _ in range(ndim))
        data = view.read()
        return np.frombuffer(data, dtype=np.dtype(desc)).reshape(shape).copy()
    except (struct.error, ValueError, TypeError, UnicodeDecodeError) as exc:
        raise BundleError(f"corrupted array section: {exc}") from exc


def _sections_for(bundlish: ModelBundle) -> list[tuple[str, int, bytes]]:
    prep = bundlish.preprocess
    meta = {
        "family": bundlish.family,
        "threshold": bundlish.threshold,
        "predictors": list(prep.encoder.predictors),
        "levels": {k: list(v) for k, v in prep.encoder.levels.items()},
        "drop_first": prep.encoder.drop_first,
        "scaler_dropped": list(prep.scaler.dropped_columns),
        "numeric_domains": {k: list(v) for k, v in prep.numeric_domains.items()},
        "impute_values": prep.impute_values,
        "metadata": bundlish.metadata,
    }
    sections: list[tuple[str, int, bytes]] = []
    arrays: dict[str, np.ndarray] = {
        "scaler_means": prep.scaler.means,
        "scaler_sds": prep.scaler.sds,
        "scaler_kept": prep.scaler.kept.astype(np.uint8),
        "prune_mask": prep.prune_mask.astype(np.uint8),
    }

    model = bundlish.model
    if bundlish.family == "logistic":
        meta["logistic"] = {
            "ridge_lambda": model.ridge_lambda,
            "column_names": model.column_names,
            "iterations": model.iterations,
            "converged": model.converged,
        }
        arrays["logistic_beta"] = np.concatenate(([model.intercept], model.coefficients))
    elif bundlish.family == "mlp":
        cfg = model.config
        meta["mlp"] = {
            "hidden_sizes": list(cfg.hidden_sizes),
            "leaky_slope": cfg.leaky_slope,
            "dropout_rates": list(cfg.dropout_rates),
            "l2_lambda": cfg.l2_lambda,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "max_epochs": cfg.max_epochs,
            "patience": cfg.patience,
            "seed": cfg.seed,
            "bn_momentum": cfg.bn_momentum,
            "n_features": model.n_features,
        }
        for i, layer in enumerate(model.hidden):
            arrays[f"mlp_w{i}"] = layer.weight
            arrays[f"mlp_b{i}"] = layer.bias
            arrays[f"mlp_gamma{i}"] = layer.gamma
            arrays[f"mlp_beta{i}"] = layer.beta
            arrays[f"mlp_rmean{i}"] = layer.running_mean
            arrays[f"mlp_rvar{i}"] = layer.running_var
        arrays["mlp_out_w"] = model.out_weight
        arrays["mlp_out_b"] = model.out_bias
    else:
        cfg = model.config
        meta["gbt"] = {
            "config": {
                "rounds": cfg.rounds,
                "learning_rate": cfg.learning_rate,
                "max_depth": cfg.max_depth,
                "subsample": cfg.subsample,
                "colsample": cfg.colsample,
                "early_stop_rounds": cfg.early_stop_rounds,
                "alpha": cfg.alpha,
                "leaf_lambda": cfg.leaf_lambda,
                "min_split_gain": cfg.min_split_gain,
                "seed": cfg.seed,
                "alpha_on": cfg.alpha_on,
            },
            "base_score": model.base_score,
            "best_iteration": model.best_iteration,
            "n_trees": len(model.trees),
        }
        offsets = np.cumsum([0] + [t.n_nodes for t in model.trees]).astype(np.int64)
        arrays["gbt_tree_offsets"] = offsets
        arrays["gbt_node_feature"] = np.concatenate([t.feature for t in model.trees]) if model.trees else np.zeros(0, np.int32)
        arrays["gbt_node_threshold"] = np.concatenate([t.threshold for t in model.trees]) if model.trees else np.zeros(0)
        arrays["gbt_node_left"] = np.concatenate([t.left for t in model.trees]) if model.trees else np.zeros(0, np.int32)
        arrays["gbt_node_right"] = np.concatenate([t.right for t in model.trees]) if model.trees else np.zeros(0, np.int32)
        arrays["gbt_node_value"] = np.concatenate([t.value for t in model.trees]) if model.trees else np.zeros(0)

    sections.append(("meta", 0, json.dumps(meta, sort_keys=True).encode()))
    for name in sorted(arrays):
        sections.append((name, 1, _array_payload(arrays[name])))
    return sections


def save_bundle(bundle: ModelBundle, path: str) -> None:
    body = io.BytesIO()
    sections = _sections_for(bundle)
    body.write(struct.pack("<I", len(sections)))
    for name, kind, payload in sections:
        _write_section(body, name, payload, kind)
    payload = body.getvalue()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def _rebuild_model(family: str, meta: dict, arrays: dict[str, np.ndarray]):
    if family == "logistic":
        info = meta["logistic"]
        beta = arrays["logistic_beta"]
        return linmod_mod.LogisticModel(
            intercept=float(beta[0]),
            coefficients=beta[1:],
            column_names=list(info["column_names"]),
            ridge_lambda=info["ridge_lambda"],
            iterations=info["iterations"],
            converged=info["converged"],
        )
    if family == "mlp":
        info = meta["mlp"]
        cfg = mlp_mod.MlpConfig(
            hidden_sizes=tuple(info["hidden_sizes"]),
            leaky_slope=info["leaky_slope"],
            dropout_rates=tuple(info["dropout_rates"]),
            l2_lambda=info["l2_lambda"],
            learning_rate=info["learning_rate"],
            batch_size=info["batch_size"],
            max_epochs=info["max_epochs"],
            patience=info["patience"],
            seed=info["seed"],
            bn_momentum=info["bn_momentum"],
        )
        hidden = []
        for i in range(len(cfg.hidden_sizes)):
            hidden.append(
                mlp_mod.Layer(
                    weight=arrays[f"mlp_w{i}"],
                    bias=arrays[f"mlp_b{i}"],
                    gamma=arrays[f"mlp_gamma{i}"],
                    beta=arrays[f"mlp_beta{i}"],
                    running_mean=arrays[f"mlp_rmean{i}"],
                    running_var=arrays[f"mlp_rvar{i}"],
                )
            )
        model = mlp_mod.MlpModel(
            config=cfg,
            n_features=info["n_features"],
            hidden=hidden,
            out_weight=arrays["mlp_out_w"],
            out_bias=arrays["mlp_out_b"],
        )
        expected = [info["n_features"], *cfg.hidden_sizes]
        for layer, fan_in, fan_out in zip(hidden, expected, expected[1:] + [None]):
            if layer.weight.shape[0] != fan_in:
                raise BundleError("mlp shape chain corrupted")
            if (layer.running_var <= 0).any():
                raise BundleError("mlp running variance must be positive")
        return model
    info = meta["gbt"]
    raw = info["config"]
    cfg = gbt_mod.GbtConfig(**raw)
    offsets = arrays["gbt_tree_offsets"]
    trees = []
    for i in range(offsets.size - 1):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        trees.append(
            gbt_mod.Tree(
                feature=arrays["gbt_node_feature"][lo:hi],
                threshold=arrays["gbt_node_threshold"][lo:hi],
                left=arrays["gbt_node_left"][lo:hi],
                right=arrays["gbt_node_right"][lo:hi],
                value=arrays["gbt_node_value"][lo:hi],
            )
        )
    model = gbt_mod.GbtModel(config=cfg, base_score=info["base_score"], trees=trees)
    model.best_iteration = info["best_iteration"]
    return model


def load_bundle(path: str) -> ModelBundle:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise BundleError(f"bundle file not found: {path}") from exc
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise BundleError(f"not a model bundle: {path}")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != _VERSION:
        raise BundleVersionError(f"unsupported bundle version {version} (supported: {_VERSION})")
    payload, tail = blob[8:-4], blob[-4:]
    if zlib.crc32(payload) != struct.unpack("<I", tail)[0]:
        raise BundleChecksumError(f"bundle checksum mismatch: {path}")

    view = io.BytesIO(payload)
    (n_sections,) = struct.unpack("<I", view.read(4))
    meta = None
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_sections):
        (nlen,) = struct.unpack("<H", view.read(2))
        name = view.read(nlen).decode()
        kind, plen = struct.unpack("<BQ", view.read(9))
        section = view.read(plen)
        if len(section) != plen:
            raise BundleChecksumError("truncated bundle section")
        if kind == 0:
            meta = json.loads(section)
        else:
            arrays[name] = _parse_array(section)
    if meta is None:
        raise BundleError("bundle has no metadata section")

    encoder = OneHotEncoder(
        predictors=tuple(meta["predictors"]),
        levels={k: tuple(v) for k, v in meta["levels"].items()},
        drop_first=meta["drop_first"],
    )
    scaler = ScalerParams(
        means=arrays["scaler_means"],
        sds=arrays["scaler_sds"],
        kept=arrays["scaler_kept"].astype(bool),
        dropped_columns=tuple(meta["scaler_dropped"]),
    )
    prep = FittedPreprocess(
        encoder=encoder,
        scaler=scaler,
        prune_mask=arrays["prune_mask"].astype(bool),
        numeric_domains={k: (v[0], v[1]) for k, v in meta["numeric_domains"].items()},
        impute_values=meta["impute_values"],
    )
    # validate the feature-order chain: encoder -> scaler -> prune
    n_encoded = len(encoder.column_meta())
    if scaler.means.size != n_encoded or prep.prune_mask.size != int(scaler.kept.sum()):
        raise BundleError("preprocessing shape chain corrupted")

    model = _rebuild_model(meta["family"], meta, arrays)
    return ModelBundle(
        family=meta["family"],
        preprocess=prep,
        model=model,
        threshold=meta["threshold"],
        metadata=meta["metadata"],
    )


def field_domains(bundle: ModelBundle) -> list[dict]:
    """Ordered field descriptors for schema-driven clients (the UI form)."""
    out = []
    prep = bundle.preprocess
    for name in prep.encoder.predictors:
        if field_kind(name) == "numeric":
            lo, hi = prep.numeric_domains.get(name, (0.0, 1.0))
            out.append({"name": name, "kind": "numeric", "min": lo, "max": hi})
        else:
            out.append({"name": name, "kind": "categorical", "levels": list(prep.encoder.levels[name])})
    return out
