"""Command-line pipeline: synth, ingest, stats, train, eval, serve.

One JSON config file drives a run; command-line flags override config
values. Every artifact filename carries the config hash so runs with
different configs never collide. Exit codes: 0 success, 1 validation
error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import gbt as gbt_mod
from . import mlp as mlp_mod
from . import synth as synth_mod
from .bundle import BundleError, load_bundle, save_bundle
from .cohort import (
    CohortError,
    FilterConfig,
    build_cohort,
    identity_schema,
    load_cohort_cache,
    load_schema,
    parse_natality_csv,
    save_cohort_cache,
)
from .metrics import pr_curve_auc, pr_curve_csv, roc_curve, roc_curve_csv
from .pipeline import DEFAULT_PREDICTORS, TrainSettings, settings_hash, train_family
from .records import ALL_FIELDS
from .serve import ModelServer
from .stats import summary_table


class ValidationError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(p, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:12]


def _out_dir(args, config) -> Path:
    out = Path(args.out_dir or config.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _predictors(args, config) -> list[str]:
    predictors = config.get("predictors") or list(DEFAULT_PREDICTORS)
    if getattr(args, "predictors", None):
        predictors = [p.strip() for p in args.predictors.split(",")]
    unknown = [p for p in predictors if p not in ALL_FIELDS]
    if unknown:
        raise ValidationError(f"unknown predictor fields: {unknown}")
    return predictors


def cmd_synth(args, config) -> int:
    profile = args.profile or config.get("synth", {}).get("profile")
    synth_cfg = synth_mod.load_config(profile) if profile else synth_mod.default_config()
    overrides = {}
    if args.n or config.get("synth", {}).get("n"):
        overrides["n"] = args.n or config["synth"]["n"]
    seed = args.seed if args.seed is not None else config.get("seed")
    if seed is not None:
        overrides["seed"] = seed
    if overrides:
        synth_cfg = synth_cfg.replace(**overrides)
    cohort = synth_mod.generate_cohort(synth_cfg)
    out = Path(args.out or "cohort.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    synth_mod.write_csv(cohort, str(out))
    if args.truth_out:
        synth_mod.write_truth_csv(cohort, args.truth_out)
    print(f"wrote {len(cohort)} rows to {out} "
          f"(prevalence {cohort.labels.mean():.4f}, bayes auc {synth_mod.bayes_auc(cohort):.4f})")
    return 0


def cmd_ingest(args, config) -> int:
    input_path = args.input or config.get("input", {}).get("csv")
    if not input_path:
        raise ValidationError("no input CSV given (flag --input or config input.csv)")
    if not Path(input_path).exists():
        raise ValidationError(f"input file not found: {input_path}")
    schema_path = args.schema or config.get("input", {}).get("schema")
    schema = load_schema(schema_path) if schema_path else identity_schema()
    predictors = _predictors(args, config)
    filter_cfg = FilterConfig(
        predictors=tuple(predictors),
        allowed_prior_cesareans=tuple(config.get("filter", {}).get("prior_cesareans", (1, 2))),
    )
    records = parse_natality_csv(input_path, schema)
    cohort, report = build_cohort(records, filter_cfg, sources=[str(input_path)])

    run_hash = _config_hash({"input": str(input_path), "filter": filter_cfg.config_hash()})
    out = _out_dir(args, config)
    cache_path = out / f"cohort-{run_hash}.vbct"
    save_cohort_cache(cohort, str(cache_path))
    (out / f"funnel-{run_hash}.tsv").write_text(report.to_text())
    sys.stdout.write(report.to_text())
    print(f"cached {len(cohort)} labeled records to {cache_path}")
    return 0


def _load_cohort_arg(args, config):
    path = args.cohort or config.get("cohort")
    if not path:
        raise ValidationError("no cohort cache given (flag --cohort)")
    if not Path(path).exists():
        raise ValidationError(f"cohort cache not found: {path}")
    return load_cohort_cache(path)


def cmd_stats(args, config) -> int:
    cohort = _load_cohort_arg(args, config)
    variables = config.get("stats", {}).get("variables") or _predictors(args, config)
    table = summary_table(list(cohort.records), cohort.labels, variables)
    run_hash = _config_hash({"cohort": args.cohort, "variables": variables})
    out = _out_dir(args, config)
    (out / f"summary-{run_hash}.txt").write_text(table.to_text())
    (out / f"summary-{run_hash}.csv").write_text(table.to_csv())
    sys.stdout.write(table.to_text())
    return 0


def _train_settings(args, config) -> TrainSettings:
    train_cfg = config.get("train", {})
    family = args.family or train_cfg.get("family")
    if family not in ("logistic", "mlp", "gbt"):
        raise ValidationError(f"--family must be logistic, mlp, or gbt (got {family!r})")
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    mlp_cfg = None
    if train_cfg.get("mlp"):
        mlp_cfg = mlp_mod.MlpConfig(**{
            k: tuple(v) if isinstance(v, list) else v for k, v in train_cfg["mlp"].items()
        })
    gbt_cfg = None
    gbt_overrides = dict(train_cfg.get("gbt", {}))
    if args.alpha is not None:
        gbt_overrides["alpha"] = args.alpha
    if gbt_overrides:
        gbt_cfg = gbt_mod.GbtConfig(**gbt_overrides)
    return TrainSettings(
        family=family,
        predictors=tuple(_predictors(args, config)),
        seed=int(seed),
        test_fraction=train_cfg.get("test_fraction"),
        validation_fraction=train_cfg.get("validation_fraction", 0.1),
        prune_threshold=train_cfg.get("prune_threshold", 0.95),
        threshold_strategy=args.threshold or train_cfg.get("threshold", "default"),
        ridge_lambda=train_cfg.get("ridge_lambda", 0.0),
        mlp=mlp_cfg,
        gbt=gbt_cfg,
        created=train_cfg.get("created"),
    )


def cmd_train(args, config) -> int:
    cohort = _load_cohort_arg(args, config)
    settings = _train_settings(args, config)
    if args.cv:
        from .linmod import cross_validate_auc

        if settings.family != "logistic":
            raise ValidationError("--cv is supported for the logistic family")
        aucs, mean = cross_validate_auc(
            list(cohort.records), cohort.labels, list(settings.predictors),
            k=args.cv, seed=settings.seed, ridge_lambda=settings.ridge_lambda,
        )
        print("fold aucs:", " ".join(f"{a:.4f}" for a in aucs))
        print(f"mean auc: {mean:.4f}")
        return 0

    result = train_family(cohort, settings)
    run_hash = settings_hash(settings)
    out = _out_dir(args, config)
    bundle_path = out / f"bundle-{settings.family}-{run_hash}.vbmb"
    save_bundle(result.bundle, str(bundle_path))

    report_payload = result.report.to_dict()
    report_payload["config_hash"] = run_hash
    (out / f"eval-{settings.family}-{run_hash}.json").write_text(
        json.dumps(report_payload, indent=2, sort_keys=True) + "\n"
    )
    curve = roc_curve(result.test_scores, result.test_labels)
    (out / f"roc-{settings.family}-{run_hash}.csv").write_text(roc_curve_csv(curve))
    pr, _ = pr_curve_auc(result.test_scores, result.test_labels)
    (out / f"pr-{settings.family}-{run_hash}.csv").write_text(pr_curve_csv(pr))
    if result.coefficients is not None:
        (out / f"coefficients-{run_hash}.csv").write_text(result.coefficients.to_csv())
    if settings.family == "mlp" and result.history is not None:
        h = result.history
        lines = ["epoch,train_loss,val_loss,train_auc,val_auc"]
        for i in range(h.n_epochs()):
            lines.append(f"{i+1},{h.train_loss[i]!r},{h.val_loss[i]!r},{h.train_auc[i]!r},{h.val_auc[i]!r}")
        lines.append(f"# best_epoch={h.best_epoch}")
        (out / f"history-{run_hash}.csv").write_text("\n".join(lines) + "\n")

    print(f"wrote {bundle_path}")
    print(
        f"test roc_auc={result.report.roc_auc:.4f} pr_auc={result.report.pr_auc:.4f} "
        f"weighted_f1={result.report.weighted_f1:.4f} accuracy={result.report.accuracy:.4f} "
        f"threshold={result.bundle.threshold:.4f}"
    )
    return 0


def cmd_eval(args, config) -> int:
    if not args.bundle or not Path(args.bundle).exists():
        raise ValidationError(f"bundle not found: {args.bundle}")
    bundle = load_bundle(args.bundle)
    input_path = args.input or config.get("input", {}).get("csv")
    if input_path and Path(input_path).suffix == ".vbct":
        cohort = load_cohort_cache(input_path)
        records, labels = list(cohort.records), cohort.labels
    elif input_path:
        if not Path(input_path).exists():
            raise ValidationError(f"input file not found: {input_path}")
        schema_path = args.schema or config.get("input", {}).get("schema")
        schema = load_schema(schema_path) if schema_path else identity_schema()
        parsed = parse_natality_csv(input_path, schema)
        filter_cfg = FilterConfig(predictors=tuple(_predictors(args, config)))
        cohort, _ = build_cohort(parsed, filter_cfg, sources=[input_path])
        records, labels = list(cohort.records), cohort.labels
    else:
        raise ValidationError("no labeled input given (flag --input)")

    from .metrics import classification_report

    scores = bundle.predict_records(records)
    report = classification_report(scores, np.asarray(labels), bundle.threshold)
    payload = report.to_dict()
    payload["bundle"] = str(args.bundle)
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out_dir:
        out = _out_dir(args, config)
        run_hash = _config_hash({"bundle": args.bundle, "input": input_path})
        (out / f"eval-rescore-{run_hash}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n"
        )
    return 0


def cmd_serve(args, config) -> int:
    if not args.bundle or not Path(args.bundle).exists():
        raise ValidationError(f"bundle not found: {args.bundle}")
    bundle = load_bundle(args.bundle)
    server = ModelServer(
        bundle,
        host=args.host or config.get("serve", {}).get("host", "127.0.0.1"),
        port=args.port if args.port is not None else config.get("serve", {}).get("port", 8000),
        static_dir=args.ui or config.get("serve", {}).get("ui"),
    )
    print(f"serving {args.bundle} on http://{server.httpd.server_address[0]}:{server.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vbackit", description=__doc__)
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    p.add_argument("--profile", help="synth profile JSON (default: packaged profile)")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output CSV path (default cohort.csv)")
    p.add_argument("--truth-out", help="optional per-row true-probability CSV")

    p = sub.add_parser("ingest", help="parse, filter, label, and cache a cohort")
    p.add_argument("--input", help="natality-format CSV")
    p.add_argument("--schema", help="schema config JSON (default: identity mapping)")
    p.add_argument("--predictors", help="comma-separated predictor fields")
    p.add_argument("--out-dir")

    p = sub.add_parser("stats", help="two-group summary table from a cohort cache")
    p.add_argument("--cohort", help="cohort cache (.vbct)")
    p.add_argument("--predictors", help="comma-separated variables")
    p.add_argument("--out-dir")

    p = sub.add_parser("train", help="train a model family and write a bundle")
    p.add_argument("--cohort", help="cohort cache (.vbct)")
    p.add_argument("--family", choices=("logistic", "mlp", "gbt"))
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, help="gbt objective weight on the label-1 term")
    p.add_argument("--threshold", help="default | fixed:<x> | f1_validation")
    p.add_argument("--predictors")
    p.add_argument("--cv", type=int, help="run k-fold CV (logistic) instead of a split")
    p.add_argument("--out-dir")

    p = sub.add_parser("eval", help="re-score a bundle on a labeled CSV or cache")
    p.add_argument("--bundle", required=True)
    p.add_argument("--input", help="labeled CSV or cohort cache")
    p.add_argument("--schema")
    p.add_argument("--predictors")
    p.add_argument("--out-dir")

    p = sub.add_parser("serve", help="serve a bundle over HTTP")
    p.add_argument("--bundle", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--ui", help="static directory to serve at /")
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "train": cmd_train,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except (ValidationError, CohortError, BundleError, json.JSONDecodeError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error [{args.command}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
