"""Synthetic TOLAC cohort generator with a known ground-truth outcome model.

Numeric variables are truncated normals (inverse-CDF sampling); discrete
count variables draw from explicit value/probability tables; categoricals
from configured level distributions. The true VBAC probability is
sigmoid(b0 + score(x)) where the score uses standardized numerics and
level indicators, plus declared interactions; b0 is solved by bisection so
the mean probability hits the target prevalence.

Because the true probabilities are known, the generator doubles as a
Bayes-AUC oracle: no model can beat the AUC of the true probabilities on
the same rows (beyond sampling noise).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import ndtr, ndtri

from .cohort import LabeledCohort
from .records import (
    ALL_FIELDS,
    CATEGORICAL_FIELDS,
    DeliveryRecord,
    METHOD_REPEAT_CESAREAN,
    METHOD_VBAC,
    NUMERIC_FIELDS,
    TOLAC_YES,
)

_BLOCK = 65536


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class NumericSpec:
    mean: float
    sd: float
    minimum: float
    maximum: float
    coef: float = 0.0
    decimals: int = 0  # rounding applied to the recorded value

    def __post_init__(self):
        if self.sd <= 0:
            raise SynthError("numeric sd must be positive")
        if self.minimum >= self.maximum:
            raise SynthError("numeric bounds must satisfy min < max")


@dataclass(frozen=True)
class DiscreteSpec:
    values: tuple[float, ...]
    probs: tuple[float, ...]
    coef: float = 0.0

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise SynthError("discrete probabilities must sum to 1")

    def moments(self) -> tuple[float, float]:
        values = np.asarray(self.values)
        probs = np.asarray(self.probs)
        mean = float((values * probs).sum())
        var = float(((values - mean) ** 2 * probs).sum())
        return mean, np.sqrt(var) if var > 0 else 1.0


@dataclass(frozen=True)
class CategoricalSpec:
    levels: tuple[str, ...]
    probs: tuple[float, ...]
    coefs: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise SynthError("categorical probabilities must sum to 1")
        if len(self.levels) != len(self.probs):
            raise SynthError("levels and probs must align")


@dataclass(frozen=True)
class InteractionSpec:
    """coef * standardized(numeric_field) * indicator(categorical_field == level)."""

    numeric_field: str
    categorical_field: str
    level: str
    coef: float


@dataclass(frozen=True)
class SynthConfig:
    n: int
    seed: int
    target_prevalence: float
    numeric: dict[str, NumericSpec]
    discrete: dict[str, DiscreteSpec]
    categorical: dict[str, CategoricalSpec]
    interactions: tuple[InteractionSpec, ...] = ()
    coef_scale: float = 1.0
    prevalence_tol: float = 0.002

    def __post_init__(self):
        if not 0.0 < self.target_prevalence < 1.0:
            raise SynthError("target prevalence must be in (0, 1)")
        covered = set(self.numeric) | set(self.discrete)
        missing = set(NUMERIC_FIELDS) - covered
        if missing:
            raise SynthError(f"numeric fields without a spec: {sorted(missing)}")
        missing = set(CATEGORICAL_FIELDS) - set(self.categorical)
        if missing:
            raise SynthError(f"categorical fields without a spec: {sorted(missing)}")

    def replace(self, **changes) -> "SynthConfig":
        from dataclasses import replace as dc_replace

        return dc_replace(self, **changes)


def config_from_dict(raw: dict) -> SynthConfig:
    return SynthConfig(
        n=int(raw["n"]),
        seed=int(raw["seed"]),
        target_prevalence=float(raw["target_prevalence"]),
        numeric={
            name: NumericSpec(
                mean=spec["mean"],
                sd=spec["sd"],
                minimum=spec["min"],
                maximum=spec["max"],
                coef=spec.get("coef", 0.0),
                decimals=spec.get("decimals", 0),
            )
            for name, spec in raw["numeric"].items()
        },
        discrete={
            name: DiscreteSpec(
                values=tuple(spec["values"]),
                probs=tuple(spec["probs"]),
                coef=spec.get("coef", 0.0),
            )
            for name, spec in raw["discrete"].items()
        },
        categorical={
            name: CategoricalSpec(
                levels=tuple(spec["levels"]),
                probs=tuple(spec["probs"]),
                coefs=dict(spec.get("coefs", {})),
            )
            for name, spec in raw["categorical"].items()
        },
        interactions=tuple(
            InteractionSpec(
                numeric_field=i["numeric_field"],
                categorical_field=i["categorical_field"],
                level=i["level"],
                coef=i["coef"],
            )
            for i in raw.get("interactions", ())
        ),
        coef_scale=float(raw.get("coef_scale", 1.0)),
        prevalence_tol=float(raw.get("prevalence_tol", 0.002)),
    )


def load_config(path: str) -> SynthConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def default_config(n: int | None = None, seed: int | None = None) -> SynthConfig:
    """The checked-in default profile, optionally overriding n and seed."""
    raw = json.loads(
        resources.files("vbackit.profiles").joinpath("default_synth.json").read_text()
    )
    config = config_from_dict(raw)
    changes = {}
    if n is not None:
        changes["n"] = n
    if seed is not None:
        changes["seed"] = seed
    return config.replace(**changes) if changes else config


@dataclass
class SynthCohort:
    records: list[DeliveryRecord]
    labels: np.ndarray
    true_probs: np.ndarray
    intercept: float
    config: SynthConfig

    def __len__(self) -> int:
        return len(self.records)

    def to_labeled_cohort(self) -> LabeledCohort:
        return LabeledCohort(
            records=tuple(self.records),
            labels=self.labels.astype(np.int64),
            provenance={"sources": ["synthetic"], "seed": self.config.seed},
        )


def _truncated_moments(mu: float, sigma: float, a: float, b: float) -> tuple[float, float]:
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    phi = lambda t: np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi)
    z = ndtr(beta) - ndtr(alpha)
    mean = mu + sigma * (phi(alpha) - phi(beta)) / z
    var = sigma**2 * (
        1 + (alpha * phi(alpha) - beta * phi(beta)) / z - ((phi(alpha) - phi(beta)) / z) ** 2
    )
    return mean, np.sqrt(var)


def _parent_params(spec: NumericSpec) -> tuple[float, float]:
    """Parent (mu, sigma) whose truncation to [min, max] has the configured
    mean/sd, so generated marginals hit their targets despite truncation."""
    from scipy.optimize import fsolve

    def residual(params):
        mu, log_sigma = params
        mean, sd = _truncated_moments(mu, np.exp(log_sigma), spec.minimum, spec.maximum)
        return [mean - spec.mean, sd - spec.sd]

    solution, info, ok, _ = fsolve(
        residual, x0=[spec.mean, np.log(spec.sd)], full_output=True
    )
    mu, sigma = float(solution[0]), float(np.exp(solution[1]))
    mean, sd = _truncated_moments(mu, sigma, spec.minimum, spec.maximum)
    if ok != 1 or abs(mean - spec.mean) > 0.01 * spec.sd or abs(sd - spec.sd) > 0.01 * spec.sd:
        raise SynthError(
            f"cannot match truncated-normal moments mean={spec.mean} sd={spec.sd} "
            f"within bounds [{spec.minimum}, {spec.maximum}]"
        )
    return mu, sigma


def _truncated_normal(rng, spec: NumericSpec, mu: float, sigma: float, size: int) -> np.ndarray:
    lo = ndtr((spec.minimum - mu) / sigma)
    hi = ndtr((spec.maximum - mu) / sigma)
    u = rng.uniform(lo, hi, size=size)
    x = mu + sigma * ndtri(u)
    return np.clip(np.round(x, spec.decimals), spec.minimum, spec.maximum)


def _score_columns(config: SynthConfig, columns: dict[str, np.ndarray]) -> np.ndarray:
    """Ground-truth linear score (before intercept) from recorded values."""
    n = len(next(iter(columns.values())))
    score = np.zeros(n)
    for name, spec in config.numeric.items():
        if spec.coef:
            score += spec.coef * (columns[name] - spec.mean) / spec.sd
    for name, spec in config.discrete.items():
        if spec.coef:
            mean, sd = spec.moments()
            score += spec.coef * (columns[name] - mean) / sd
    for name, spec in config.categorical.items():
        if spec.coefs:
            coefs = np.array([spec.coefs.get(level, 0.0) for level in spec.levels])
            level_index = {level: i for i, level in enumerate(spec.levels)}
            codes = np.array([level_index[v] for v in columns[name]])
            score += coefs[codes]
    for inter in config.interactions:
        nspec = config.numeric[inter.numeric_field]
        standardized = (columns[inter.numeric_field] - nspec.mean) / nspec.sd
        indicator = (columns[inter.categorical_field] == inter.level).astype(np.float64)
        score += inter.coef * standardized * indicator
    return score * config.coef_scale


def _solve_intercept(score: np.ndarray, target: float, tol: float) -> float:
    lo, hi = -40.0, 40.0

    def prevalence(b0: float) -> float:
        return float((1.0 / (1.0 + np.exp(-(b0 + score)))).mean())

    if not (prevalence(lo) <= target <= prevalence(hi)):
        raise SynthError(f"target prevalence {target} unreachable for these coefficients")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if prevalence(mid) < target:
            lo = mid
        else:
            hi = mid
    b0 = 0.5 * (lo + hi)
    if abs(prevalence(b0) - target) > tol:
        raise SynthError("intercept bisection did not reach the target prevalence")
    return b0


def generate_cohort(config: SynthConfig) -> SynthCohort:
    """Draw a cohort with known per-row true probabilities, deterministic per
    seed. Rows are generated in fixed-size blocks with spawned substreams so
    generation can parallelize without changing the output."""
    n = config.n
    n_blocks = (n + _BLOCK - 1) // _BLOCK
    seeds = np.random.SeedSequence(config.seed).spawn(n_blocks)
    parents = {name: _parent_params(spec) for name, spec in config.numeric.items()}

    columns: dict[str, list[np.ndarray]] = {name: [] for name in ALL_FIELDS if name != "delivery_method_expanded" and name != "tolac_attempted"}
    for b in range(n_blocks):
        rng = np.random.default_rng(seeds[b])
        size = min(_BLOCK, n - b * _BLOCK)
        for name in NUMERIC_FIELDS:
            if name in config.numeric:
                mu, sigma = parents[name]
                columns[name].append(_truncated_normal(rng, config.numeric[name], mu, sigma, size))
            else:
                spec = config.discrete[name]
                columns[name].append(
                    rng.choice(np.asarray(spec.values, dtype=np.float64), size=size, p=spec.probs)
                )
        for name in CATEGORICAL_FIELDS:
            spec = config.categorical[name]
            codes = rng.choice(len(spec.levels), size=size, p=spec.probs)
            columns[name].append(np.asarray(spec.levels, dtype=object)[codes])

    merged = {name: np.concatenate(parts) for name, parts in columns.items()}
    score = _score_columns(config, merged)
    b0 = _solve_intercept(score, config.target_prevalence, config.prevalence_tol)
    true_probs = 1.0 / (1.0 + np.exp(-(b0 + score)))

    label_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    labels = (label_rng.random(n) < true_probs).astype(np.int64)

    records = []
    for i in range(n):
        values = {name: merged[name][i] for name in merged}
        for name in NUMERIC_FIELDS:
            values[name] = float(values[name])
        values["tolac_attempted"] = TOLAC_YES
        values["delivery_method_expanded"] = METHOD_VBAC if labels[i] else METHOD_REPEAT_CESAREAN
        records.append(DeliveryRecord(**values))
    return SynthCohort(
        records=records,
        labels=labels,
        true_probs=true_probs,
        intercept=b0,
        config=config,
    )


def true_probability(cohort: SynthCohort, record: DeliveryRecord) -> float:
    """Ground-truth probability for an arbitrary record under the cohort's
    fitted intercept (for monotonicity checks and what-if oracles)."""
    columns = {}
    for name in NUMERIC_FIELDS:
        columns[name] = np.array([record.get(name)], dtype=np.float64)
    for name in CATEGORICAL_FIELDS:
        columns[name] = np.array([record.get(name)], dtype=object)
    score = _score_columns(cohort.config, columns)
    return float(1.0 / (1.0 + np.exp(-(cohort.intercept + score[0]))))


def bayes_auc(cohort: SynthCohort) -> float:
    """AUC of the true probabilities against the sampled labels: the ceiling
    any model can approach on this cohort."""
    from .metrics import roc_auc

    if np.unique(cohort.labels).size < 2:
        raise SynthError("cohort has a single class; AUC undefined")
    return roc_auc(cohort.true_probs, cohort.labels)


def write_csv(cohort: SynthCohort, path: str) -> None:
    """Emit the same CSV schema `cohort.parse_natality_csv` consumes."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ALL_FIELDS)
        for record in cohort.records:
            row = []
            for name in ALL_FIELDS:
                value = record.get(name)
                if value is None:
                    row.append("")
                elif name in NUMERIC_FIELDS:
                    row.append(f"{value:g}")
                else:
                    row.append(value)
            writer.writerow(row)


def write_truth_csv(cohort: SynthCohort, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,true_probability,label\n")
        for i, (p, y) in enumerate(zip(cohort.true_probs, cohort.labels)):
            fh.write(f"{i},{p!r},{int(y)}\n")
