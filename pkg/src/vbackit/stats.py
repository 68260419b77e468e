"""Group-comparison statistics: Mann-Whitney U with a tie-corrected normal
approximation, standardized effect sizes, Pearson chi-squared, and the
two-group summary table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, ndtr

from .records import field_kind


class StatsError(Exception):
    pass


@dataclass(frozen=True)
class RankTestResult:
    u_statistic: float
    p_value: float
    n1: int
    n2: int
    r1: float  # rank sum of group 1 over the pooled sample


def _midranks(pooled: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midranks of the pooled sample and the tie-group sizes."""
    order = np.argsort(pooled, kind="stable")
    sorted_vals = pooled[order]
    ranks = np.empty(pooled.size, dtype=np.float64)
    # boundaries of runs of equal values
    boundary = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    starts = np.concatenate(([0], boundary))
    ends = np.concatenate((boundary, [pooled.size]))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e + 1)  # average of ranks s+1 .. e
    tie_sizes = ends - starts
    return ranks, tie_sizes.astype(np.float64)


def mann_whitney_u(group1, group2) -> RankTestResult:
    """U = n1*n2 + n1(n1+1)/2 - R1 with midranks over the pooled sample.

    Two-sided p-value from the normal approximation with a 0.5 continuity
    correction and tie-corrected variance. Equivalently, U counts pairs
    (i, j) with group2[j] > group1[i], ties counted half.
    """
    g1 = np.asarray(group1, dtype=np.float64)
    g2 = np.asarray(group2, dtype=np.float64)
    n1, n2 = g1.size, g2.size
    if n1 == 0 or n2 == 0:
        raise StatsError("both groups must be non-empty")

    ranks, tie_sizes = _midranks(np.concatenate([g1, g2]))
    r1 = float(ranks[:n1].sum())
    u = n1 * n2 + n1 * (n1 + 1) / 2.0 - r1

    n = n1 + n2
    mu = n1 * n2 / 2.0
    tie_term = float(((tie_sizes**3 - tie_sizes)).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        p = 1.0
    else:
        numer = u - mu
        numer -= 0.5 * np.sign(numer)  # continuity correction toward the mean
        z = numer / np.sqrt(var)
        p = float(min(1.0, 2.0 * ndtr(-abs(z))))
    return RankTestResult(u_statistic=float(u), p_value=p, n1=n1, n2=n2, r1=r1)


@dataclass(frozen=True)
class EffectSize:
    d: float  # signed, oriented group2 - group1

    @property
    def magnitude(self) -> float:
        return abs(self.d)


def cohens_d(
    mean1: float,
    sd1: float,
    n1: int,
    mean2: float,
    sd2: float,
    n2: int,
    pooling: str = "average",
) -> EffectSize:
    """Standardized mean difference (group2 - group1) / pooled sd.

    pooling="average" uses sqrt((sd1^2 + sd2^2) / 2), which reproduces the
    published effect sizes this toolkit is validated against; "weighted"
    uses the sample-size-weighted pooled sd.
    """
    if n1 < 2 or n2 < 2:
        raise StatsError("each group needs n >= 2")
    if sd1 < 0 or sd2 < 0:
        raise StatsError("standard deviations must be non-negative")
    if pooling == "average":
        pooled = np.sqrt((sd1**2 + sd2**2) / 2.0)
    elif pooling == "weighted":
        pooled = np.sqrt(((n1 - 1) * sd1**2 + (n2 - 1) * sd2**2) / (n1 + n2 - 2))
    else:
        raise StatsError(f"unknown pooling {pooling!r}")
    diff = mean2 - mean1
    if pooled == 0:
        if diff == 0:
            return EffectSize(d=0.0)
        raise StatsError("pooled sd is zero with unequal means")
    return EffectSize(d=float(diff / pooled))


def chi_squared(contingency) -> tuple[float, float, int]:
    """Pearson chi-squared statistic, p-value, and degrees of freedom."""
    observed = np.asarray(contingency, dtype=np.float64)
    if observed.ndim != 2 or min(observed.shape) < 2:
        raise StatsError("contingency table must be at least 2x2")
    row = observed.sum(axis=1)
    col = observed.sum(axis=0)
    if (row <= 0).any() or (col <= 0).any():
        raise StatsError("zero row or column margin")
    expected = np.outer(row, col) / observed.sum()
    stat = float(((observed - expected) ** 2 / expected).sum())
    dof = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    p = float(gammaincc(dof / 2.0, stat / 2.0))
    return stat, p, dof


def format_p(p: float) -> str:
    return "<0.0001" if p < 1e-4 else f"{p:.4f}"


@dataclass(frozen=True)
class SummaryRow:
    variable: str
    group1_stat: str
    group2_stat: str
    p_value: float
    effect_size: float | None  # |d| for numeric variables, None for categorical


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[SummaryRow, ...]
    n1: int
    n2: int

    def to_text(self) -> str:
        header = (
            "variable",
            f"group1 (n={self.n1})",
            f"group2 (n={self.n2})",
            "p",
            "effect size",
        )
        body = [
            (
                r.variable,
                r.group1_stat,
                r.group2_stat,
                format_p(r.p_value),
                "" if r.effect_size is None else f"{r.effect_size:.2f}",
            )
            for r in self.rows
        ]
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(header)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for row in body:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["variable,group1_stat,group2_stat,p,effect_size"]
        for r in self.rows:
            effect = "" if r.effect_size is None else f"{r.effect_size:.4f}"
            g1 = r.group1_stat.replace(",", ";")
            g2 = r.group2_stat.replace(",", ";")
            lines.append(f"{r.variable},{g1},{g2},{format_p(r.p_value)},{effect}")
        return "\n".join(lines) + "\n"


def summary_table(records, labels, variables: list[str]) -> SummaryTable:
    """Per-variable two-group comparison: mean (sd) + Mann-Whitney + |d| for
    numeric variables; level counts/percents + chi-squared for categorical.

    Group 1 is label 1 (VBAC), group 2 is label 0 (repeat cesarean).
    """
    labels = np.asarray(labels)
    mask1 = labels == 1
    mask2 = labels == 0
    n1, n2 = int(mask1.sum()), int(mask2.sum())
    rows = []
    for name in variables:
        try:
            kind = field_kind(name)
        except KeyError as exc:
            raise StatsError(f"unknown variable {name!r}") from exc
        column = [r.get(name) for r in records]
        if kind == "numeric":
            g1 = np.array([v for v, m in zip(column, mask1) if m and v is not None])
            g2 = np.array([v for v, m in zip(column, mask2) if m and v is not None])
            if g1.size < 2 or g2.size < 2:
                raise StatsError(f"variable {name!r} has too few stated values per group")
            test = mann_whitney_u(g1, g2)
            effect = cohens_d(
                g1.mean(), g1.std(ddof=1), g1.size, g2.mean(), g2.std(ddof=1), g2.size
            )
            rows.append(
                SummaryRow(
                    variable=name,
                    group1_stat=f"{g1.mean():.2f} ({g1.std(ddof=1):.2f})",
                    group2_stat=f"{g2.mean():.2f} ({g2.std(ddof=1):.2f})",
                    p_value=test.p_value,
                    effect_size=abs(effect.d),
                )
            )
        else:
            levels = sorted({v for v in column if v is not None})
            counts = np.zeros((2, len(levels)), dtype=np.float64)
            for value, m1 in zip(column, mask1):
                if value is None:
                    continue
                counts[0 if m1 else 1, levels.index(value)] += 1
            # drop all-zero level columns (can appear when one group lacks a level)
            keep = counts.sum(axis=0) > 0
            counts = counts[:, keep]
            if counts.shape[1] < 2:
                p = 1.0
            else:
                _, p, _ = chi_squared(counts)
            kept_levels = [lvl for lvl, k in zip(levels, keep) if k]

            def fmt(group_row, total):
                return "; ".join(
                    f"{lvl}: {int(c)} ({100.0 * c / total:.1f}%)"
                    for lvl, c in zip(kept_levels, group_row)
                )

            rows.append(
                SummaryRow(
                    variable=name,
                    group1_stat=fmt(counts[0], max(n1, 1)),
                    group2_stat=fmt(counts[1], max(n2, 1)),
                    p_value=p,
                    effect_size=None,
                )
            )
    return SummaryTable(rows=tuple(rows), n1=n1, n2=n2)
