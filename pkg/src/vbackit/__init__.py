"""VBAC outcome prediction toolkit.

Subpackages: cohort ingestion and filtering, feature engineering, group
statistics, three classifier families (logistic, MLP, boosted trees),
ranking/threshold metrics, a synthetic-cohort generator with a known
ground truth, model bundling, and an HTTP what-if service.
"""

__version__ = "0.1.0"

from . import cohort, features, gbt, linmod, metrics, mlp, records, stats, synth  # noqa: F401
