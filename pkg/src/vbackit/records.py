"""Delivery-record model: field registry, canonical values, and validation.

Every field admits a "not stated" value, represented as ``None``. Numeric
fields carry floats when stated; categorical fields carry canonical
lower-case string levels.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields

# Canonical values for the two closed enumerations.
TOLAC_YES = "yes"
TOLAC_NO = "no"
METHOD_VBAC = "vbac"
METHOD_REPEAT_CESAREAN = "repeat_cesarean"
METHOD_OTHER = "other"

TOLAC_VALUES = (TOLAC_YES, TOLAC_NO)
DELIVERY_METHOD_VALUES = (METHOD_VBAC, METHOD_REPEAT_CESAREAN, METHOD_OTHER)

NUMERIC_FIELDS = (
    "maternal_age",
    "gestational_age",
    "prepreg_bmi",
    "birth_weight",
    "prenatal_visits",
    "interval_since_last_birth",
    "prior_cesareans",
    "prior_live_births",
    "plurality",
)

CATEGORICAL_FIELDS = (
    "race_ethnicity",
    "education",
    "marital_status",
    "insurance_payer",
    "tobacco_use",
    "prepreg_diabetes",
    "gestational_diabetes",
    "prepreg_hypertension",
    "gestational_hypertension",
    "eclampsia",
    "anemia",
    "infertility_treatment",
    "prior_preterm_birth",
    "census_region",
    "urbanization",
    "delivery_place",
)

# Outcome/eligibility fields are parsed like categoricals but validated
# against their closed enumerations.
OUTCOME_FIELDS = ("tolac_attempted", "delivery_method_expanded")

ALL_FIELDS = NUMERIC_FIELDS + CATEGORICAL_FIELDS + OUTCOME_FIELDS


class RecordValueError(ValueError):
    """A stated field value violates a record invariant."""


@dataclass(frozen=True, slots=True)
class DeliveryRecord:
    """One natality row; ``None`` in any field means "not stated"."""

    maternal_age: float | None = None
    gestational_age: float | None = None
    prepreg_bmi: float | None = None
    birth_weight: float | None = None
    prenatal_visits: float | None = None
    interval_since_last_birth: float | None = None
    prior_cesareans: float | None = None
    prior_live_births: float | None = None
    plurality: float | None = None
    race_ethnicity: str | None = None
    education: str | None = None
    marital_status: str | None = None
    insurance_payer: str | None = None
    tobacco_use: str | None = None
    prepreg_diabetes: str | None = None
    gestational_diabetes: str | None = None
    prepreg_hypertension: str | None = None
    gestational_hypertension: str | None = None
    eclampsia: str | None = None
    anemia: str | None = None
    infertility_treatment: str | None = None
    prior_preterm_birth: str | None = None
    census_region: str | None = None
    urbanization: str | None = None
    delivery_place: str | None = None
    tolac_attempted: str | None = None
    delivery_method_expanded: str | None = None

    def __post_init__(self) -> None:
        for name in NUMERIC_FIELDS:
            value = getattr(self, name)
            if value is not None and value < 0:
                raise RecordValueError(f"{name} must be non-negative when stated, got {value}")
        if self.tolac_attempted is not None and self.tolac_attempted not in TOLAC_VALUES:
            raise RecordValueError(
                f"tolac_attempted must be one of {TOLAC_VALUES}, got {self.tolac_attempted!r}"
            )
        if (
            self.delivery_method_expanded is not None
            and self.delivery_method_expanded not in DELIVERY_METHOD_VALUES
        ):
            raise RecordValueError(
                "delivery_method_expanded must be one of "
                f"{DELIVERY_METHOD_VALUES}, got {self.delivery_method_expanded!r}"
            )

    def get(self, field: str):
        return getattr(self, field)

    def replace(self, **changes) -> "DeliveryRecord":
        values = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        values.update(changes)
        return DeliveryRecord(**values)


def field_kind(field: str) -> str:
    """Return "numeric" or "categorical" for a logical field name."""
    if field in NUMERIC_FIELDS:
        return "numeric"
    if field in CATEGORICAL_FIELDS or field in OUTCOME_FIELDS:
        return "categorical"
    raise KeyError(f"unknown field {field!r}")
