import numpy as np
import pytest

from vbackit.records import (
    ALL_FIELDS,
    CATEGORICAL_FIELDS,
    DeliveryRecord,
    METHOD_REPEAT_CESAREAN,
    METHOD_VBAC,
)


def make_record(**overrides) -> DeliveryRecord:
    """A fully-stated, filter-passing record with overridable fields."""
    values = {
        "maternal_age": 31.0,
        "gestational_age": 39.0,
        "prepreg_bmi": 27.0,
        "birth_weight": 3300.0,
        "prenatal_visits": 11.0,
        "interval_since_last_birth": 48.0,
        "prior_cesareans": 1.0,
        "prior_live_births": 1.0,
        "plurality": 1.0,
        "tolac_attempted": "yes",
        "delivery_method_expanded": METHOD_VBAC,
    }
    for name in CATEGORICAL_FIELDS:
        values[name] = "no"
    values.update(
        race_ethnicity="nh_white",
        education="high_school",
        marital_status="married",
        insurance_payer="private",
        census_region="south",
        urbanization="large_metro",
        delivery_place="hospital",
    )
    values.update(overrides)
    return DeliveryRecord(**values)


def make_cesarean_record(**overrides) -> DeliveryRecord:
    overrides.setdefault("delivery_method_expanded", METHOD_REPEAT_CESAREAN)
    return make_record(**overrides)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth_cohort():
    from vbackit import synth

    return synth.generate_cohort(synth.default_config(n=6000, seed=99))


def write_csv_rows(path, header, rows):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def record_to_row(record: DeliveryRecord) -> list[str]:
    row = []
    for name in ALL_FIELDS:
        value = record.get(name)
        if value is None:
            row.append("")
        elif isinstance(value, float):
            row.append(f"{value:g}")
        else:
            row.append(str(value))
    return row
