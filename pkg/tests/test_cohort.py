import numpy as np
import pytest

from vbackit.cohort import (
    CacheFormatError,
    CohortError,
    CohortFilterReport,
    ColumnSpec,
    EmptyFileError,
    FilterConfig,
    LabelingError,
    MissingFileError,
    SchemaError,
    apply_cohort_filter,
    assign_labels,
    build_cohort,
    identity_schema,
    load_cohort_cache,
    parse_natality_csv,
    save_cohort_cache,
)
from vbackit.records import ALL_FIELDS, METHOD_OTHER

from conftest import make_cesarean_record, make_record, record_to_row, write_csv_rows

PREDICTORS = ("maternal_age", "prepreg_bmi", "tobacco_use")


def write_records_csv(path, records):
    write_csv_rows(path, ALL_FIELDS, [record_to_row(r) for r in records])


class TestParseNatalityCsv:
    def test_well_formed_rows_parse_in_order(self, tmp_path):
        records = [make_record(maternal_age=float(a)) for a in (21, 34, 42)]
        path = tmp_path / "in.csv"
        write_records_csv(path, records)
        parsed = parse_natality_csv(str(path))
        assert len(parsed) == 3
        assert [r.maternal_age for r in parsed] == [21.0, 34.0, 42.0]

    def test_configured_sentinel_becomes_not_stated(self, tmp_path):
        path = tmp_path / "in.csv"
        write_records_csv(path, [make_record(prepreg_bmi=99.9)])
        schema = identity_schema()
        schema["prepreg_bmi"] = ColumnSpec(column="prepreg_bmi", sentinels=("99.9",))
        parsed = parse_natality_csv(str(path), schema)
        assert parsed[0].prepreg_bmi is None

    def test_missing_mapped_column_names_it(self, tmp_path):
        path = tmp_path / "in.csv"
        header = [c for c in ALL_FIELDS if c != "delivery_method_expanded"]
        write_csv_rows(path, header, [])
        with pytest.raises(SchemaError, match="delivery_method_expanded"):
            parse_natality_csv(str(path))

    def test_schema_missing_field_is_an_error(self, tmp_path):
        path = tmp_path / "in.csv"
        write_records_csv(path, [make_record()])
        schema = identity_schema()
        del schema["anemia"]
        with pytest.raises(SchemaError, match="anemia"):
            parse_natality_csv(str(path), schema)

    def test_missing_file(self):
        with pytest.raises(MissingFileError):
            parse_natality_csv("/nonexistent/file.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(EmptyFileError):
            parse_natality_csv(str(path))
        path.write_text(",".join(ALL_FIELDS) + "\n")
        with pytest.raises(EmptyFileError):
            parse_natality_csv(str(path))

    def test_unparseable_numeric_becomes_not_stated(self, tmp_path):
        path = tmp_path / "in.csv"
        row = record_to_row(make_record())
        row[ALL_FIELDS.index("birth_weight")] = "heavy"
        write_csv_rows(path, ALL_FIELDS, [row])
        parsed = parse_natality_csv(str(path))
        assert parsed[0].birth_weight is None

    def test_out_of_enumeration_value_becomes_not_stated(self, tmp_path):
        path = tmp_path / "in.csv"
        row = record_to_row(make_record())
        row[ALL_FIELDS.index("tolac_attempted")] = "maybe"
        write_csv_rows(path, ALL_FIELDS, [row])
        parsed = parse_natality_csv(str(path))
        assert parsed[0].tolac_attempted is None

    def test_value_map_canonicalizes(self, tmp_path):
        path = tmp_path / "in.csv"
        row = record_to_row(make_record())
        row[ALL_FIELDS.index("delivery_method_expanded")] = "VBAC (vaginal)"
        write_csv_rows(path, ALL_FIELDS, [row])
        schema = identity_schema()
        schema["delivery_method_expanded"] = ColumnSpec(
            column="delivery_method_expanded", values={"VBAC (vaginal)": "vbac"}
        )
        parsed = parse_natality_csv(str(path), schema)
        assert parsed[0].delivery_method_expanded == "vbac"


class TestApplyCohortFilter:
    def test_single_step_elimination_funnel(self):
        records = [make_record() for _ in range(4)] + [make_record(plurality=2.0)]
        filtered, report = apply_cohort_filter(records, FilterConfig(predictors=PREDICTORS))
        assert len(filtered) == 4
        assert report.counts() == [5, 4, 4, 4, 4]

    def test_prior_cesarean_count_bounds(self):
        records = [make_record(prior_cesareans=c) for c in (1.0, 2.0, 3.0)]
        filtered, report = apply_cohort_filter(records, FilterConfig(predictors=PREDICTORS))
        assert len(filtered) == 2
        assert report.counts() == [3, 3, 2, 2, 2]

    def test_not_stated_predictor_removed_at_complete_case(self):
        records = [make_record(), make_record(prepreg_bmi=None)]
        filtered, report = apply_cohort_filter(records, FilterConfig(predictors=PREDICTORS))
        assert len(filtered) == 1
        assert report.counts() == [2, 2, 2, 2, 1]

    def test_tolac_not_attempted_removed(self):
        records = [make_record(), make_record(tolac_attempted="no"),
                   make_record(tolac_attempted=None)]
        _, report = apply_cohort_filter(records, FilterConfig(predictors=PREDICTORS))
        assert report.counts() == [3, 3, 3, 1, 1]

    def test_empty_predictor_list_rejected(self):
        with pytest.raises(CohortError):
            apply_cohort_filter([make_record()], FilterConfig(predictors=()))

    def test_idempotence(self):
        records = [make_record(maternal_age=float(20 + i)) for i in range(6)]
        records += [make_record(plurality=2.0), make_record(prior_cesareans=4.0)]
        config = FilterConfig(predictors=PREDICTORS)
        once, report1 = apply_cohort_filter(records, config)
        twice, report2 = apply_cohort_filter(once, config)
        assert once == twice
        assert report2.counts() == [len(once)] * 5

    def test_report_last_count_matches_output_length(self):
        records = [make_record(), make_record(prior_cesareans=None)]
        filtered, report = apply_cohort_filter(records, FilterConfig(predictors=PREDICTORS))
        assert report.counts()[-1] == len(filtered)

    def test_counts_non_increasing(self):
        records = [make_record(plurality=2.0), make_record(), make_cesarean_record()]
        _, report = apply_cohort_filter(records, FilterConfig(predictors=PREDICTORS))
        counts = report.counts()
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_report_text_format(self):
        report = CohortFilterReport(steps=(("input", 3), ("singleton", 2)))
        assert report.to_text() == "input\t3\nsingleton\t2\n"


class TestAssignLabels:
    def test_vbac_is_one_cesarean_is_zero(self):
        cohort = assign_labels([make_record(), make_cesarean_record()])
        assert cohort.labels.tolist() == [1, 0]

    def test_other_method_is_an_error(self):
        with pytest.raises(LabelingError, match="other"):
            assign_labels([make_record(delivery_method_expanded=METHOD_OTHER)])

    def test_non_tolac_record_is_an_error(self):
        with pytest.raises(LabelingError):
            assign_labels([make_record(tolac_attempted="no")])

    def test_label_partition(self):
        records = [make_record() for _ in range(5)] + [make_cesarean_record() for _ in range(3)]
        cohort = assign_labels(records)
        assert set(np.unique(cohort.labels)) <= {0, 1}
        assert int(cohort.labels.sum()) + int((cohort.labels == 0).sum()) == len(records)


class TestCohortCache:
    def test_round_trip(self, tmp_path):
        records = [make_record(maternal_age=float(20 + i)) for i in range(4)]
        records.append(make_cesarean_record(prepreg_bmi=None))
        cohort, _ = build_cohort(
            records, FilterConfig(predictors=("maternal_age",)), sources=["x.csv"]
        )
        path = tmp_path / "cohort.vbct"
        save_cohort_cache(cohort, str(path))
        loaded = load_cohort_cache(str(path))
        assert loaded.records == cohort.records
        assert np.array_equal(loaded.labels, cohort.labels)
        assert loaded.provenance == cohort.provenance

    def test_corruption_detected(self, tmp_path):
        records = [make_record(), make_cesarean_record()]
        cohort, _ = build_cohort(records, FilterConfig(predictors=("maternal_age",)))
        path = tmp_path / "cohort.vbct"
        save_cohort_cache(cohort, str(path))
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(CacheFormatError, match="checksum"):
            load_cohort_cache(str(path))

    def test_truncation_detected(self, tmp_path):
        records = [make_record(), make_cesarean_record()]
        cohort, _ = build_cohort(records, FilterConfig(predictors=("maternal_age",)))
        path = tmp_path / "cohort.vbct"
        save_cohort_cache(cohort, str(path))
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 9])
        with pytest.raises(CacheFormatError):
            load_cohort_cache(str(path))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "not.vbct"
        path.write_bytes(b"garbage-bytes-here")
        with pytest.raises(CacheFormatError):
            load_cohort_cache(str(path))


def test_provenance_carries_filter_hash():
    records = [make_record()]
    cohort, _ = build_cohort(records, FilterConfig(predictors=PREDICTORS), sources=["a.csv"])
    assert cohort.provenance["sources"] == ["a.csv"]
    assert len(cohort.provenance["filter_config_hash"]) == 16


def test_parse_filter_label_end_to_end(tmp_path):
    records = [make_record(), make_cesarean_record(), make_record(plurality=3.0)]
    path = tmp_path / "in.csv"
    write_records_csv(path, records)
    parsed = parse_natality_csv(str(path))
    cohort, report = build_cohort(parsed, FilterConfig(predictors=PREDICTORS))
    assert report.counts() == [3, 2, 2, 2, 2]
    assert cohort.labels.tolist() == [1, 0]


def test_invalid_stated_value_survives_to_complete_case(tmp_path):
    # negative count parses but violates the record invariant -> not stated
    row = record_to_row(make_record())
    row[ALL_FIELDS.index("prenatal_visits")] = "-3"
    path = tmp_path / "in.csv"
    write_csv_rows(path, ALL_FIELDS, [row])
    parsed = parse_natality_csv(str(path))
    assert parsed[0].prenatal_visits is None
    _, report = apply_cohort_filter(parsed, FilterConfig(predictors=("prenatal_visits",)))
    assert report.counts() == [1, 1, 1, 1, 0]
