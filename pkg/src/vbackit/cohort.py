"""Natality CSV ingestion, inclusion filtering, and outcome labeling.

The filter funnel is applied in a fixed order (singleton, prior-cesarean
count, TOLAC attempted, complete case) so funnel reports are comparable
across runs. Records that fail to parse a required column are kept with
"not stated" values and fall out at the complete-case step, attributing
all loss to one place.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .records import (
    ALL_FIELDS,
    DeliveryRecord,
    METHOD_REPEAT_CESAREAN,
    METHOD_VBAC,
    NUMERIC_FIELDS,
    RecordValueError,
    TOLAC_YES,
)

FILTER_STEPS = ("input", "singleton", "prior_cesareans", "tolac_attempted", "complete_case")

_CACHE_MAGIC = b"VBCT"
_CACHE_VERSION = 1


class CohortError(Exception):
    """Base error for cohort construction."""


class MissingFileError(CohortError):
    pass


class SchemaError(CohortError):
    """Schema config does not map a required field, or the column is absent."""


class EmptyFileError(CohortError):
    pass


class LabelingError(CohortError):
    """A record's delivery method is outside the two outcome classes."""


class CacheFormatError(CohortError):
    """Cohort cache file is unreadable, corrupted, or version-mismatched."""


@dataclass(frozen=True)
class ColumnSpec:
    """Mapping of one logical field to a CSV column."""

    column: str
    sentinels: tuple[str, ...] = ()
    values: dict[str, str] = field(default_factory=dict)  # raw -> canonical


def load_schema(path: str) -> dict[str, ColumnSpec]:
    """Read a schema config file (JSON: field -> {column, sentinels?, values?})."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    schema = {}
    for name, spec in raw.items():
        if isinstance(spec, str):
            schema[name] = ColumnSpec(column=spec)
        else:
            schema[name] = ColumnSpec(
                column=spec["column"],
                sentinels=tuple(spec.get("sentinels", ())),
                values={str(k): str(v) for k, v in spec.get("values", {}).items()},
            )
    return schema


def identity_schema() -> dict[str, ColumnSpec]:
    """Schema for files whose column names are the logical field names."""
    return {name: ColumnSpec(column=name) for name in ALL_FIELDS}


def _parse_cell(field_name: str, raw: str, spec: ColumnSpec):
    value = raw.strip()
    if value == "" or value in spec.sentinels:
        return None
    if spec.values:
        value = spec.values.get(value, value)
    if field_name in NUMERIC_FIELDS:
        try:
            return float(value)
        except ValueError:
            return None
    return value.lower()


def parse_natality_csv(path: str, schema: dict[str, ColumnSpec] | None = None) -> list[DeliveryRecord]:
    """Parse one natality-format CSV into records, preserving row order.

    Unparseable or sentinel-valued cells become "not stated" (None); so do
    stated values that violate a record invariant (negative count, value
    outside a closed enumeration), which keeps the row alive until the
    complete-case filter accounts for it.
    """
    schema = schema if schema is not None else identity_schema()
    missing = [name for name in ALL_FIELDS if name not in schema]
    if missing:
        raise SchemaError(f"schema does not map required fields: {', '.join(missing)}")

    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError as exc:
        raise MissingFileError(f"input file not found: {path}") from exc

    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"input file has no header row: {path}") from None
        col_index = {name: i for i, name in enumerate(header)}
        for name in ALL_FIELDS:
            column = schema[name].column
            if column not in col_index:
                raise SchemaError(f"mapped column {column!r} (field {name!r}) not in header")

        records = []
        for row in reader:
            values = {}
            for name in ALL_FIELDS:
                spec = schema[name]
                idx = col_index[spec.column]
                raw = row[idx] if idx < len(row) else ""
                values[name] = _parse_cell(name, raw, spec)
            try:
                records.append(DeliveryRecord(**values))
            except RecordValueError:
                # Invalid stated values degrade to not-stated; the row is
                # then removed at the complete-case step, not here.
                for name in ALL_FIELDS:
                    try:
                        DeliveryRecord(**{name: values[name]})
                    except RecordValueError:
                        values[name] = None
                records.append(DeliveryRecord(**values))
    if not records:
        raise EmptyFileError(f"input file has a header but no data rows: {path}")
    return records


@dataclass(frozen=True)
class FilterConfig:
    """Inclusion criteria; predictor list drives the complete-case step."""

    predictors: tuple[str, ...]
    allowed_prior_cesareans: tuple[int, ...] = (1, 2)

    def config_hash(self) -> str:
        payload = json.dumps(
            {"predictors": list(self.predictors), "prior_cesareans": list(self.allowed_prior_cesareans)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CohortFilterReport:
    """Per-step record counts of the preprocessing funnel."""

    steps: tuple[tuple[str, int], ...]

    def counts(self) -> list[int]:
        return [count for _, count in self.steps]

    def to_text(self) -> str:
        return "".join(f"{name}\t{count}\n" for name, count in self.steps)


def apply_cohort_filter(
    records: list[DeliveryRecord], config: FilterConfig
) -> tuple[list[DeliveryRecord], CohortFilterReport]:
    """Apply the inclusion funnel in fixed order, recording per-step counts."""
    if not config.predictors:
        raise CohortError("filter config has an empty predictor list")
    for name in config.predictors:
        if name not in ALL_FIELDS:
            raise CohortError(f"unknown predictor field {name!r}")

    steps = [("input", len(records))]
    kept = [r for r in records if r.plurality == 1]
    steps.append(("singleton", len(kept)))
    allowed = set(float(c) for c in config.allowed_prior_cesareans)
    kept = [r for r in kept if r.prior_cesareans in allowed]
    steps.append(("prior_cesareans", len(kept)))
    kept = [r for r in kept if r.tolac_attempted == TOLAC_YES]
    steps.append(("tolac_attempted", len(kept)))
    kept = [
        r
        for r in kept
        if all(r.get(name) is not None for name in config.predictors)
        and r.delivery_method_expanded is not None
    ]
    steps.append(("complete_case", len(kept)))
    return kept, CohortFilterReport(steps=tuple(steps))


@dataclass(frozen=True)
class LabeledCohort:
    """Filtered records with their binary VBAC outcome labels."""

    records: tuple[DeliveryRecord, ...]
    labels: np.ndarray  # int64, 1 = VBAC, 0 = repeat cesarean
    provenance: dict

    def __post_init__(self):
        if len(self.records) != len(self.labels):
            raise CohortError("records and labels length mismatch")

    def __len__(self) -> int:
        return len(self.records)


def assign_labels(
    records: list[DeliveryRecord],
    provenance: dict | None = None,
) -> LabeledCohort:
    """Label 1 for VBAC deliveries, 0 for repeat cesareans.

    Callers must have filtered to TOLAC attempts first; a record whose
    delivery method is outside the two outcome classes is an error.
    """
    labels = np.empty(len(records), dtype=np.int64)
    for i, record in enumerate(records):
        if record.tolac_attempted != TOLAC_YES:
            raise LabelingError(f"record {i} did not attempt TOLAC")
        method = record.delivery_method_expanded
        if method == METHOD_VBAC:
            labels[i] = 1
        elif method == METHOD_REPEAT_CESAREAN:
            labels[i] = 0
        else:
            raise LabelingError(
                f"record {i} has delivery method {method!r}, outside the two outcome classes"
            )
    return LabeledCohort(
        records=tuple(records), labels=labels, provenance=dict(provenance or {})
    )


def build_cohort(
    records: list[DeliveryRecord],
    config: FilterConfig,
    sources: list[str] | None = None,
) -> tuple[LabeledCohort, CohortFilterReport]:
    """Filter then label; provenance records sources and the filter config hash."""
    filtered, report = apply_cohort_filter(records, config)
    provenance = {"sources": list(sources or []), "filter_config_hash": config.config_hash()}
    return assign_labels(filtered, provenance), report


# ---------------------------------------------------------------------------
# Columnar binary cache (little-endian, versioned magic header, CRC32 tail).


def _pack_block(payload: bytes) -> bytes:
    return struct.pack("<Q", len(payload)) + payload


def _read_block(fh: io.BufferedReader) -> bytes:
    header = fh.read(8)
    if len(header) != 8:
        raise CacheFormatError("truncated cache file")
    (length,) = struct.unpack("<Q", header)
    payload = fh.read(length)
    if len(payload) != length:
        raise CacheFormatError("truncated cache file")
    return payload


def save_cohort_cache(cohort: LabeledCohort, path: str) -> None:
    n = len(cohort)
    body = io.BytesIO()
    body.write(_pack_block(json.dumps(cohort.provenance, sort_keys=True).encode()))
    body.write(struct.pack("<Q", n))
    for name in ALL_FIELDS:
        if name in NUMERIC_FIELDS:
            column = np.full(n, np.nan, dtype="<f8")
            for i, record in enumerate(cohort.records):
                value = record.get(name)
                if value is not None:
                    column[i] = value
            body.write(_pack_block(column.tobytes()))
        else:
            levels = sorted({record.get(name) for record in cohort.records} - {None})
            index = {level: i for i, level in enumerate(levels)}
            codes = np.full(n, -1, dtype="<i4")
            for i, record in enumerate(cohort.records):
                value = record.get(name)
                if value is not None:
                    codes[i] = index[value]
            body.write(_pack_block(json.dumps(levels).encode()))
            body.write(_pack_block(codes.tobytes()))
    body.write(_pack_block(cohort.labels.astype("<i1").tobytes()))

    payload = body.getvalue()
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<I", _CACHE_VERSION))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_cohort_cache(path: str) -> LabeledCohort:
    try:
        fh = open(path, "rb")
    except FileNotFoundError as exc:
        raise MissingFileError(f"cohort cache not found: {path}") from exc
    with fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != _CACHE_MAGIC:
        raise CacheFormatError(f"not a cohort cache file: {path}")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != _CACHE_VERSION:
        raise CacheFormatError(f"unsupported cache version {version}")
    payload, tail = blob[8:-4], blob[-4:]
    if zlib.crc32(payload) != struct.unpack("<I", tail)[0]:
        raise CacheFormatError(f"cache checksum mismatch: {path}")

    buf = io.BufferedReader(io.BytesIO(payload))
    provenance = json.loads(_read_block(buf))
    (n,) = struct.unpack("<Q", buf.read(8))
    columns: dict[str, list] = {}
    for name in ALL_FIELDS:
        if name in NUMERIC_FIELDS:
            column = np.frombuffer(_read_block(buf), dtype="<f8")
            columns[name] = [None if np.isnan(v) else float(v) for v in column]
        else:
            levels = json.loads(_read_block(buf))
            codes = np.frombuffer(_read_block(buf), dtype="<i4")
            columns[name] = [None if c < 0 else levels[c] for c in codes]
    labels = np.frombuffer(_read_block(buf), dtype="<i1").astype(np.int64)

    records = tuple(
        DeliveryRecord(**{name: columns[name][i] for name in ALL_FIELDS}) for i in range(n)
    )
    return LabeledCohort(records=records, labels=labels, provenance=provenance)
