"""Longitudinal structured-EHR records: loading, imputation, aggregation, splits.

Records are immutable after construction; every transformation returns a new
record. Visit timestamps come in three flavors:

  * ``ordinal``  -- integer visit indices (0, 1, 2, ...)
  * ``hours``    -- real-valued hours since admission
  * ``date``     -- ISO calendar dates, rendered verbatim in prompts

Window aggregation needs real times and refuses ordinal cohorts.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from .errors import (
    DegenerateClass,
    InsufficientClass,
    InvariantViolation,
    OrdinalTimestamps,
    ParseError,
    SchemaMismatch,
)

TIME_ORDINAL = "ordinal"
TIME_HOURS = "hours"
TIME_DATE = "date"

SEXES = ("male", "female", "unknown")
TASKS = ("mortality", "readmission")


def _infer_time_kind(visit_times):
    if all(isinstance(t, str) for t in visit_times):
        return TIME_DATE
    if all(isinstance(t, int) and not isinstance(t, bool) for t in visit_times):
        return TIME_ORDINAL
    return TIME_HOURS


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    sex: str
    age: float
    visit_times: tuple
    features: dict
    label: int | None = None
    time_kind: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "visit_times", tuple(self.visit_times))
        object.__setattr__(
            self, "features", {k: tuple(v) for k, v in self.features.items()}
        )
        if self.time_kind is None:
            object.__setattr__(self, "time_kind", _infer_time_kind(self.visit_times))
        self.validate()

    def validate(self):
        pid = self.patient_id
        if self.sex not in SEXES:
            raise InvariantViolation(f"record {pid}: sex {self.sex!r} not in {SEXES}")
        if self.age < 0:
            raise InvariantViolation(f"record {pid}: negative age {self.age}")
        n = len(self.visit_times)
        for fid, series in self.features.items():
            if len(series) != n:
                raise InvariantViolation(
                    f"record {pid}: feature {fid} has {len(series)} slots "
                    f"for {n} visits"
                )
        times = self.visit_times
        if self.time_kind == TIME_DATE:
            try:
                keys = [date.fromisoformat(t) for t in times]
            except ValueError as exc:
                raise InvariantViolation(f"record {pid}: bad date: {exc}") from exc
        else:
            keys = list(times)
        if any(b < a for a, b in zip(keys, keys[1:])):
            raise InvariantViolation(f"record {pid}: visit_times decrease")
        if self.label is not None and self.label not in (0, 1):
            raise InvariantViolation(f"record {pid}: label {self.label!r} not in {{0,1}}")

    @property
    def n_visits(self):
        return len(self.visit_times)


@dataclass(frozen=True)
class FeatureCatalogEntry:
    feature_id: str
    display_name: str
    unit: str | None
    reference_range: str | None
    kind: str  # "numeric" or "categorical"

    def __post_init__(self):
        if not self.display_name:
            raise InvariantViolation(f"feature {self.feature_id}: empty display_name")
        if self.kind not in ("numeric", "categorical"):
            raise InvariantViolation(
                f"feature {self.feature_id}: kind {self.kind!r}"
            )


class FeatureCatalog:
    """Ordered per-feature metadata; iteration preserves file order."""

    def __init__(self, entries):
        self._entries = {}
        for e in entries:
            if e.feature_id in self._entries:
                raise InvariantViolation(f"duplicate feature_id {e.feature_id}")
            self._entries[e.feature_id] = e

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self):
        return len(self._entries)

    def __contains__(self, feature_id):
        return feature_id in self._entries

    def __getitem__(self, feature_id):
        return self._entries[feature_id]

    @property
    def feature_ids(self):
        return list(self._entries)


@dataclass(frozen=True)
class Cohort:
    records: tuple
    catalog: FeatureCatalog
    task: str

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.task not in TASKS:
            raise InvariantViolation(f"task {self.task!r} not in {TASKS}")
        for rec in self.records:
            for fid in rec.features:
                if fid not in self.catalog:
                    raise InvariantViolation(
                        f"record {rec.patient_id}: feature {fid} not in catalog"
                    )

    def __len__(self):
        return len(self.records)

    def get(self, patient_id):
        for rec in self.records:
            if rec.patient_id == patient_id:
                return rec
        return None


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float
    val_frac: float
    test_frac: float
    seed: int
    stratify_on: str = "label"

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 or f > 1 for f in fracs):
            raise InvariantViolation(f"fractions {fracs} outside [0, 1]")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise InvariantViolation(f"fractions {fracs} do not sum to 1")


@dataclass(frozen=True)
class CohortSplits:
    train: Cohort
    val: Cohort
    test: Cohort


CATALOG_HEADER = ["feature_id", "display_name", "unit", "reference_range", "kind"]
COHORT_CSV_HEADER = ["patient_id", "visit_time", "feature_id", "value"]
LABELS_CSV_HEADER = ["patient_id", "task", "label"]


def load_catalog(path):
    """Read a feature catalog CSV.

    Empty unit/range cells mean absent; a literal "/" is an explicit none and
    is rendered verbatim downstream.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CATALOG_HEADER:
            raise SchemaMismatch(f"catalog header {header} != {CATALOG_HEADER}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CATALOG_HEADER):
                raise ParseError(f"expected {len(CATALOG_HEADER)} cells, got {len(row)}", line=lineno)
            fid, name, unit, rng, kind = row
            entries.append(
                FeatureCatalogEntry(
                    feature_id=fid,
                    display_name=name,
                    unit=unit if unit != "" else None,
                    reference_range=rng if rng != "" else None,
                    kind=kind,
                )
            )
    return FeatureCatalog(entries)


def _parse_visit_time(token, lineno):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    try:
        date.fromisoformat(token)
        return token
    except ValueError:
        raise ParseError(f"unparseable visit_time {token!r}", line=lineno) from None


def _parse_value(token, kind, lineno):
    if token == "":
        return None
    if kind == "categorical":
        return token
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"unparseable numeric value {token!r}", line=lineno) from None


def _parse_label(token, where):
    try:
        value = int(token)
    except (ValueError, TypeError):
        raise InvariantViolation(f"{where}: label {token!r} not in {{0,1}}") from None
    if value not in (0, 1):
        raise InvariantViolation(f"{where}: label {value} not in {{0,1}}")
    return value


def _load_labels(path, task):
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LABELS_CSV_HEADER:
            raise SchemaMismatch(f"labels header {header} != {LABELS_CSV_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 cells, got {len(row)}", line=lineno)
            pid, row_task, label = row
            if row_task != task:
                continue
            labels[pid] = _parse_label(label, f"labels line {lineno}")
    return labels


def _load_long_csv(path, catalog, task, labels_path):
    labels = _load_labels(labels_path, task) if labels_path else {}
    # patient -> visit_time -> feature -> value, preserving first-seen order
    per_patient = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != COHORT_CSV_HEADER:
            raise SchemaMismatch(f"cohort header {header} != {COHORT_CSV_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 cells, got {len(row)}", line=lineno)
            pid, vt, fid, value = row
            if fid not in catalog:
                raise InvariantViolation(f"line {lineno}: feature {fid} not in catalog")
            t = _parse_visit_time(vt, lineno)
            cell = _parse_value(value, catalog[fid].kind, lineno)
            visits = per_patient.setdefault(pid, {})
            visits.setdefault(t, {})[fid] = cell
    records = []
    for pid, visits in per_patient.items():
        times = sorted(visits, key=lambda t: (date.fromisoformat(t) if isinstance(t, str) else t))
        fids = []
        for t in times:
            for fid in visits[t]:
                if fid not in fids:
                    fids.append(fid)
        features = {
            fid: [visits[t].get(fid) for t in times] for fid in fids
        }
        records.append(
            PatientRecord(
                patient_id=pid,
                sex="unknown",
                age=0.0,
                visit_times=tuple(times),
                features=features,
                label=labels.get(pid),
            )
        )
    return records


def _load_jsonl(path, catalog, task):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            required = {"patient_id", "sex", "age", "visit_times", "features"}
            missing = required - obj.keys()
            if missing:
                raise SchemaMismatch(f"line {lineno}: missing fields {sorted(missing)}")
            label = obj.get("label")
            if label is None and "labels" in obj:
                label = obj["labels"].get(task)
            if label is not None:
                label = _parse_label(label, f"record {obj['patient_id']}")
            times = tuple(
                t if isinstance(t, str) else _coerce_number(t)
                for t in obj["visit_times"]
            )
            records.append(
                PatientRecord(
                    patient_id=str(obj["patient_id"]),
                    sex=obj["sex"],
                    age=float(obj["age"]),
                    visit_times=times,
                    features=obj["features"],
                    label=label,
                )
            )
    return records


def _coerce_number(t):
    if isinstance(t, bool):
        raise InvariantViolation(f"boolean visit_time {t!r}")
    if isinstance(t, int):
        return t
    return float(t)


def load_cohort(path, catalog, task, labels_path=None):
    """Load a cohort from long CSV (plus labels CSV) or record-per-line JSON."""
    path = str(path)
    if path.endswith(".csv"):
        records = _load_long_csv(path, catalog, task, labels_path)
    else:
        records = _load_jsonl(path, catalog, task)
    return Cohort(records=tuple(records), catalog=catalog, task=task)


def locf_series(series):
    """Carry the most recent observed value into later missing slots."""
    out = []
    last = None
    for v in series:
        if v is not None:
            last = v
        out.append(last)
    return tuple(out)


def locf_impute(record):
    """Last-observation-carried-forward over every feature series.

    Slots before the first observation stay missing; observed values are
    untouched. Idempotent.
    """
    return replace(
        record, features={fid: locf_series(s) for fid, s in record.features.items()}
    )


_EPOCH = date(1970, 1, 1)


def _time_to_hours(t, kind):
    if kind == TIME_DATE:
        return (date.fromisoformat(t) - _EPOCH).days * 24.0
    return float(t)


def aggregate_windows(record, window_hours, max_records):
    """Merge visits falling in the same consecutive window into one visit.

    The merged value per feature is the last observed value in the window
    (consistent with carry-forward semantics). Output keeps the last visit's
    timestamp per window and is truncated to the first ``max_records`` windows.
    """
    if window_hours <= 0:
        raise InvariantViolation(f"window must be positive, got {window_hours}")
    if record.time_kind == TIME_ORDINAL:
        raise OrdinalTimestamps(
            f"record {record.patient_id}: ordinal visit indices cannot be "
            "aggregated by wall-clock windows"
        )
    buckets = [
        int(_time_to_hours(t, record.time_kind) // window_hours)
        for t in record.visit_times
    ]
    groups = []  # list of lists of visit indices
    for i, b in enumerate(buckets):
        if groups and buckets[groups[-1][-1]] == b:
            groups[-1].append(i)
        else:
            groups.append([i])
    groups = groups[:max_records]
    new_times = tuple(record.visit_times[g[-1]] for g in groups)
    new_features = {}
    for fid, series in record.features.items():
        merged = []
        for g in groups:
            observed = [series[i] for i in g if series[i] is not None]
            merged.append(observed[-1] if observed else None)
        new_features[fid] = tuple(merged)
    return replace(record, visit_times=new_times, features=new_features)


def _allocate(count, fracs):
    """Largest-remainder allocation of `count` items over split fractions."""
    raw = [count * f for f in fracs]
    base = [int(x) for x in raw]
    short = count - sum(base)
    order = sorted(range(len(fracs)), key=lambda i: raw[i] - base[i], reverse=True)
    for i in order[:short]:
        base[i] += 1
    return base


def split_cohort(cohort, spec):
    """Stratified shuffled split, deterministic for a fixed seed."""
    fracs = (spec.train_frac, spec.val_frac, spec.test_frac)
    n_nonzero = sum(1 for f in fracs if f > 0)
    by_class = {}
    for idx, rec in enumerate(cohort.records):
        if rec.label is None:
            raise InvariantViolation(
                f"record {rec.patient_id}: unlabeled record cannot be stratified"
            )
        by_class.setdefault(rec.label, []).append(idx)
    if len(by_class) < 2:
        raise DegenerateClass(f"only classes {sorted(by_class)} present")
    rng = np.random.default_rng(spec.seed)
    parts = ([], [], [])
    for cls in sorted(by_class):
        idxs = by_class[cls]
        if len(idxs) < n_nonzero:
            raise DegenerateClass(
                f"class {cls} has {len(idxs)} records for {n_nonzero} splits"
            )
        shuffled = [idxs[i] for i in rng.permutation(len(idxs))]
        counts = _allocate(len(idxs), fracs)
        pos = 0
        for part, c in zip(parts, counts):
            part.extend(shuffled[pos:pos + c])
            pos += c
    cohorts = tuple(
        Cohort(
            records=tuple(cohort.records[i] for i in sorted(part)),
            catalog=cohort.catalog,
            task=cohort.task,
        )
        for part in parts
    )
    return CohortSplits(train=cohorts[0], val=cohorts[1], test=cohorts[2])


def few_shot_subset(cohort, n_pos, n_neg, seed):
    """Draw exactly n_pos positive and n_neg negative records, seeded."""
    pos = [r for r in cohort.records if r.label == 1]
    neg = [r for r in cohort.records if r.label == 0]
    if len(pos) < n_pos:
        raise InsufficientClass(f"need {n_pos} positives, cohort has {len(pos)}")
    if len(neg) < n_neg:
        raise InsufficientClass(f"need {n_neg} negatives, cohort has {len(neg)}")
    rng = np.random.default_rng(seed)
    chosen = []
    if n_pos:
        chosen.extend(pos[i] for i in rng.choice(len(pos), size=n_pos, replace=False))
    if n_neg:
        chosen.extend(neg[i] for i in rng.choice(len(neg), size=n_neg, replace=False))
    return Cohort(records=tuple(chosen), catalog=cohort.catalog, task=cohort.task)
