import os

import numpy as np
import pytest

from ehrbench.ehr import (
    TIME_DATE,
    TIME_ORDINAL,
    PatientRecord,
    load_catalog,
    load_cohort,
)
from ehrbench.prompts import IclExampleSpec, PromptConfig

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# In-context example statistics behind the two "best" golden snapshots.
# scripts/make_fixtures.py holds the same constants; the golden byte-compare
# tests catch any drift between the two copies.
LAB_ICL_STATS = {
    0: {"f01": (2.0, 0.09), "f02": (140.0, 4.0), "f03": (104.0, 0.25)},
    1: {"f01": (8000.0, 9.0e6), "f02": (110.0, 900.0), "f03": (97.0, 36.0)},
}
VITALS_ICL_STATS = {
    0: {"dbp": (80.0, 25.0), "glucose": (150.0, 400.0), "hr": (85.0, 16.0)},
}
LAB_ICL_SEED = 7
VITALS_ICL_SEED = 11


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def lab_catalog():
    return load_catalog(os.path.join(FIXTURES, "lab_catalog.csv"))


@pytest.fixture(scope="session")
def lab_cohort(lab_catalog):
    return load_cohort(os.path.join(FIXTURES, "lab_cohort.jsonl"),
                       lab_catalog, "mortality")


@pytest.fixture(scope="session")
def lab_record(lab_cohort):
    return lab_cohort.records[0]


@pytest.fixture(scope="session")
def vitals_catalog():
    return load_catalog(os.path.join(FIXTURES, "vitals_catalog.csv"))


@pytest.fixture(scope="session")
def vitals_cohort(vitals_catalog):
    return load_cohort(os.path.join(FIXTURES, "vitals_cohort.jsonl"),
                       vitals_catalog, "mortality")


@pytest.fixture(scope="session")
def vitals_record(vitals_cohort):
    return vitals_cohort.records[0]


def golden_settings():
    """name -> (cohort fixture name, PromptConfig, IclExampleSpec or None)."""
    return {
        "lab_base.txt": ("lab", PromptConfig(), None),
        "lab_best.txt": (
            "lab",
            PromptConfig(include_units=True, include_ranges=True,
                         n_icl_examples=2),
            IclExampleSpec(group_stats=LAB_ICL_STATS, seed=LAB_ICL_SEED,
                           n_visits=5, time_kind=TIME_DATE,
                           start_date="2020-02-09"),
        ),
        "vitals_base.txt": (
            "vitals", PromptConfig(missing_policy="reserve_nan"), None,
        ),
        "vitals_best.txt": (
            "vitals",
            PromptConfig(missing_policy="reserve_nan", include_units=True,
                         include_ranges=True, n_icl_examples=1),
            IclExampleSpec(group_stats=VITALS_ICL_STATS,
                           seed=VITALS_ICL_SEED, n_visits=4,
                           time_kind=TIME_ORDINAL),
        ),
    }


def random_record(rng, n_features=None, n_visits=None, categorical_frac=0.2,
                  missing_frac=0.15, pid="r0"):
    """A random multi-visit record plus a matching catalog entry list."""
    from ehrbench.ehr import FeatureCatalog, FeatureCatalogEntry

    n_features = n_features or int(rng.integers(1, 8))
    n_visits = n_visits or int(rng.integers(1, 7))
    entries = []
    features = {}
    for i in range(n_features):
        fid = f"g{i}"
        if rng.uniform() < categorical_frac:
            kind = "categorical"
            pool = ["low", "mid", "high"]
            series = [pool[int(rng.integers(0, 3))] for _ in range(n_visits)]
        else:
            kind = "numeric"
            series = [float(round(rng.uniform(-50, 500), 2))
                      for _ in range(n_visits)]
        series = [None if rng.uniform() < missing_frac else v
                  for v in series]
        entries.append(FeatureCatalogEntry(
            feature_id=fid, display_name=f"Feature {i}", unit=None,
            reference_range=None, kind=kind))
        features[fid] = series
    record = PatientRecord(
        patient_id=pid,
        sex="female" if rng.integers(0, 2) else "male",
        age=float(round(rng.uniform(20, 95), 1)),
        visit_times=tuple(range(n_visits)),
        features=features,
    )
    return record, FeatureCatalog(entries)


def random_scored_samples(rng, n=None, score_pool=None, require_both=True):
    from ehrbench.metrics import ScoredSample

    n = n or int(rng.integers(2, 9))
    while True:
        labels = [int(rng.integers(0, 2)) for _ in range(n)]
        if not require_both or (0 in labels and 1 in labels):
            break
    pool = score_pool if score_pool is not None else None
    samples = []
    for i, label in enumerate(labels):
        if pool is not None:
            score = float(pool[int(rng.integers(0, len(pool)))])
        else:
            score = float(round(rng.uniform(0, 1), 2))
        samples.append(ScoredSample(f"s{i}", score, label))
    return samples


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
