"""Supervised and correlation metrics with bootstrap uncertainty.

AUROC uses the pairwise (Mann-Whitney) formulation with explicit 0.5 tie
credit. AUPRC is average precision with tied scores grouped into a single
threshold step. Kendall is the tie-adjusted tau-b; Spearman uses average
ranks. Bootstrap resample i draws its index sequence from
``numpy.random.default_rng([seed, i])``, which is the documented contract
reference implementations may rely on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantInput,
    EmptyInput,
    InvariantViolation,
    NoPositives,
    OutOfRange,
    SingleClass,
    ZeroVector,
)


@dataclass(frozen=True)
class ScoredSample:
    sample_id: str
    score: float
    label: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvariantViolation(f"score {self.score} outside [0, 1]")
        if self.label not in (0, 1):
            raise InvariantViolation(f"label {self.label!r} not in {{0,1}}")


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    std: float
    n_resamples: int
    seed: int

    def __post_init__(self):
        if self.std < 0:
            raise InvariantViolation("std must be >= 0")


@dataclass(frozen=True)
class SimilarityPair:
    vec_a: tuple
    vec_b: tuple
    gold_score: float

    def __post_init__(self):
        object.__setattr__(self, "vec_a", tuple(self.vec_a))
        object.__setattr__(self, "vec_b", tuple(self.vec_b))
        if len(self.vec_a) != len(self.vec_b):
            raise InvariantViolation("vector dimensions differ")
        if not 0.0 <= self.gold_score <= 4.0:
            raise InvariantViolation(f"gold score {self.gold_score} outside [0, 4]")


def _average_ranks(values):
    """1-based average ranks, ties share the mean rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auroc(samples):
    """P(score_pos > score_neg) + 0.5 P(score_pos = score_neg)."""
    labels = np.array([s.label for s in samples])
    scores = np.array([s.score for s in samples], dtype=float)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"{n_pos} positives, {n_neg} negatives")
    ranks = _average_ranks(scores)
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auprc(samples):
    """Average precision with tied scores collapsed into one threshold."""
    labels = np.array([s.label for s in samples])
    scores = np.array([s.score for s in samples], dtype=float)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise NoPositives("no positive samples")
    order = np.argsort(-scores, kind="mergesort")
    labels = labels[order]
    scores = scores[order]
    ap = 0.0
    cum_pos = 0
    i = 0
    n = len(labels)
    while i < n:
        j = i
        while j + 1 < n and scores[j + 1] == scores[i]:
            j += 1
        group_pos = int(labels[i:j + 1].sum())
        cum_pos += group_pos
        if group_pos:
            precision = cum_pos / (j + 1)
            ap += precision * group_pos / n_pos
        i = j + 1
    return ap


def bootstrap(metric, samples, n=10, seed=0, population_std=True,
              max_redraws=100):
    """Resample-with-replacement uncertainty for a metric.

    Resample i uses indices ``default_rng([seed, i]).integers(0, m, m)``.
    Resamples on which the metric is undefined (a class vanished) are
    redrawn a bounded number of times, then raised.
    """
    if not samples:
        raise EmptyInput("no samples")
    m = len(samples)
    values = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        for attempt in range(max_redraws + 1):
            idx = rng.integers(0, m, size=m)
            resample = [samples[j] for j in idx]
            try:
                values.append(metric(resample))
                break
            except (SingleClass, NoPositives):
                if attempt == max_redraws:
                    raise
    values = np.asarray(values, dtype=float)
    ddof = 0 if population_std else 1
    return BootstrapResult(
        mean=float(values.mean()),
        std=float(values.std(ddof=ddof)),
        n_resamples=n,
        seed=seed,
    )


def _check_paired(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys):
        raise InvariantViolation("input lengths differ")
    if len(xs) < 2:
        raise InvariantViolation("need at least 2 points")
    return xs, ys


def pearson(xs, ys):
    xs, ys = _check_paired(xs, ys)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise ConstantInput("pearson undefined for constant input")
    return float(dx @ dy) / denom


def spearman(xs, ys):
    xs, ys = _check_paired(xs, ys)
    return pearson(_average_ranks(xs), _average_ranks(ys))


def kendall(xs, ys):
    """Tau-b: tie-adjusted Kendall correlation."""
    xs, ys = _check_paired(xs, ys)
    n = len(xs)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            a = xs[i] - xs[j]
            b = ys[i] - ys[j]
            if a == 0 and b == 0:
                continue
            if a == 0:
                ties_x += 1
            elif b == 0:
                ties_y += 1
            elif (a > 0) == (b > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - _tie_term(xs)) * (n0 - _tie_term(ys)))
    if denom == 0.0:
        raise ConstantInput("kendall undefined for constant input")
    return (concordant - discordant) / denom


def _tie_term(values):
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return int(sum(c * (c - 1) // 2 for c in counts))


def similarity(vec_a, vec_b, measure):
    """Cosine similarity or L1/L2 distance between two vectors."""
    a = np.asarray(vec_a, dtype=float)
    b = np.asarray(vec_b, dtype=float)
    if a.shape != b.shape:
        raise InvariantViolation("vector dimensions differ")
    if measure == "cosine":
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            raise ZeroVector("cosine undefined for a zero vector")
        return float(a @ b) / (na * nb)
    if measure == "l1":
        return float(np.abs(a - b).sum())
    if measure == "l2":
        return float(np.linalg.norm(a - b))
    raise InvariantViolation(f"unknown measure {measure!r}")


def pearson_distance(r):
    """sqrt(1 - r) transform of a correlation r in [-1, 1]."""
    if not -1.0 <= r <= 1.0:
        raise OutOfRange(f"correlation {r} outside [-1, 1]")
    return math.sqrt(1.0 - r)


MEASURES = ("cosine", "l1", "l2")
CORRELATIONS = {"pearson": pearson, "spearman": spearman, "kendall": kendall}


def sentence_matching_eval(pairs):
    """3 similarity measures x 3 correlations grid plus Pearson distance."""
    if len(pairs) < 2:
        raise InvariantViolation("need at least 2 pairs")
    gold = [p.gold_score for p in pairs]
    grid = {}
    for measure in MEASURES:
        predicted = [similarity(p.vec_a, p.vec_b, measure) for p in pairs]
        row = {
            name: corr(predicted, gold) for name, corr in CORRELATIONS.items()
        }
        row["pearson_distance"] = pearson_distance(row["pearson"])
        grid[measure] = row
    return grid
