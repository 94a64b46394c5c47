"""Calibration, correlation, agreement, overlap and lexical-diversity metrics."""
from collections import namedtuple
import itertools
import math
import re

import numpy as np

from .._core import midranks
from ..errors import InvalidInputError

# ``value`` is nan whenever ``degenerate`` is set; callers must check the flag.
Stat = namedtuple("Stat", ["value", "degenerate"])

_WORD = re.compile(r"\w+")


def brier(scores_0_100, labels):
    """Mean squared error of score/100 against labels (1 = truly from Model 1)."""
    s = np.asarray(scores_0_100, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if s.shape != y.shape:
        raise InvalidInputError(f"length mismatch: {s.size} scores vs {y.size} labels")
    if s.size == 0:
        raise InvalidInputError("no scores")
    if np.any((s < 0) | (s > 100)):
        raise InvalidInputError("scores must lie in [0, 100]")
    return float(np.mean((s / 100.0 - y) ** 2))


def pearson(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape or x.size < 2:
        raise InvalidInputError("correlation needs two equal-length vectors of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return Stat(math.nan, True)
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return Stat(max(-1.0, min(1.0, r)), False)


def spearman(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape or x.size < 2:
        raise InvalidInputError("correlation needs two equal-length vectors of length >= 2")
    return pearson(midranks(x)[0], midranks(y)[0])


def mean_pearson(score_pairs):
    """Average per-item Pearson correlation, skipping (and counting) degenerate items."""
    values = []
    skipped = 0
    for x, y in score_pairs:
        r = pearson(x, y)
        if r.degenerate:
            skipped += 1
        else:
            values.append(r.value)
    if not values:
        return Stat(math.nan, True), skipped
    return Stat(float(np.mean(values)), False), skipped


def top_ids(auc_map, frac):
    n = len(auc_map)
    k = math.ceil(frac * n)
    ranked = sorted(auc_map, key=lambda key: (-auc_map[key], str(key)))
    return set(ranked[:k])


def jaccard_top_fraction(auc_a, auc_b, frac=0.2):
    if set(auc_a) != set(auc_b):
        raise InvalidInputError("AUC maps cover different hypothesis ids")
    if not 0.0 < frac <= 1.0:
        raise InvalidInputError(f"fraction must be in (0, 1], got {frac}")
    if not auc_a:
        raise InvalidInputError("empty AUC maps")
    a = top_ids(auc_a, frac)
    b = top_ids(auc_b, frac)
    return len(a & b) / len(a | b)


def percent_agreement(r1, r2):
    if len(r1) != len(r2) or not r1:
        raise InvalidInputError("rater label lists must be non-empty and equal length")
    return sum(a == b for a, b in zip(r1, r2)) / len(r1)


def cohen_kappa(r1, r2):
    po = percent_agreement(r1, r2)
    n = len(r1)
    cats = sorted(set(r1) | set(r2), key=str)
    pe = sum((list(r1).count(c) / n) * (list(r2).count(c) / n) for c in cats)
    if pe >= 1.0:
        return Stat(math.nan, True)
    return Stat((po - pe) / (1.0 - pe), False)


def fleiss_kappa(table):
    """``table[i][j]``: number of raters assigning item i to category j."""
    t = np.asarray(table, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] == 0:
        raise InvalidInputError("Fleiss table must be a non-empty items x categories matrix")
    raters = t.sum(axis=1)
    if not np.all(raters == raters[0]) or raters[0] < 2:
        raise InvalidInputError("every item needs the same number (>= 2) of raters")
    n = raters[0]
    n_items = t.shape[0]
    p_item = ((t * t).sum(axis=1) - n) / (n * (n - 1))
    p_bar = p_item.mean()
    p_cat = t.sum(axis=0) / (n_items * n)
    pe = float((p_cat ** 2).sum())
    if pe >= 1.0:
        return Stat(math.nan, True)
    return Stat(float((p_bar - pe) / (1.0 - pe)), False)


def ratings_to_fleiss_table(*raters):
    """Convert per-rater label lists into an items x categories count table."""
    cats = sorted(set(itertools.chain.from_iterable(raters)), key=str)
    index = {c: j for j, c in enumerate(cats)}
    table = np.zeros((len(raters[0]), len(cats)), dtype=int)
    for labels in raters:
        if len(labels) != len(raters[0]):
            raise InvalidInputError("raters labelled different numbers of items")
        for i, lab in enumerate(labels):
            table[i, index[lab]] += 1
    return table


def unigram_jaccard_diversity(texts):
    """1 - mean pairwise Jaccard similarity of lower-cased word sets."""
    if len(texts) < 2:
        raise InvalidInputError("diversity needs at least two texts")
    sets = [set(_WORD.findall(t.lower())) for t in texts]
    sims = []
    for a, b in itertools.combinations(sets, 2):
        union = a | b
        sims.append(len(a & b) / len(union) if union else 1.0)
    return 1.0 - float(np.mean(sims))
