"""AUC, one-sided Mann-Whitney U and Wilcoxon signed-rank tests (asymptotic, tie-corrected)."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr

from .._core import midranks, rank_sum
from ..errors import InvalidInputError


@dataclass(frozen=True)
class TestOutcome:
    auc: float
    u_statistic: float
    z: float
    p_one_sided: float
    degenerate: bool = False

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class SignedRankOutcome:
    statistic: float
    z: float
    p_one_sided: float
    n: int
    degenerate: bool = False


def _as_scores(values, name):
    arr = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite scores")
    return arr


def u_statistic(positives, negatives):
    """Return (U, tie term, m, n) with U counting positive-over-negative wins (ties 1/2)."""
    pos = _as_scores(positives, "positives")
    neg = _as_scores(negatives, "negatives")
    m, n = pos.size, neg.size
    r1, tie_sum = rank_sum(np.concatenate([pos, neg]), m)
    return r1 - m * (m + 1) / 2.0, tie_sum, m, n


def auc(positives, negatives):
    """P(pos > neg) + 1/2 P(pos = neg), from midranks."""
    u, _, m, n = u_statistic(positives, negatives)
    return u / (m * n)


def mwu_one_sided(positives, negatives, continuity=True):
    """Mann-Whitney U test of "positives stochastically larger" via the normal approximation."""
    u, tie_sum, m, n = u_statistic(positives, negatives)
    total = m + n
    mean = m * n / 2.0
    tie_adj = tie_sum / (total * (total - 1)) if total > 1 else 0.0
    var = m * n / 12.0 * ((total + 1) - tie_adj)
    a = u / (m * n)
    if var <= 0.0:
        return TestOutcome(auc=a, u_statistic=u, z=0.0, p_one_sided=1.0, degenerate=True)
    z = (u - mean - (0.5 if continuity else 0.0)) / math.sqrt(var)
    p = float(ndtr(-z))
    return TestOutcome(auc=a, u_statistic=u, z=z, p_one_sided=min(1.0, max(0.0, p)))


def wilcoxon_signed_rank_one_sided(a, b, continuity=False):
    """Paired test of "a tends to exceed b"; zero differences are dropped."""
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InvalidInputError(f"paired lists differ in length: {x.size} vs {y.size}")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return SignedRankOutcome(statistic=0.0, z=0.0, p_one_sided=1.0, n=0, degenerate=True)
    ranks, tie_sum = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_sum / 48.0
    if var <= 0.0:
        return SignedRankOutcome(statistic=w_plus, z=0.0, p_one_sided=1.0, n=n, degenerate=True)
    z = (w_plus - mean - (0.5 if continuity else 0.0)) / math.sqrt(var)
    return SignedRankOutcome(statistic=w_plus, z=z, p_one_sided=float(ndtr(-z)), n=n)
