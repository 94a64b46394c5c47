"""Independent reference implementations used only by the tests."""
import itertools

import numpy as np


def brute_auc(pos, neg):
    wins = 0.0
    for a in pos:
        for b in neg:
            wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins / (len(pos) * len(neg))


def exact_mwu_p(pos, neg):
    """One-sided permutation p-value: share of labelings with U at least the observed U."""
    x = np.concatenate([pos, neg]).astype(float)
    m = len(pos)
    # pairwise win matrix, ties count 1/2
    w = (x[:, None] > x[None, :]) + 0.5 * (x[:, None] == x[None, :])
    idx = np.arange(len(x))
    obs = w[np.ix_(idx[:m], idx[m:])].sum()
    count = total = 0
    for combo in itertools.combinations(range(len(x)), m):
        rest = np.setdiff1d(idx, combo)
        u = w[np.ix_(combo, rest)].sum()
        total += 1
        count += u >= obs - 1e-9
    return count / total


def exact_mwu_p_fast(pos, neg, combos):
    """Same as ``exact_mwu_p`` with precomputed index combinations (vectorized)."""
    x = np.concatenate([pos, neg]).astype(float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    m = len(pos)
    sums = ranks[combos].sum(axis=1)
    obs = ranks[:m].sum()
    return float(np.mean(sums >= obs - 1e-9))


def naive_bh(p, q):
    """Largest k with p_(k) <= qk/m, by enumerating every k."""
    m = len(p)
    srt = sorted(p)
    kmax = 0
    for k in range(1, m + 1):
        if srt[k - 1] <= q * k / m:
            kmax = k
    if kmax == 0:
        return [False] * m
    cut = srt[kmax - 1]
    return [x <= cut for x in p]


def saffron_reference(pvals, alpha, lam=0.5, gamma_exp=1.6, terms=200000):
    """SAFFRON written from the definition with explicit candidate counting."""
    j = np.arange(1, terms + 1, dtype=float)
    norm = float(np.sum(j ** -gamma_exp)) + terms ** (1 - gamma_exp) / (gamma_exp - 1)

    def gamma(k):
        return k ** -gamma_exp / norm

    w0 = alpha / 2
    rejections = []
    cands = []
    out = []
    for t, p in enumerate(pvals, start=1):
        c0 = sum(1 for s in cands if s < t)
        level = w0 * gamma(t - c0)
        for i, tau in enumerate(rejections):
            c = sum(1 for s in cands if tau < s < t)
            level += (alpha - w0 if i == 0 else alpha) * gamma(t - tau - c)
        level = min(lam, (1 - lam) * level)
        if p <= lam:
            cands.append(t)
        if p <= level:
            rejections.append(t)
        out.append((p <= level, level))
    return out
