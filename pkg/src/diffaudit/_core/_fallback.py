"""Pure-Python/numpy versions of the compiled kernels (same semantics, same outputs)."""
import numpy as np


def midranks(values):
    values = np.ascontiguousarray(values, dtype=np.float64)
    n = values.shape[0]
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(n, dtype=np.float64)
    tie_sum = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        t = float(j - i + 1)
        tie_sum += t * t * t - t
        i = j + 1
    return ranks, tie_sum


def rank_sum(values, n_first):
    ranks, tie_sum = midranks(values)
    s = 0.0
    for r in ranks[:n_first]:
        s += r
    return s, tie_sum


def saffron_levels(pvals, alpha, lam, w0, gamma_exp, gamma_norm):
    pvals = np.ascontiguousarray(pvals, dtype=np.float64)
    n = pvals.shape[0]
    decisions = np.zeros(n, dtype=np.uint8)
    levels = np.zeros(n, dtype=np.float64)
    spent = np.zeros(n, dtype=np.float64)
    reject_times = [0]
    cand_after = [0]
    acc = 0.0
    for t in range(1, n + 1):
        p = float(pvals[t - 1])
        level = w0 * float(t - cand_after[0]) ** -gamma_exp / gamma_norm
        if len(reject_times) > 1:
            level += (alpha - w0) * float(t - reject_times[1] - cand_after[1]) ** -gamma_exp / gamma_norm
        for j in range(2, len(reject_times)):
            level += alpha * float(t - reject_times[j] - cand_after[j]) ** -gamma_exp / gamma_norm
        level = (1.0 - lam) * level
        if level > lam:
            level = lam
        levels[t - 1] = level
        if p <= lam:
            for j in range(len(cand_after)):
                cand_after[j] += 1
        else:
            acc += level / (1.0 - lam)
        spent[t - 1] = acc
        if p <= level:
            decisions[t - 1] = 1
            reject_times.append(t)
            cand_after.append(0)
    return decisions, levels, spent


def _assign(X, C):
    d2 = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1).astype(np.int64)
    return labels, float(d2[np.arange(X.shape[0]), labels].sum())


def _update(X, C, labels):
    k = C.shape[0]
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            C[j] = X[labels == j].mean(axis=0)
    for j in range(k):
        if counts[j] != 0:
            continue
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        dist = ((X[members] - C[largest]) ** 2).sum(axis=1)
        far = int(members[int(np.argmax(dist))])
        labels[far] = j
        counts[largest] -= 1
        counts[j] = 1
        C[j] = X[far]
        C[largest] = X[labels == largest].mean(axis=0)


def lloyd(X, centers, max_iter):
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.array(centers, dtype=np.float64, copy=True)
    labels, w = _assign(X, C)
    history = [w]
    it = 0
    while it < max_iter:
        it += 1
        _update(X, C, labels)
        new, w = _assign(X, C)
        history.append(w)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels, C, it, history
