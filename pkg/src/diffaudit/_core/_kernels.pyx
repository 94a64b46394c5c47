# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: midranks, SAFFRON test levels, Lloyd iterations.

Semantics must match ``_fallback.py`` exactly; tests compare the two.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()


def midranks(double[::1] values):
    """Return (midranks, sum of t^3 - t over tie groups)."""
    cdef Py_ssize_t n = values.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.argsort(values, kind="mergesort").astype(np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ranks = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i = 0, j, k
    cdef double r, t, tie_sum = 0.0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = 0.5 * (i + j) + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = r
        t = <double>(j - i + 1)
        tie_sum += t * t * t - t
        i = j + 1
    return ranks, tie_sum


def rank_sum(double[::1] values, Py_ssize_t n_first):
    """Midrank sum of the first ``n_first`` entries and the tie term of the pooled sample."""
    ranks, tie_sum = midranks(values)
    cdef double[::1] rv = ranks
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n_first):
        s += rv[i]
    return s, tie_sum


def saffron_levels(double[::1] pvals, double alpha, double lam, double w0,
                   double gamma_exp, double gamma_norm):
    """Run SAFFRON over a full stream; return (decisions, levels, fdp_hat numerators)."""
    cdef Py_ssize_t n = pvals.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] decisions = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] levels = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] spent = np.zeros(n, dtype=np.float64)
    # reject_times[j] / cand_after[j]: j = 0 is the start, j >= 1 the j-th rejection
    cdef cnp.ndarray[cnp.int64_t, ndim=1] reject_times = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cand_after = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t t, j, rejects = 0
    cdef double level, acc = 0.0, p
    for t in range(1, n + 1):
        p = pvals[t - 1]
        level = w0 * pow(<double>(t - cand_after[0]), -gamma_exp) / gamma_norm
        if rejects >= 1:
            level += (alpha - w0) * pow(<double>(t - reject_times[1] - cand_after[1]), -gamma_exp) / gamma_norm
        for j in range(2, rejects + 1):
            level += alpha * pow(<double>(t - reject_times[j] - cand_after[j]), -gamma_exp) / gamma_norm
        level = (1.0 - lam) * level
        if level > lam:
            level = lam
        levels[t - 1] = level
        if p <= lam:
            for j in range(rejects + 1):
                cand_after[j] += 1
        else:
            acc += level / (1.0 - lam)
        spent[t - 1] = acc
        if p <= level:
            decisions[t - 1] = 1
            rejects += 1
            reject_times[rejects] = t
    return decisions, levels, spent


cdef inline double _sqdist(double[:, ::1] X, Py_ssize_t i, double[:, ::1] C, Py_ssize_t j) nogil:
    cdef Py_ssize_t d, dim = X.shape[1]
    cdef double s = 0.0, diff
    for d in range(dim):
        diff = X[i, d] - C[j, d]
        s += diff * diff
    return s


cdef double _assign(double[:, ::1] X, double[:, ::1] C, cnp.int64_t[::1] labels) nogil:
    cdef Py_ssize_t i, j, n = X.shape[0], k = C.shape[0]
    cdef double best, dist, total = 0.0
    cdef cnp.int64_t arg
    for i in range(n):
        best = _sqdist(X, i, C, 0)
        arg = 0
        for j in range(1, k):
            dist = _sqdist(X, i, C, j)
            if dist < best:
                best = dist
                arg = j
        labels[i] = arg
        total += best
    return total


cdef void _update(double[:, ::1] X, double[:, ::1] C, cnp.int64_t[::1] labels,
                  cnp.int64_t[::1] counts):
    cdef Py_ssize_t i, j, d, n = X.shape[0], k = C.shape[0], dim = X.shape[1]
    cdef Py_ssize_t largest, far
    cdef double far_d, dist
    for j in range(k):
        counts[j] = 0
        for d in range(dim):
            C[j, d] = 0.0
    for i in range(n):
        counts[labels[i]] += 1
        for d in range(dim):
            C[labels[i], d] += X[i, d]
    for j in range(k):
        if counts[j] > 0:
            for d in range(dim):
                C[j, d] /= counts[j]
    for j in range(k):
        if counts[j] != 0:
            continue
        largest = 0
        for i in range(1, k):
            if counts[i] > counts[largest]:
                largest = i
        far = -1
        far_d = -1.0
        for i in range(n):
            if labels[i] == largest:
                dist = _sqdist(X, i, C, largest)
                if dist > far_d:
                    far_d = dist
                    far = i
        labels[far] = j
        counts[largest] -= 1
        counts[j] = 1
        for d in range(dim):
            C[j, d] = X[far, d]
            C[largest, d] = 0.0
        for i in range(n):
            if labels[i] == largest:
                for d in range(dim):
                    C[largest, d] += X[i, d]
        for d in range(dim):
            C[largest, d] /= counts[largest]


def lloyd(double[:, ::1] X, double[:, ::1] centers, Py_ssize_t max_iter):
    """Lloyd iterations from ``centers``; returns (labels, centers, n_iter, wcss_history)."""
    cdef Py_ssize_t n = X.shape[0], k = centers.shape[0], it
    cdef cnp.ndarray[cnp.float64_t, ndim=2] C = np.array(centers, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] new = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(k, dtype=np.int64)
    cdef double[:, ::1] Cv = C
    cdef cnp.int64_t[::1] lv = labels
    cdef cnp.int64_t[::1] nv = new
    history = [_assign(X, Cv, lv)]
    it = 0
    while it < max_iter:
        it += 1
        _update(X, Cv, lv, counts)
        history.append(_assign(X, Cv, nv))
        if np.array_equal(new, labels):
            break
        labels[:] = new
    return labels.copy(), C, it, history
