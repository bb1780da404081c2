# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled episode-evaluation kernels.

Twin of `_kernels_py`; same functions, same semantics (float64 arithmetic,
ties to the lowest class slot). The hot loops run without the GIL so
threaded trial runners scale. Inputs bind as const memoryviews because
episode arrays arrive with the writeable flag cleared.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

BACKEND = "cython"


def proto_means(support, slots, int way):
    """Per-slot mean of support vectors: (way, dim) float64."""
    cdef const double[:, ::1] sup = np.ascontiguousarray(support, dtype=np.float64)
    cdef const long long[::1] sl = np.ascontiguousarray(slots, dtype=np.int64)
    cdef Py_ssize_t n = sup.shape[0], dim = sup.shape[1]
    out_arr = np.zeros((way, dim), dtype=np.float64)
    counts_arr = np.zeros(way, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] counts = counts_arr
    cdef Py_ssize_t i, d
    cdef long long s
    with nogil:
        for i in range(n):
            s = sl[i]
            counts[s] += 1.0
            for d in range(dim):
                out[s, d] += sup[i, d]
        for s in range(way):
            for d in range(dim):
                out[s, d] /= counts[s]
    return out_arr


def proto_predict(protos, queries):
    """Nearest prototype by squared euclidean distance; ties to lowest slot."""
    cdef const double[:, ::1] p = np.ascontiguousarray(protos, dtype=np.float64)
    cdef const double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t way = p.shape[0], dim = p.shape[1], nq = q.shape[0]
    pred_arr = np.empty(nq, dtype=np.int64)
    cdef long long[::1] pred = pred_arr
    cdef Py_ssize_t i, w, d
    cdef double dist, best, diff
    cdef long long best_w
    with nogil:
        for i in range(nq):
            best = 0.0
            best_w = 0
            for w in range(way):
                dist = 0.0
                for d in range(dim):
                    diff = q[i, d] - p[w, d]
                    dist += diff * diff
                if w == 0 or dist < best:
                    best = dist
                    best_w = w
            pred[i] = best_w
    return pred_arr


def matching_predict(support, slots, queries, int way):
    """Cosine attention over the support set, softmaxed and summed per class.

    Callers must reject zero-norm vectors before calling.
    """
    cdef const double[:, ::1] sup = np.ascontiguousarray(support, dtype=np.float64)
    cdef const long long[::1] sl = np.ascontiguousarray(slots, dtype=np.int64)
    cdef const double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t ns = sup.shape[0], dim = sup.shape[1], nq = q.shape[0]
    pred_arr = np.empty(nq, dtype=np.int64)
    cdef long long[::1] pred = pred_arr
    sims_arr = np.empty(ns, dtype=np.float64)
    cdef double[::1] sims = sims_arr
    mass_arr = np.empty(way, dtype=np.float64)
    cdef double[::1] mass = mass_arr
    s_norm_arr = np.empty(ns, dtype=np.float64)
    cdef double[::1] s_norm = s_norm_arr
    cdef Py_ssize_t i, j, d, w
    cdef double acc, q_norm, hi, total, best
    cdef long long best_w
    with nogil:
        for j in range(ns):
            acc = 0.0
            for d in range(dim):
                acc += sup[j, d] * sup[j, d]
            s_norm[j] = sqrt(acc)
        for i in range(nq):
            acc = 0.0
            for d in range(dim):
                acc += q[i, d] * q[i, d]
            q_norm = sqrt(acc)
            hi = 0.0
            for j in range(ns):
                acc = 0.0
                for d in range(dim):
                    acc += q[i, d] * sup[j, d]
                sims[j] = acc / (q_norm * s_norm[j])
                if j == 0 or sims[j] > hi:
                    hi = sims[j]
            total = 0.0
            for w in range(way):
                mass[w] = 0.0
            for j in range(ns):
                acc = exp(sims[j] - hi)
                mass[sl[j]] += acc
                total += acc
            best = 0.0
            best_w = 0
            for w in range(way):
                acc = mass[w] / total
                if w == 0 or acc > best:
                    best = acc
                    best_w = w
            pred[i] = best_w
    return pred_arr


cdef void _grad_inplace(
    const double[:, ::1] weights,
    const double[::1] bias,
    const double[:, ::1] vectors,
    const long long[::1] slots,
    double[:, ::1] g_w,
    double[::1] g_b,
    double[::1] probs,
) noexcept nogil:
    """Accumulate the mean cross-entropy gradient into g_w, g_b (zeroed here)."""
    cdef Py_ssize_t n = vectors.shape[0], dim = vectors.shape[1], way = weights.shape[0]
    cdef Py_ssize_t i, w, d
    cdef double hi, total, p
    for w in range(way):
        g_b[w] = 0.0
        for d in range(dim):
            g_w[w, d] = 0.0
    for i in range(n):
        hi = 0.0
        for w in range(way):
            probs[w] = bias[w]
            for d in range(dim):
                probs[w] += weights[w, d] * vectors[i, d]
            if w == 0 or probs[w] > hi:
                hi = probs[w]
        total = 0.0
        for w in range(way):
            probs[w] = exp(probs[w] - hi)
            total += probs[w]
        for w in range(way):
            p = probs[w] / total
            if w == slots[i]:
                p -= 1.0
            p /= n
            g_b[w] += p
            for d in range(dim):
                g_w[w, d] += p * vectors[i, d]


def head_loss(weights, bias, vectors, slots):
    """Mean softmax cross-entropy of the linear head on a labeled batch."""
    cdef const double[:, ::1] w_ = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] b_ = np.ascontiguousarray(bias, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(vectors, dtype=np.float64)
    cdef const long long[::1] y = np.ascontiguousarray(slots, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], dim = x.shape[1], way = w_.shape[0]
    logits_arr = np.empty(way, dtype=np.float64)
    cdef double[::1] logits = logits_arr
    cdef Py_ssize_t i, w, d
    cdef double hi, total, loss = 0.0
    with nogil:
        for i in range(n):
            hi = 0.0
            for w in range(way):
                logits[w] = b_[w]
                for d in range(dim):
                    logits[w] += w_[w, d] * x[i, d]
                if w == 0 or logits[w] > hi:
                    hi = logits[w]
            total = 0.0
            for w in range(way):
                total += exp(logits[w] - hi)
            loss += hi + log(total) - logits[y[i]]
    return loss / n


def head_grad(weights, bias, vectors, slots):
    """Analytic gradient of head_loss with respect to (weights, bias)."""
    cdef const double[:, ::1] w_ = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] b_ = np.ascontiguousarray(bias, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(vectors, dtype=np.float64)
    cdef const long long[::1] y = np.ascontiguousarray(slots, dtype=np.int64)
    cdef Py_ssize_t way = w_.shape[0], dim = w_.shape[1]
    g_w_arr = np.empty((way, dim), dtype=np.float64)
    g_b_arr = np.empty(way, dtype=np.float64)
    probs_arr = np.empty(way, dtype=np.float64)
    cdef double[:, ::1] g_w = g_w_arr
    cdef double[::1] g_b = g_b_arr
    cdef double[::1] probs = probs_arr
    with nogil:
        _grad_inplace(w_, b_, x, y, g_w, g_b, probs)
    return g_w_arr, g_b_arr


def head_fit(weights, bias, vectors, slots, int steps, double lr):
    """Run full-batch gradient descent in place on (weights, bias)."""
    if not (isinstance(weights, np.ndarray) and weights.dtype == np.float64):
        raise TypeError("head_fit updates weights in place; pass float64 arrays")
    cdef double[:, ::1] w_ = weights
    cdef double[::1] b_ = bias
    cdef const double[:, ::1] x = np.ascontiguousarray(vectors, dtype=np.float64)
    cdef const long long[::1] y = np.ascontiguousarray(slots, dtype=np.int64)
    cdef Py_ssize_t way = w_.shape[0], dim = w_.shape[1]
    g_w_arr = np.empty((way, dim), dtype=np.float64)
    g_b_arr = np.empty(way, dtype=np.float64)
    probs_arr = np.empty(way, dtype=np.float64)
    cdef double[:, ::1] g_w = g_w_arr
    cdef double[::1] g_b = g_b_arr
    cdef double[::1] probs = probs_arr
    cdef Py_ssize_t step, w, d
    with nogil:
        for step in range(steps):
            _grad_inplace(w_, b_, x, y, g_w, g_b, probs)
            for w in range(way):
                b_[w] -= lr * g_b[w]
                for d in range(dim):
                    w_[w, d] -= lr * g_w[w, d]


def head_predict(weights, bias, queries):
    """Argmax of weights @ q + bias; ties to lowest slot."""
    cdef const double[:, ::1] w_ = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] b_ = np.ascontiguousarray(bias, dtype=np.float64)
    cdef const double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t nq = q.shape[0], dim = q.shape[1], way = w_.shape[0]
    pred_arr = np.empty(nq, dtype=np.int64)
    cdef long long[::1] pred = pred_arr
    cdef Py_ssize_t i, w, d
    cdef double logit, best
    cdef long long best_w
    with nogil:
        for i in range(nq):
            best = 0.0
            best_w = 0
            for w in range(way):
                logit = b_[w]
                for d in range(dim):
                    logit += w_[w, d] * q[i, d]
                if w == 0 or logit > best:
                    best = logit
                    best_w = w
            pred[i] = best_w
    return pred_arr
