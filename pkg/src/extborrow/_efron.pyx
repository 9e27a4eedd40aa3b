# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Efron partial-likelihood terms for a single binary covariate."""

from libc.math cimport exp, log


def efron_terms(double beta,
                const double[::1] time,
                const unsigned char[::1] event,
                const unsigned char[::1] x,
                const double[::1] weight):
    """Return ``(loglik, score, information)`` at ``beta``.

    Arrays must be sorted by ascending ``time``. Ties are grouped by exact
    equality of ``time``.
    """
    cdef Py_ssize_t n = time.shape[0]
    cdef Py_ssize_t i = n - 1
    cdef Py_ssize_t j
    cdef double eb = exp(beta)
    cdef double s0 = 0.0, s1 = 0.0
    cdef double e0, e1, deadwt, meanwt, r, d0, p, frac, t
    cdef double loglik = 0.0, score = 0.0, info = 0.0
    cdef int ndead, k

    while i >= 0:
        t = time[i]
        e0 = 0.0
        e1 = 0.0
        deadwt = 0.0
        ndead = 0
        j = i
        while j >= 0 and time[j] == t:
            if x[j]:
                r = weight[j] * eb
                s1 += r
            else:
                r = weight[j]
            s0 += r
            if event[j]:
                ndead += 1
                e0 += r
                deadwt += weight[j]
                if x[j]:
                    e1 += r
                    loglik += weight[j] * beta
                    score += weight[j]
            j -= 1
        if ndead > 0:
            meanwt = deadwt / ndead
            for k in range(ndead):
                frac = (<double>k) / ndead
                d0 = s0 - frac * e0
                p = (s1 - frac * e1) / d0
                loglik -= meanwt * log(d0)
                score -= meanwt * p
                info += meanwt * p * (1.0 - p)
        i = j
    return loglik, score, info
