"""Vectorized numpy version of the Efron kernel, used when the extension is absent."""

import numpy as np


def efron_terms(beta, time, event, x, weight):
    """Return ``(loglik, score, information)`` at ``beta``.

    Same contract as the compiled kernel: arrays sorted by ascending time,
    ties grouped by exact equality.
    """
    n = time.shape[0]
    ev = event.astype(bool)
    xb = x.astype(bool)
    r = weight * np.where(xb, np.exp(beta), 1.0)
    rx = np.where(xb, r, 0.0)

    starts = np.flatnonzero(np.r_[True, time[1:] != time[:-1]])
    sizes = np.diff(np.r_[starts, n])
    grp = np.repeat(np.arange(starts.size), sizes)

    s0 = np.cumsum(r[::-1])[::-1][starts]
    s1 = np.cumsum(rx[::-1])[::-1][starts]

    ng = starts.size
    ndead = np.bincount(grp, weights=ev, minlength=ng)
    e0 = np.bincount(grp, weights=r * ev, minlength=ng)
    e1 = np.bincount(grp, weights=rx * ev, minlength=ng)
    deadwt = np.bincount(grp, weights=weight * ev, minlength=ng)

    dg = grp[ev]
    if dg.size == 0:
        return 0.0, 0.0, 0.0
    first = np.r_[True, dg[1:] != dg[:-1]]
    first_pos = np.flatnonzero(first)
    k = np.arange(dg.size) - np.repeat(first_pos, np.diff(np.r_[first_pos, dg.size]))
    m = ndead[dg]
    frac = k / m
    d0 = s0[dg] - frac * e0[dg]
    p = (s1[dg] - frac * e1[dg]) / d0
    meanwt = deadwt[dg] / m

    wx_dead = weight[ev & xb].sum()
    loglik = beta * wx_dead - np.sum(meanwt * np.log(d0))
    score = wx_dead - np.sum(meanwt * p)
    info = np.sum(meanwt * p * (1.0 - p))
    return float(loglik), float(score), float(info)
