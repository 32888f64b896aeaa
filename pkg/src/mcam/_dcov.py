"""Exact sample distance covariance matrices for one-dimensional channels.

For channels ``x_p`` observed at the same ``n`` pixels, the squared sample
distance covariance is the mean elementwise product of the double-centered
distance matrices.  Expanding the centering gives

    V2[p, q] = S[p, q] / n**2 - 2 <r_p, r_q> / n**3 + t_p t_q / n**4

with ``S[p, q] = sum_jk |x_pj - x_pk| |x_qj - x_qk|``, ``r_p`` the row sums of
the distance matrix of ``x_p`` and ``t_p`` their total.  ``S`` is evaluated
in O(n log n) per channel pair by sweeping ``x_p`` in sorted order and keeping
Fenwick-tree partial sums keyed on the rank of ``x_q``; no n x n matrix is
materialized.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def _pair_cross_sum(xs, ys, yrank):
    # xs, ys: values reordered by ascending xs; yrank: rank of ys in 1..n
    n = xs.shape[0]
    cnt = np.zeros(n + 1)
    sx = np.zeros(n + 1)
    sy = np.zeros(n + 1)
    sxy = np.zeros(n + 1)
    tx = 0.0
    ty = 0.0
    txy = 0.0
    total = 0.0
    for j in range(n):
        xj = xs[j]
        yj = ys[j]
        r = yrank[j]
        c = 0.0
        px = 0.0
        py = 0.0
        pxy = 0.0
        i = r - 1
        while i > 0:
            c += cnt[i]
            px += sx[i]
            py += sy[i]
            pxy += sxy[i]
            i -= i & (-i)
        lower = c * xj * yj - xj * py - yj * px + pxy
        cu = j - c
        upper = cu * xj * yj - xj * (ty - py) - yj * (tx - px) + (txy - pxy)
        total += lower - upper
        i = r
        while i <= n:
            cnt[i] += 1.0
            sx[i] += xj
            sy[i] += yj
            sxy[i] += xj * yj
            i += i & (-i)
        tx += xj
        ty += yj
        txy += xj * yj
    return 2.0 * total


@numba.njit(cache=True)
def _cross_sums(X, order, rank):
    c, n = X.shape
    S = np.zeros((c, c))
    for p in range(c):
        s1 = 0.0
        s2 = 0.0
        for j in range(n):
            s1 += X[p, j]
            s2 += X[p, j] * X[p, j]
        S[p, p] = 2.0 * n * s2 - 2.0 * s1 * s1
        o = order[p]
        xs = X[p][o]
        for q in range(p + 1, c):
            ys = X[q][o]
            yr = rank[q][o]
            S[p, q] = _pair_cross_sum(xs, ys, yr)
            S[q, p] = S[p, q]
    return S


def _row_sums(x, order):
    v = x[order]
    n = v.size
    before = np.concatenate(([0.0], np.cumsum(v)[:-1]))
    k = np.arange(n)
    after = v.sum() - before - v
    sorted_rows = v * k - before + after - v * (n - 1 - k)
    rows = np.empty(n)
    rows[order] = sorted_rows
    return rows


def distance_covariance_matrix(X):
    """Squared sample distance covariance between every pair of rows of ``X``.

    Parameters
    ----------
    X : ndarray of shape (n_channels, n_samples)

    Returns
    -------
    ndarray of shape (n_channels, n_channels)
        Symmetric, positive semi-definite (it is a Gram matrix of the
        double-centered distance matrices).
    """
    X = np.asarray(X, dtype=np.float64)
    X = X - X.mean(axis=1, keepdims=True)
    c, n = X.shape
    order = np.argsort(X, axis=1, kind="stable")
    rank = np.empty_like(order)
    rows = np.arange(c)[:, None]
    rank[rows, order] = np.arange(1, n + 1)
    S = _cross_sums(X, order, rank)
    R = np.stack([_row_sums(X[p], order[p]) for p in range(c)])
    t = R.sum(axis=1)
    V = S / n**2 - 2.0 * (R @ R.T) / n**3 + np.outer(t, t) / n**4
    return 0.5 * (V + V.T)
