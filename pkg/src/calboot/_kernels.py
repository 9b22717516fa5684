"""Compiled resampling loops.

A resample is a vector of row indices into the original data.  The data are
first centered by their own means and expanded into per-row moment features
(:func:`prepare`), so fitting a resample is one gather-add pass over its rows
followed by an LDL' solve of the ``p x p`` centered Gram matrix.  The intercept
pivot of a QR of ``[1, Z]`` is ``sqrt(N)`` and the remaining pivots are
``sqrt(D)``, so the singularity test matches :func:`calboot.regress.fit_ols`.

All sums run in a fixed sequential order, so a scalar re-implementation that
follows the same order reproduces the results bit-for-bit.
"""

import numba as nb
import numpy as np

from .regress import PIVOT_RTOL
from .resample import nb_child, nb_final, nb_index

OK = 0
SINGULAR = 1


@nb.njit(cache=True)
def prepare(Z, y):
    """Center the data by its own means and build per-row moment features.

    Feature columns: centered covariates, centered response, the lower triangle
    of ``z z'`` (row-major), then ``z * y``.  Returns (Zc, yc, F, gmean) where
    ``gmean`` holds the covariate means followed by the response mean.
    """
    n, p = Z.shape
    gmean = np.zeros(p + 1)
    for i in range(n):
        for a in range(p):
            gmean[a] += Z[i, a]
        gmean[p] += y[i]
    for a in range(p + 1):
        gmean[a] /= n
    Zc = np.empty((n, p))
    yc = np.empty(n)
    q = p + 1 + p * (p + 1) // 2 + p
    F = np.empty((n, q))
    for i in range(n):
        for a in range(p):
            Zc[i, a] = Z[i, a] - gmean[a]
            F[i, a] = Zc[i, a]
        yc[i] = y[i] - gmean[p]
        F[i, p] = yc[i]
        c = p + 1
        for a in range(p):
            for b in range(a + 1):
                F[i, c] = Zc[i, a] * Zc[i, b]
                c += 1
        for a in range(p):
            F[i, c + a] = Zc[i, a] * yc[i]
    return Zc, yc, F, gmean


@nb.njit(cache=True)
def fit_rows(F, gmean, rows, beta, mom, S, sy):
    """Fit on ``rows`` of prepared data.

    Fills beta (k), mom (feature sums, with the first p + 1 entries turned into
    resample means) and S (packed LDL' factor of the centered Gram matrix).
    Returns False if the design is singular.
    """
    N = rows.shape[0]
    p = gmean.shape[0] - 1
    q = F.shape[1]
    for c in range(q):
        mom[c] = 0.0
    for t in range(N):
        r = rows[t]
        for c in range(q):
            mom[c] += F[r, c]
    for a in range(p + 1):
        mom[a] /= N
    c = p + 1
    for a in range(p):
        for b in range(a + 1):
            S[a, b] = mom[c] - N * mom[a] * mom[b]
            c += 1
    for a in range(p):
        sy[a] = mom[c + a] - N * mom[a] * mom[p]
    # LDL' in place: D on the diagonal, unit-lower L below it.  sqrt(D) are the
    # QR pivots after the intercept's sqrt(N).
    big = np.float64(N)
    small = big
    for a in range(p):
        d = S[a, a]
        for c2 in range(a):
            d -= S[a, c2] * S[a, c2] * S[c2, c2]
        if not d > 0.0:
            return False
        S[a, a] = d
        if d > big:
            big = d
        if d < small:
            small = d
        for b in range(a + 1, p):
            s2 = S[b, a]
            for c2 in range(a):
                s2 -= S[b, c2] * S[a, c2] * S[c2, c2]
            S[b, a] = s2 / d
    if not np.sqrt(small) > PIVOT_RTOL * np.sqrt(big):
        return False
    _ldl_solve(S, sy, p)
    b0 = mom[p]
    g0 = gmean[p]
    for a in range(p):
        beta[a + 1] = sy[a]
        b0 -= mom[a] * sy[a]
        g0 -= gmean[a] * sy[a]
    beta[0] = b0 + g0
    return True


@nb.njit(cache=True)
def _ldl_solve(L, v, p):
    """In-place solve of ``L D L' x = v`` with the packed factor from fit_rows."""
    for a in range(p):
        s = v[a]
        for c in range(a):
            s -= L[a, c] * v[c]
        v[a] = s
    for a in range(p):
        v[a] = v[a] / L[a, a]
    for a in range(p - 1, -1, -1):
        s = v[a]
        for c in range(a + 1, p):
            s -= L[c, a] * v[c]
        v[a] = s


@nb.njit(cache=True)
def hc0_se(Zc, yc, gmean, rows, beta, mom, L, g, coef):
    """HC0 standard error of ``beta[coef]`` for a resample just passed to fit_rows."""
    N = rows.shape[0]
    p = Zc.shape[1]
    if coef == 0:
        for a in range(p):
            g[a] = gmean[a] + mom[a]
    else:
        for a in range(p):
            g[a] = 0.0
        g[coef - 1] = 1.0
    _ldl_solve(L, g, p)
    my = mom[p]
    inv_n = 1.0 / N
    var = 0.0
    for t in range(N):
        r = rows[t]
        e = yc[r] - my
        w = 0.0
        for a in range(p):
            da = Zc[r, a] - mom[a]
            e -= da * beta[a + 1]
            w += g[a] * da
        if coef == 0:
            w = inv_n - w
        var += w * w * e * e
    return np.sqrt(var)


@nb.njit(cache=True)
def draw_rows(state, parent, out):
    N = parent.shape[0]
    for t in range(N):
        out[t] = parent[nb_index(state, t, N)]


@nb.njit(cache=True)
def fit_subset(Zc, yc, F, gmean, rows, se_coef):
    """Fit (and optionally HC0 SE) on an explicit row list.  Returns (beta, se, ok)."""
    p = Zc.shape[1]
    beta = np.empty(p + 1)
    mom = np.empty(F.shape[1])
    S = np.empty((p, p))
    sy = np.empty(p)
    if not fit_rows(F, gmean, rows, beta, mom, S, sy):
        return beta, np.nan, False
    se = np.nan
    if se_coef >= 0:
        se = hc0_se(Zc, yc, gmean, rows, beta, mom, S, sy, se_coef)
    return beta, se, True


@nb.njit(cache=True)
def first_level(Zc, yc, F, gmean, ctx, b1, max_redraws, se_coef):
    """First-level pairs bootstrap.

    ``ctx`` is the stream hash of the context node; slot ``j`` uses child ``j``.
    With ``se_coef >= 0`` the HC0 SE of that coefficient is returned too and a
    zero SE triggers a redraw.  Returns (theta, se, attempts, failed_slot).
    """
    n, p = Zc.shape
    theta = np.empty((b1, p + 1))
    se = np.full(b1, np.nan)
    attempts = np.zeros(b1, dtype=np.int64)
    parent = np.arange(n)
    rows = np.empty(n, dtype=np.int64)
    mom = np.empty(F.shape[1])
    S = np.empty((p, p))
    sy = np.empty(p)
    g = np.empty(p)
    for j in range(b1):
        hj = nb_child(ctx, j)
        done = False
        for att in range(max_redraws + 1):
            draw_rows(nb_final(hj, att), parent, rows)
            if not fit_rows(F, gmean, rows, theta[j], mom, S, sy):
                continue
            if se_coef >= 0:
                s = hc0_se(Zc, yc, gmean, rows, theta[j], mom, S, g, se_coef)
                if not s > 0.0:
                    continue
                se[j] = s
            attempts[j] = att
            done = True
            break
        if not done:
            return theta, se, attempts, j
    return theta, se, attempts, -1


@nb.njit(cache=True)
def nested_slot(F, gmean, ctx, j, start_att, b2, max_redraws, sd_coef,
                rows1, rows2, theta1, theta2, mom, S, sy):
    """Fill first-level slot ``j`` and its ``b2`` second-level fits.

    Outer attempts start at ``start_att``.  With ``sd_coef >= 0`` an outer draw
    whose inner estimates of that coefficient are all identical is redrawn.
    Returns (status, attempt used).
    """
    n = F.shape[0]
    parent = np.arange(n)
    hj = nb_child(ctx, j)
    for att in range(start_att, max_redraws + 1):
        draw_rows(nb_final(hj, att), parent, rows1)
        if not fit_rows(F, gmean, rows1, theta1, mom, S, sy):
            continue
        for kk in range(b2):
            hk = nb_child(hj, kk)
            ok = False
            for att2 in range(max_redraws + 1):
                draw_rows(nb_final(hk, att2), rows1, rows2)
                if fit_rows(F, gmean, rows2, theta2[kk], mom, S, sy):
                    ok = True
                    break
            if not ok:
                return SINGULAR, att
        if sd_coef >= 0:
            first = theta2[0, sd_coef]
            spread = False
            for kk in range(1, b2):
                if theta2[kk, sd_coef] != first:
                    spread = True
                    break
            if not spread:
                continue
        return OK, att
    return SINGULAR, max_redraws


@nb.njit(cache=True)
def nested(F, gmean, ctx, b1, b2, max_redraws):
    """Two-level pairs bootstrap; returns (theta1, theta2, attempts, failed_slot)."""
    n = F.shape[0]
    k = gmean.shape[0]
    p = k - 1
    theta1 = np.empty((b1, k))
    theta2 = np.empty((b1, b2, k))
    attempts = np.zeros(b1, dtype=np.int64)
    rows1 = np.empty(n, dtype=np.int64)
    rows2 = np.empty(n, dtype=np.int64)
    mom = np.empty(F.shape[1])
    S = np.empty((p, p))
    sy = np.empty(p)
    for j in range(b1):
        status, att = nested_slot(F, gmean, ctx, j, 0, b2, max_redraws, -1,
                                  rows1, rows2, theta1[j], theta2[j], mom, S, sy)
        if status != OK:
            return theta1, theta2, attempts, j
        attempts[j] = att
    return theta1, theta2, attempts, -1


@nb.njit(cache=True)
def redo_slot(F, gmean, ctx, j, start_att, b2, max_redraws, sd_coef):
    """Re-run one nested slot from ``start_att`` with the inner-spread check."""
    n = F.shape[0]
    k = gmean.shape[0]
    p = k - 1
    theta1 = np.empty(k)
    theta2 = np.empty((b2, k))
    rows1 = np.empty(n, dtype=np.int64)
    rows2 = np.empty(n, dtype=np.int64)
    mom = np.empty(F.shape[1])
    S = np.empty((p, p))
    sy = np.empty(p)
    status, att = nested_slot(F, gmean, ctx, j, start_att, b2, max_redraws, sd_coef,
                              rows1, rows2, theta1, theta2, mom, S, sy)
    return theta1, theta2, att, status


@nb.njit(cache=True)
def jackknife(F, gmean):
    """Leave-one-out fits in row order; returns (theta (n x k), failed_row)."""
    n = F.shape[0]
    k = gmean.shape[0]
    p = k - 1
    theta = np.empty((n, k))
    rows = np.empty(n - 1, dtype=np.int64)
    mom = np.empty(F.shape[1])
    S = np.empty((p, p))
    sy = np.empty(p)
    for i in range(n):
        m = 0
        for r in range(n):
            if r != i:
                rows[m] = r
                m += 1
        if not fit_rows(F, gmean, rows, theta[i], mom, S, sy):
            return theta, i
    return theta, -1
