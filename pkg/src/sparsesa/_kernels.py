"""Compiled inner loops.

State layout shared by every kernel: for a support of size k held in factor
order ``cols[:k]``, ``R[:k, :k]`` is the upper-triangular factor with
``R.T @ R == A[:, cols].T @ A[:, cols]`` and ``z[:k] = R^{-T} A[:, cols].T y``.
The energy of the support is then ``0.5 * (y.y - z.z)``.

The design matrix must be Fortran-ordered so column access is contiguous.
"""

import math

import numpy as np
from numba import njit

# Relative threshold on the squared pivot of an appended column.
RANK_TOL = 1e-12


@njit(cache=True, nogil=True)
def energy(yy, z, k):
    s = 0.0
    for i in range(k):
        s += z[i] * z[i]
    e = 0.5 * (yy - s)
    return e if e > 0.0 else 0.0


@njit(cache=True, nogil=True)
def append_column(a, aty, colsq, R, z, cols, k, j, w):
    """Append column ``j`` at position ``k``. Returns False if it is dependent."""
    m = a.shape[0]
    for c in range(k):
        col = cols[c]
        s = 0.0
        for i in range(m):
            s += a[i, col] * a[i, j]
        w[c] = s
    # forward solve R^T r = w, r overwrites w
    rr = 0.0
    rz = 0.0
    for c in range(k):
        s = w[c]
        for d in range(c):
            s -= R[d, c] * w[d]
        s /= R[c, c]
        w[c] = s
        rr += s * s
        rz += s * z[c]
    d2 = colsq[j] - rr
    if colsq[j] <= 0.0 or d2 <= RANK_TOL * colsq[j]:
        return False
    piv = math.sqrt(d2)
    for c in range(k):
        R[c, k] = w[c]
        R[k, c] = 0.0
    R[k, k] = piv
    z[k] = (aty[j] - rz) / piv
    cols[k] = j
    return True


@njit(cache=True, nogil=True)
def remove_column(R, z, cols, k, p, Rn, zn, colsn):
    """Write the factor of ``cols`` minus position ``p`` into the scratch arrays.

    Column deletion leaves an upper Hessenberg block which Givens rotations
    restore; ``zn[k - 1]`` ends up holding the component of y that the removed
    column explained, and is dropped by the caller.
    """
    for c in range(k - 1):
        src = c if c < p else c + 1
        for r in range(k):
            Rn[r, c] = R[r, src]
        colsn[c] = cols[src]
    for r in range(k):
        zn[r] = z[r]
    for c in range(p, k - 1):
        x1 = Rn[c, c]
        x2 = Rn[c + 1, c]
        h = math.hypot(x1, x2)
        if h == 0.0:
            continue
        cs = x1 / h
        sn = x2 / h
        for cc in range(c, k - 1):
            t1 = Rn[c, cc]
            t2 = Rn[c + 1, cc]
            Rn[c, cc] = cs * t1 + sn * t2
            Rn[c + 1, cc] = -sn * t1 + cs * t2
        Rn[c + 1, c] = 0.0
        t1 = zn[c]
        t2 = zn[c + 1]
        zn[c] = cs * t1 + sn * t2
        zn[c + 1] = -sn * t1 + cs * t2


@njit(cache=True, nogil=True)
def swap(a, aty, colsq, R, z, cols, k, p, j, Rn, zn, colsn, w):
    """Factor of ``cols`` with position ``p`` removed and column ``j`` appended.

    The result lands in ``Rn, zn, colsn``; the input state is untouched.
    Cost is O(M k + k^2).
    """
    remove_column(R, z, cols, k, p, Rn, zn, colsn)
    return append_column(a, aty, colsq, Rn, zn, colsn, k - 1, j, w)


@njit(cache=True, nogil=True)
def build(a, aty, colsq, order, k, R, z, cols, w):
    """From-scratch factor of ``order[:k]`` by successive appends."""
    for c in range(k):
        if not append_column(a, aty, colsq, R, z, cols, c, order[c], w):
            return False
    return True


@njit(cache=True, nogil=True)
def run_chain(a, aty, colsq, yy, R, z, cols, zeros, k, betas, steps_per_stage,
              outs, ins, us, refresh_every, since, drift_tol, drift_floor,
              stage_mean, stage_min, stage_acc, best_cols, record):
    """Pair-flip Metropolis chain over a sequence of inverse temperatures.

    ``outs``/``ins``/``us`` hold the pre-drawn proposal positions and uniforms,
    one per step.  ``R, z, cols, zeros`` are updated in place and describe the
    final state on return.  ``record`` (length 0 to disable) receives the
    support of every step as a bitmask.

    ``since`` counts accepted swaps since the last from-scratch refactorization
    and is carried across calls.  Returns ``(rss, best_rss, accepted, since,
    status)``; status 1 means a refresh found drift beyond tolerance.
    """
    Rn = np.zeros_like(R)
    zn = np.zeros_like(z)
    colsn = np.zeros_like(cols)
    w = np.zeros(k)
    do_record = record.shape[0] > 0

    rss = energy(yy, z, k)
    best = rss
    for c in range(k):
        best_cols[c] = cols[c]
    accepted = 0
    t = 0
    for s in range(betas.shape[0]):
        beta = betas[s]
        acc_s = 0
        sum_e = 0.0
        mn = rss
        for _ in range(steps_per_stage):
            p = outs[t]
            q = ins[t]
            if swap(a, aty, colsq, R, z, cols, k, p, zeros[q], Rn, zn, colsn, w):
                new = energy(yy, zn, k)
                de = new - rss
                if de <= 0.0 or us[t] < math.exp(-beta * de):
                    zeros[q] = cols[p]
                    for r in range(k):
                        z[r] = zn[r]
                        cols[r] = colsn[r]
                        for c in range(k):
                            R[r, c] = Rn[r, c]
                    rss = new
                    acc_s += 1
                    since += 1
                    if since >= refresh_every:
                        since = 0
                        build(a, aty, colsq, colsn, k, R, z, cols, w)
                        fresh = energy(yy, z, k)
                        if abs(rss - fresh) > drift_tol * fresh + drift_floor:
                            return rss, best, accepted + acc_s, since, 1
                        rss = fresh
                    if rss < best:
                        best = rss
                        for c in range(k):
                            best_cols[c] = cols[c]
            sum_e += rss
            if rss < mn:
                mn = rss
            if do_record:
                mask = 0
                for c in range(k):
                    mask |= np.int64(1) << cols[c]
                record[t] = mask
            t += 1
        accepted += acc_s
        if steps_per_stage > 0:
            stage_mean[s] = sum_e / steps_per_stage
        else:
            stage_mean[s] = rss
        stage_min[s] = mn
        stage_acc[s] = acc_s
    return rss, best, accepted, since, 0
