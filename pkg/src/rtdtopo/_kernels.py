"""Numba kernels for simplex enumeration and boundary reduction."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def enum_edges(d):
    """Finite off-diagonal pairs i < j of a square matrix."""
    n = d.shape[0]
    cap = n * (n - 1) // 2
    u = np.empty(cap, np.int64)
    v = np.empty(cap, np.int64)
    val = np.empty(cap, np.float64)
    m = 0
    for i in range(n):
        for j in range(i + 1, n):
            w = d[i, j]
            if np.isfinite(w):
                u[m] = i
                v[m] = j
                val[m] = w
                m += 1
    return u[:m].copy(), v[:m].copy(), val[:m].copy()


@njit(cache=True)
def enum_triangles(d):
    """Triples i < j < k with all three edges finite; value = max edge."""
    n = d.shape[0]
    cap = n * (n - 1) * (n - 2) // 6
    a = np.empty(cap, np.int64)
    b = np.empty(cap, np.int64)
    c = np.empty(cap, np.int64)
    val = np.empty(cap, np.float64)
    m = 0
    for i in range(n):
        for j in range(i + 1, n):
            dij = d[i, j]
            if not np.isfinite(dij):
                continue
            for k in range(j + 1, n):
                dik = d[i, k]
                djk = d[j, k]
                if not (np.isfinite(dik) and np.isfinite(djk)):
                    continue
                w = dij
                if dik > w:
                    w = dik
                if djk > w:
                    w = djk
                a[m] = i
                b[m] = j
                c[m] = k
                val[m] = w
                m += 1
    return a[:m].copy(), b[:m].copy(), c[:m].copy(), val[:m].copy()


@njit(cache=True)
def reduce_columns(cols, n_rows, cleared):
    """Left-to-right Z/2 column reduction of a fixed-width boundary matrix.

    cols[j] holds the sorted row indices of column j.  Columns flagged in
    ``cleared`` are skipped (they are known to reduce to zero because their
    row already appeared as a pivot one dimension up).  Returns
    (pivot_owner, positive): pivot_owner[r] is the column whose reduced form
    has lowest row r, or -1; positive[j] is True when column j reduces to
    zero.  The pairing is identical to reducing without the skip, since a
    cleared column is exactly one that would vanish.
    """
    n_cols, width = cols.shape
    pivot_owner = np.full(n_rows, -1, np.int64)
    positive = np.zeros(n_cols, np.bool_)
    col_start = np.full(n_cols, -1, np.int64)
    col_len = np.zeros(n_cols, np.int64)
    cap = 1024 + 4 * width * min(n_cols, n_rows + 1)
    data = np.empty(cap, np.int64)
    used = 0
    buf_a = np.empty(n_rows + width, np.int64)
    buf_b = np.empty(n_rows + width, np.int64)
    for j in range(n_cols):
        if cleared[j]:
            positive[j] = True
            continue
        la = width
        for t in range(width):
            buf_a[t] = cols[j, t]
        piv = -1
        while la > 0:
            piv = buf_a[la - 1]
            owner = pivot_owner[piv]
            if owner < 0:
                break
            s = col_start[owner]
            lb = col_len[owner]
            ia = 0
            ib = 0
            lc = 0
            while ia < la and ib < lb:
                x = buf_a[ia]
                y = data[s + ib]
                if x == y:
                    ia += 1
                    ib += 1
                elif x < y:
                    buf_b[lc] = x
                    lc += 1
                    ia += 1
                else:
                    buf_b[lc] = y
                    lc += 1
                    ib += 1
            while ia < la:
                buf_b[lc] = buf_a[ia]
                lc += 1
                ia += 1
            while ib < lb:
                buf_b[lc] = data[s + ib]
                lc += 1
                ib += 1
            tmp = buf_a
            buf_a = buf_b
            buf_b = tmp
            la = lc
        if la == 0:
            positive[j] = True
        else:
            pivot_owner[piv] = j
            if used + la > data.shape[0]:
                newcap = data.shape[0]
                while newcap < used + la:
                    newcap *= 2
                nd = np.empty(newcap, np.int64)
                nd[:used] = data[:used]
                data = nd
            for t in range(la):
                data[used + t] = buf_a[t]
            col_start[j] = used
            col_len[j] = la
            used += la
    return pivot_owner, positive
