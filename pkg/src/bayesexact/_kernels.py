"""Compiled inner loops for fixed-margin table enumeration and counting."""

import numpy as np
from numba import njit


@njit(cache=True)
def gamma_stat(t):
    """Sample gamma of an integer table; -inf when undefined."""
    R, C = t.shape
    below = np.zeros(C, np.int64)
    conc = 0
    disc = 0
    for i in range(R - 1, -1, -1):
        if i < R - 1:
            # below holds column sums of rows i+1.. ; sweep for >j and <j
            right = 0
            for j in range(C - 1, -1, -1):
                conc += t[i, j] * right
                right += below[j]
            left = 0
            for j in range(C):
                disc += t[i, j] * left
                left += below[j]
        for j in range(C):
            below[j] += t[i, j]
    if conc + disc == 0:
        return -np.inf
    return (conc - disc) / (conc + disc)


@njit(cache=True)
def gamma_many(tables):
    """gamma_stat over a stack of tables (n, R, C)."""
    out = np.empty(tables.shape[0])
    for k in range(tables.shape[0]):
        out[k] = gamma_stat(tables[k])
    return out


@njit(cache=True)
def zero_stat(t):
    return 0.0


@njit(cache=True)
def _cell_bounds(i, j, rowrem, colrem, below):
    rr = rowrem[i]
    right = 0
    for k in range(j + 1, colrem.shape[0]):
        right += colrem[k]
    hi = min(rr, colrem[j])
    lo = max(0, rr - right, colrem[j] - below[i])
    return lo, hi


@njit(cache=True)
def _leaf(table, lf, log_const, stat, observed, acc):
    lp = log_const
    R, C = table.shape
    for i in range(R):
        for j in range(C):
            lp -= lf[table[i, j]]
    p = np.exp(lp)
    # acc: count, qualifying, total(sum, comp), tail(sum, comp)
    acc[0] += 1.0
    t = acc[2] + p
    if abs(acc[2]) >= p:
        acc[3] += (acc[2] - t) + p
    else:
        acc[3] += (p - t) + acc[2]
    acc[2] = t
    if stat(table) >= observed:
        acc[1] += 1.0
        t = acc[4] + p
        if abs(acc[4]) >= p:
            acc[5] += (acc[4] - t) + p
        else:
            acc[5] += (p - t) + acc[4]
        acc[4] = t


@njit(cache=True)
def tail_kernel(rows, cols, first_rows, lf, log_const, stat, observed):
    """Enumerate every table below each given first row.

    Returns an array with one line per first row:
    (tables visited, tables with stat >= observed, null mass, tail mass).
    Cells are filled row by row, left to right; the last column and the
    last row are forced by the margins.
    """
    R = rows.shape[0]
    C = cols.shape[0]
    out = np.zeros((first_rows.shape[0], 4))
    table = np.zeros((R, C), np.int64)
    below = np.zeros(R, np.int64)
    for i in range(R - 2, -1, -1):
        below[i] = below[i + 1] + rows[i + 1]
    nfree = (R - 2) * (C - 1) if R >= 2 else 0
    val = np.zeros(max(nfree, 1), np.int64)
    hi = np.zeros(max(nfree, 1), np.int64)
    forced = np.zeros(max(nfree, 1), np.int64)
    acc = np.zeros(6)
    for p in range(first_rows.shape[0]):
        acc[:] = 0.0
        rowrem = rows.copy()
        rowrem[0] = 0
        colrem = cols.copy()
        for j in range(C):
            table[0, j] = first_rows[p, j]
            colrem[j] -= first_rows[p, j]
        if R == 1:
            _leaf(table, lf, log_const, stat, observed, acc)
        elif nfree == 0:
            for j in range(C):
                table[R - 1, j] = colrem[j]
            _leaf(table, lf, log_const, stat, observed, acc)
        else:
            k = 0
            lo, h = _cell_bounds(1, 0, rowrem, colrem, below)
            val[0] = lo
            hi[0] = h
            while True:
                i = 1 + k // (C - 1)
                j = k % (C - 1)
                if val[k] > hi[k]:
                    k -= 1
                    if k < 0:
                        break
                    i = 1 + k // (C - 1)
                    j = k % (C - 1)
                    # undo cell k
                    if j == C - 2:
                        colrem[C - 1] += forced[k]
                        rowrem[i] += forced[k]
                    rowrem[i] += val[k]
                    colrem[j] += val[k]
                    val[k] += 1
                    continue
                v = val[k]
                table[i, j] = v
                rowrem[i] -= v
                colrem[j] -= v
                if j == C - 2:
                    f = rowrem[i]
                    forced[k] = f
                    table[i, C - 1] = f
                    colrem[C - 1] -= f
                    rowrem[i] = 0
                if k == nfree - 1:
                    for jj in range(C):
                        table[R - 1, jj] = colrem[jj]
                    _leaf(table, lf, log_const, stat, observed, acc)
                    if j == C - 2:
                        colrem[C - 1] += forced[k]
                        rowrem[i] += forced[k]
                    rowrem[i] += v
                    colrem[j] += v
                    val[k] += 1
                else:
                    k += 1
                    i = 1 + k // (C - 1)
                    j = k % (C - 1)
                    lo, h = _cell_bounds(i, j, rowrem, colrem, below)
                    val[k] = lo
                    hi[k] = h
        out[p, 0] = acc[0]
        out[p, 1] = acc[1]
        out[p, 2] = acc[2] + acc[3]
        out[p, 3] = acc[4] + acc[5]
    return out


@njit(cache=True)
def _binom(n, k):
    if k < 0 or n < k:
        return 0
    res = 1
    for i in range(1, k + 1):
        res = res * (n - k + i) // i
    return res


@njit(cache=True)
def _bounded_compositions(total, bounds):
    """Number of integer vectors x with sum total and 0 <= x_j <= bounds_j."""
    C = bounds.shape[0]
    res = 0
    for mask in range(1 << C):
        rem = total
        sign = 1
        for j in range(C):
            if mask & (1 << j):
                rem -= bounds[j] + 1
                sign = -sign
        if rem >= 0:
            res += sign * _binom(rem + C - 1, C - 1)
    return res


@njit(cache=True)
def count_dense(rows, cols):
    """Count tables with the given margins by a DP over remaining column sums.

    Returns (exact int64 count, float64 shadow count); the caller compares
    the two to detect int64 overflow.
    """
    R = rows.shape[0]
    C = cols.shape[0]
    if R == 1:
        return 1, 1.0
    radix = np.ones(C, np.int64)
    for j in range(1, C):
        radix[j] = radix[j - 1] * (cols[j - 1] + 1)
    size = radix[C - 1] * (cols[C - 1] + 1)
    start = 0
    for j in range(C):
        start += cols[j] * radix[j]
    dp = np.zeros(size, np.int64)
    dpf = np.zeros(size)
    dp[start] = 1
    dpf[start] = 1.0
    colrem = np.zeros(C, np.int64)
    x = np.zeros(C, np.int64)
    for i in range(R - 2):
        new = np.zeros(size, np.int64)
        newf = np.zeros(size)
        for s in range(size):
            if dp[s] == 0:
                continue
            rem = s
            for j in range(C):
                colrem[j] = rem % (cols[j] + 1)
                rem //= cols[j] + 1
            # odometer over x_0..x_{C-2}; x_{C-1} takes what is left
            need = rows[i]
            x[:] = 0
            while True:
                if need <= colrem[C - 1]:
                    t = s - need * radix[C - 1]
                    for jj in range(C - 1):
                        t -= x[jj] * radix[jj]
                    new[t] += dp[s]
                    newf[t] += dpf[s]
                j = C - 2
                while j >= 0:
                    if x[j] < colrem[j] and need > 0:
                        x[j] += 1
                        need -= 1
                        break
                    need += x[j]
                    x[j] = 0
                    j -= 1
                if j < 0:
                    break
        dp = new
        dpf = newf
    total = 0
    totalf = 0.0
    for s in range(size):
        if dp[s] == 0:
            continue
        rem = s
        for j in range(C):
            colrem[j] = rem % (cols[j] + 1)
            rem //= cols[j] + 1
        w = _bounded_compositions(rows[R - 2], colrem)
        total += dp[s] * w
        totalf += dpf[s] * w
    return total, totalf
