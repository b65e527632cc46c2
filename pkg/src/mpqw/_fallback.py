"""Pure numpy implementations of the hot kernels.

Same signatures as the compiled ``_kernels`` module; selected at import time
by ``mpqw.kernels`` when the extension is unavailable.
"""

import numpy as np

DIST, BOSON, FERMION = 0, 1, 2


def rank_states(states, stat, V, binom):
    """Ordinal of each row of ``states`` in the lexicographic basis order."""
    states = np.asarray(states, dtype=np.int64)
    dim, m = states.shape
    if stat == DIST:
        powers = V ** np.arange(m - 1, -1, -1, dtype=np.int64)
        return states @ powers
    j = states + (np.arange(m, dtype=np.int64) if stat == BOSON else 0)
    N = V + m - 1 if stat == BOSON else V
    rank = np.zeros(dim, dtype=np.int64)
    prev = np.full(dim, -1, dtype=np.int64)
    for w in range(m):
        rank += binom[N - prev - 1, m - w] - binom[N - j[:, w], m - w]
        prev = j[:, w]
    return rank


def hop_entries(states, nbr_ptr, nbr_idx, stat, V, binom):
    """Off-diagonal hopping entries (row, col, value) of the many-body walk.

    Bosons carry sqrt(n_i (n_j + 1)); fermions carry (-1)^(number of
    particles strictly between the two sites); each move appears once, so
    the returned list already contains both (r, c) and (c, r).
    """
    states = np.asarray(states, dtype=np.int64)
    dim, m = states.shape
    deg = np.diff(nbr_ptr)
    maxdeg = int(deg.max()) if len(deg) else 0
    table = np.full((V, max(maxdeg, 1)), -1, dtype=np.int64)
    for v in range(V):
        table[v, :deg[v]] = nbr_idx[nbr_ptr[v]:nbr_ptr[v + 1]]
    rows_out, cols_out, vals_out = [], [], []
    base = np.arange(dim, dtype=np.int64)
    for w in range(m):
        i = states[:, w]
        if stat == BOSON and w > 0:
            first = states[:, w - 1] != i
        else:
            first = np.ones(dim, dtype=bool)
        if stat == BOSON:
            n_i = (states == i[:, None]).sum(1)
        for d in range(maxdeg):
            j = table[i, d]
            mask = (j >= 0) & first
            if stat == FERMION:
                mask &= ~(states == j[:, None]).any(1)
            if not mask.any():
                continue
            sel = base[mask]
            st = states[mask]
            ii, jj = i[mask], j[mask]
            if stat == BOSON:
                n_j = (st == jj[:, None]).sum(1)
                val = np.sqrt(n_i[mask] * (n_j + 1.0))
            elif stat == FERMION:
                lo, hi = np.minimum(ii, jj), np.maximum(ii, jj)
                between = ((st > lo[:, None]) & (st < hi[:, None])).sum(1)
                val = np.where(between % 2, -1.0, 1.0)
            else:
                val = np.ones(len(sel))
            new = st.copy()
            new[:, w] = jj
            if stat != DIST:
                new.sort(axis=1)
            rows_out.append(sel)
            cols_out.append(rank_states(new, stat, V, binom))
            vals_out.append(val)
    if not rows_out:
        e = np.zeros(0, dtype=np.int64)
        return e, e, np.zeros(0)
    return np.concatenate(cols_out), np.concatenate(rows_out), np.concatenate(vals_out)


def cheb_step(indptr, indices, data, v, w, acc, alpha, beta, coef):
    """w <- alpha*(H v) + beta*v - w ; acc += coef*w  (in place)."""
    hv = _matvec(indptr, indices, data, v)
    w *= -1
    w += alpha * hv
    w += beta * v
    acc += coef * w


_cache = {}


def _matvec(indptr, indices, data, v):
    import scipy.sparse as sp
    key = (id(data), data.shape[0], len(indptr))
    mat = _cache.get(key)
    if mat is None or mat[1] is not data:
        n = len(indptr) - 1
        m = sp.csr_matrix((data.astype(complex), indices, indptr), shape=(n, n))
        _cache.clear()
        _cache[key] = mat = (m, data)
    return mat[0] @ v
