# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: many-body hop assembly and a fused Chebyshev step."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

DEF DIST = 0
DEF BOSON = 1
DEF FERMION = 2
DEF MAXM = 64


cdef inline long long _rank(long long* s, int m, int stat, long long V,
                            long long[:, ::1] binom) nogil:
    cdef long long r = 0, prev = -1, j, N
    cdef int w
    if stat == DIST:
        for w in range(m):
            r = r * V + s[w]
        return r
    N = V + m - 1 if stat == BOSON else V
    for w in range(m):
        j = s[w] + (w if stat == BOSON else 0)
        r += binom[N - prev - 1, m - w] - binom[N - j, m - w]
        prev = j
    return r


def rank_states(states, int stat, long long V, binom):
    cdef long long[:, ::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef long long[:, ::1] bn = np.ascontiguousarray(binom, dtype=np.int64)
    cdef Py_ssize_t dim = st.shape[0], a
    cdef int m = st.shape[1]
    out = np.empty(dim, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for a in range(dim):
            o[a] = _rank(&st[a, 0], m, stat, V, bn)
    return out


def hop_entries(states, nbr_ptr, nbr_idx, int stat, long long V, binom):
    """Off-diagonal hopping entries; see the numpy fallback for conventions."""
    cdef long long[:, ::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef long long[::1] ptr = np.ascontiguousarray(nbr_ptr, dtype=np.int64)
    cdef long long[::1] idx = np.ascontiguousarray(nbr_idx, dtype=np.int64)
    cdef long long[:, ::1] bn = np.ascontiguousarray(binom, dtype=np.int64)
    cdef Py_ssize_t dim = st.shape[0], a, cap, count = 0
    cdef int m = st.shape[1], w, u, pos
    cdef long long i, j, lo, hi, tmp
    cdef long long buf[MAXM]
    cdef int n_i, n_j, between, skip
    cdef double val
    if m > MAXM:
        raise ValueError("too many particles for the compiled kernel")
    cap = 0
    for a in range(dim):
        for w in range(m):
            i = st[a, w]
            cap += ptr[i + 1] - ptr[i]
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap, dtype=np.float64)
    cdef long long[::1] R = rows
    cdef long long[::1] C = cols
    cdef double[::1] Vv = vals
    with nogil:
        for a in range(dim):
            for w in range(m):
                i = st[a, w]
                if stat == BOSON and w > 0 and st[a, w - 1] == i:
                    continue
                n_i = 0
                if stat == BOSON:
                    for u in range(m):
                        if st[a, u] == i:
                            n_i += 1
                for pos in range(ptr[i], ptr[i + 1]):
                    j = idx[pos]
                    val = 1.0
                    if stat == FERMION:
                        skip = 0
                        between = 0
                        lo = i if i < j else j
                        hi = j if i < j else i
                        for u in range(m):
                            if st[a, u] == j:
                                skip = 1
                            elif st[a, u] > lo and st[a, u] < hi:
                                between += 1
                        if skip:
                            continue
                        if between % 2:
                            val = -1.0
                    elif stat == BOSON:
                        n_j = 0
                        for u in range(m):
                            if st[a, u] == j:
                                n_j += 1
                        val = sqrt(<double>n_i * (n_j + 1))
                    for u in range(m):
                        buf[u] = st[a, u]
                    buf[w] = j
                    if stat != DIST:
                        # one element moved: restore sorted order by insertion
                        u = w
                        while u > 0 and buf[u - 1] > buf[u]:
                            tmp = buf[u - 1]; buf[u - 1] = buf[u]; buf[u] = tmp
                            u -= 1
                        while u < m - 1 and buf[u + 1] < buf[u]:
                            tmp = buf[u + 1]; buf[u + 1] = buf[u]; buf[u] = tmp
                            u += 1
                    R[count] = _rank(buf, m, stat, V, bn)
                    C[count] = a
                    Vv[count] = val
                    count += 1
    return rows[:count], cols[:count], vals[:count]


def cheb_step(indptr, indices, data, v, w, acc, double alpha, double beta, complex coef):
    """w <- alpha*(H v) + beta*v - w ; acc += coef*w, for real CSR H and complex vectors."""
    cdef int[::1] ip = indptr
    cdef int[::1] ix = indices
    cdef double[::1] dt = data
    cdef double complex[::1] vv = v
    cdef double complex[::1] ww = w
    cdef double complex[::1] aa = acc
    cdef Py_ssize_t n = vv.shape[0], r, p
    cdef double sr, si
    cdef double complex y
    cdef double complex c = coef
    with nogil:
        for r in range(n):
            sr = 0.0
            si = 0.0
            for p in range(ip[r], ip[r + 1]):
                sr = sr + dt[p] * vv[ix[p]].real
                si = si + dt[p] * vv[ix[p]].imag
            y = alpha * (sr + 1j * si) + beta * vv[r] - ww[r]
            ww[r] = y
            aa[r] = aa[r] + c * y
