# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled walk-counting and shortest-path kernels (see ``_pycore`` for the reference)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def count_walks(steps, starts):
    cdef Py_ssize_t n_steps = len(steps)
    if n_steps == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e.copy(), e.copy()
    cdef Py_ssize_t n = len(steps[0][0]) - 1
    cdef i64[::1] indptr, indices, weights
    cdef i64[::1] cur = np.zeros(n, dtype=np.int64)
    cdef i64[::1] nxt = np.zeros(n, dtype=np.int64)
    cdef i64[::1] cur_list = np.zeros(n, dtype=np.int64)
    cdef i64[::1] nxt_list = np.zeros(n, dtype=np.int64)
    cdef i64[::1] st = np.ascontiguousarray(starts, dtype=np.int64)
    cdef Py_ssize_t n_cur, n_nxt, a, b, t, si
    cdef i64 s, u, v, c
    csr = [(np.ascontiguousarray(p, dtype=np.int64), np.ascontiguousarray(i, dtype=np.int64),
            np.ascontiguousarray(w, dtype=np.int64)) for p, i, w in steps]
    rows, cols, vals = [], [], []
    for si in range(st.shape[0]):
        s = st[si]
        cur[s] = 1
        cur_list[0] = s
        n_cur = 1
        for t in range(n_steps):
            indptr, indices, weights = csr[t]
            n_nxt = 0
            for a in range(n_cur):
                u = cur_list[a]
                c = cur[u]
                cur[u] = 0
                if c == 0:
                    continue
                for b in range(indptr[u], indptr[u + 1]):
                    v = indices[b]
                    if nxt[v] == 0:
                        nxt_list[n_nxt] = v
                        n_nxt += 1
                    nxt[v] += c * weights[b]
            if t < n_steps - 1 and nxt[s] != 0:
                nxt[s] = 0
            cur, nxt = nxt, cur
            cur_list, nxt_list = nxt_list, cur_list
            n_cur = n_nxt
            if n_cur == 0:
                break
        ends = sorted([cur_list[a] for a in range(n_cur)])
        for v in ends:
            c = cur[v]
            cur[v] = 0
            if v == s or c == 0:
                continue
            rows.append(s)
            cols.append(v)
            vals.append(c)
    return (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=np.int64))


def shortest_path_scores(indptr_in, indices_in, Py_ssize_t n):
    cdef i64[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int64)
    cdef i64[::1] indices = np.ascontiguousarray(indices_in, dtype=np.int64)
    bc_arr = np.zeros(n, dtype=np.float64)
    harm_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] bc = bc_arr
    cdef double[::1] harm = harm_arr
    cdef double[::1] sigma = np.zeros(n, dtype=np.float64)
    cdef double[::1] delta = np.zeros(n, dtype=np.float64)
    cdef i64[::1] dist = np.zeros(n, dtype=np.int64)
    cdef i64[::1] order = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t s, head, tail, k, idx
    cdef i64 v, w
    cdef double h
    for s in range(n):
        for k in range(n):
            sigma[k] = 0.0
            delta[k] = 0.0
            dist[k] = -1
        sigma[s] = 1.0
        dist[s] = 0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            v = order[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        h = 0.0
        for idx in range(1, tail):
            h += 1.0 / dist[order[idx]]
        harm[s] = h
        # predecessors are recovered from the BFS layering instead of stored lists
        for idx in range(tail - 1, -1, -1):
            w = order[idx]
            for k in range(indptr[w], indptr[w + 1]):
                v = indices[k]
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    for k in range(n):
        bc[k] /= 2.0
    return bc_arr, harm_arr
