# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rollout kernel: one rollout at a time, no temporaries per step."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()


def se_rollouts(x0, noise, X, L, h, sf2, ell):
    cdef const double[:, ::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const double[:, :, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, :, ::1] Lv = np.ascontiguousarray(L, dtype=np.float64)
    cdef const double[:, ::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] sf2v = np.ascontiguousarray(sf2, dtype=np.float64)
    cdef const double[::1] ellv = np.ascontiguousarray(ell, dtype=np.float64)
    cdef Py_ssize_t R = nz.shape[0], S = nz.shape[1], n = nz.shape[2], m = Xv.shape[0]
    out = np.empty((R, S + 1, n))
    cdef double[:, :, ::1] st = out
    cdef double[::1] sq = np.empty(m)
    cdef double[::1] kq = np.empty(m)
    cdef double[::1] v = np.empty(m)
    cdef double[::1] cur = np.empty(n)
    cdef double[::1] inv2l2 = np.empty(n)
    cdef Py_ssize_t r, k, i, j, p, d
    cdef double acc, diff, mean, var, s

    for i in range(n):
        inv2l2[i] = -0.5 / (ellv[i] * ellv[i])
    with nogil:
        for r in range(R):
            for d in range(n):
                cur[d] = x0v[r, d]
                st[r, 0, d] = cur[d]
            for k in range(S):
                for j in range(m):
                    acc = 0.0
                    for d in range(n):
                        diff = cur[d] - Xv[j, d]
                        acc = acc + diff * diff
                    sq[j] = acc
                for i in range(n):
                    mean = 0.0
                    for j in range(m):
                        kq[j] = sf2v[i] * exp(sq[j] * inv2l2[i])
                        mean = mean + kq[j] * hv[i, j]
                    # forward substitution L v = kq
                    s = 0.0
                    for j in range(m):
                        acc = kq[j]
                        for p in range(j):
                            acc = acc - Lv[i, j, p] * v[p]
                        v[j] = acc / Lv[i, j, j]
                        s = s + v[j] * v[j]
                    var = sf2v[i] - s
                    if var < 0.0:
                        var = 0.0
                    st[r, k + 1, i] = mean + sqrt(var) * nz[r, k, i]
                for i in range(n):
                    cur[i] = st[r, k + 1, i]
    return out
