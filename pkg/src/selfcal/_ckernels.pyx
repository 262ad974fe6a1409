# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``. Same signatures, same results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()

BACKEND = "cython"


cdef inline double cabs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def prufer_decode_batch(codes, Py_ssize_t n):
    if n < 3:
        raise ValueError("Prüfer decoding needs n >= 3")
    cdef Py_ssize_t width = n - 2 if n > 2 else 0
    cdef cnp.int64_t[:, ::1] seqs = np.ascontiguousarray(codes, dtype=np.int64).reshape(-1, width)
    cdef Py_ssize_t rows = seqs.shape[0]
    out_arr = np.empty((rows, n - 1, 2), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] out = out_arr
    cdef cnp.int64_t[::1] degree = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t row, i, k, ptr, leaf, v, u
    for row in range(rows):
        for i in range(n):
            degree[i] = 1
        for k in range(width):
            degree[seqs[row, k]] += 1
        # linear-time decode: ptr scans for the smallest leaf
        ptr = 0
        while degree[ptr] != 1:
            ptr += 1
        leaf = ptr
        for k in range(width):
            v = seqs[row, k]
            out[row, k, 0] = leaf
            out[row, k, 1] = v
            degree[leaf] -= 1
            degree[v] -= 1
            if degree[v] == 1 and v < ptr:
                leaf = v
            else:
                ptr += 1
                while degree[ptr] != 1:
                    ptr += 1
                leaf = ptr
        u = -1
        for i in range(n):
            if degree[i] == 1:
                if u < 0:
                    u = i
                else:
                    out[row, n - 2, 0] = u
                    out[row, n - 2, 1] = i
                    break
    return out_arr


def depths_batch(edges, Py_ssize_t n, Py_ssize_t root):
    cdef cnp.int64_t[:, :, ::1] e = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, n - 1, 2)
    cdef Py_ssize_t rows = e.shape[0]
    out_arr = np.empty((rows, n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef cnp.int64_t[::1] dist = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t row, i, k, head, tail, v, p, q
    cdef bint changed
    for row in range(rows):
        for i in range(n):
            dist[i] = -1
        dist[root] = 0
        queue[0] = root
        head = 0
        tail = 1
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(n - 1):
                p = e[row, k, 0]
                q = e[row, k, 1]
                if p == v and dist[q] < 0:
                    dist[q] = dist[v] + 1
                    queue[tail] = q
                    tail += 1
                elif q == v and dist[p] < 0:
                    dist[p] = dist[v] + 1
                    queue[tail] = p
                    tail += 1
        for i in range(n):
            out[row, i] = dist[i] - 1
    return out_arr


def full_recursion(children, parents, y_down, y_up, alpha_f, beta_f, h,
                   Py_ssize_t ref, Py_ssize_t m, double tiny_a, double tiny_b):
    cdef cnp.int64_t[::1] ch = np.ascontiguousarray(children, dtype=np.int64)
    cdef cnp.int64_t[::1] pa = np.ascontiguousarray(parents, dtype=np.int64)
    cdef double complex[:, ::1] yd = np.ascontiguousarray(np.atleast_2d(y_down), dtype=np.complex128)
    cdef double complex[:, ::1] yu = np.ascontiguousarray(np.atleast_2d(y_up), dtype=np.complex128)
    cdef Py_ssize_t trials = yd.shape[0]
    cdef double complex[::1] af = np.broadcast_to(np.asarray(alpha_f, dtype=np.complex128), (trials,)).copy()
    cdef double complex[::1] bf = np.broadcast_to(np.asarray(beta_f, dtype=np.complex128), (trials,)).copy()
    cdef double complex hh = h
    a_arr = np.zeros((trials, m), dtype=np.complex128)
    b_arr = np.zeros((trials, m), dtype=np.complex128)
    bad_arr = np.zeros(trials, dtype=np.uint8)
    cdef double complex[:, ::1] ah = a_arr
    cdef double complex[:, ::1] bh = b_arr
    cdef cnp.uint8_t[::1] bad = bad_arr
    cdef Py_ssize_t t, k, c, p, nk = ch.shape[0]
    cdef double complex bp, ap
    cdef double ta2 = tiny_a * tiny_a, tb2 = tiny_b * tiny_b
    with nogil:
        for t in range(trials):
            ah[t, ref] = af[t]
            bh[t, ref] = bf[t]
            for k in range(nk):
                c = ch[k]
                p = pa[k]
                bp = bh[t, p]
                ap = ah[t, p]
                if cabs2(bp) < tb2 or cabs2(ap) < ta2 or not (isfinite(bp.real) and isfinite(bp.imag) and isfinite(ap.real) and isfinite(ap.imag)):
                    bad[t] = 1
                    break
                ah[t, c] = yd[t, k] / (hh * bp)
                bh[t, c] = yu[t, k] / (hh * ap)
            if not bad[t]:
                for k in range(nk):
                    c = ch[k]
                    if not (isfinite(ah[t, c].real) and isfinite(ah[t, c].imag) and isfinite(bh[t, c].real) and isfinite(bh[t, c].imag)):
                        bad[t] = 1
                        break
    return a_arr, b_arr, bad_arr.astype(bool)


def relative_recursion(children, parents, y_down, y_up, c_f, Py_ssize_t ref, Py_ssize_t m):
    cdef cnp.int64_t[::1] ch = np.ascontiguousarray(children, dtype=np.int64)
    cdef cnp.int64_t[::1] pa = np.ascontiguousarray(parents, dtype=np.int64)
    cdef double complex[:, ::1] yd = np.ascontiguousarray(np.atleast_2d(y_down), dtype=np.complex128)
    cdef double complex[:, ::1] yu = np.ascontiguousarray(np.atleast_2d(y_up), dtype=np.complex128)
    cdef Py_ssize_t trials = yd.shape[0]
    cdef double complex[::1] cf = np.broadcast_to(np.asarray(c_f, dtype=np.complex128), (trials,)).copy()
    c_arr = np.zeros((trials, m), dtype=np.complex128)
    bad_arr = np.zeros(trials, dtype=np.uint8)
    cdef double complex[:, ::1] chat = c_arr
    cdef cnp.uint8_t[::1] bad = bad_arr
    cdef Py_ssize_t t, k, c, p, nk = ch.shape[0]
    cdef double complex z
    with nogil:
        for t in range(trials):
            chat[t, ref] = cf[t]
            for k in range(nk):
                c = ch[k]
                p = pa[k]
                if yd[t, k].real == 0 and yd[t, k].imag == 0:
                    bad[t] = 1
                    break
                z = yu[t, k] / yd[t, k] * chat[t, p]
                if not (isfinite(z.real) and isfinite(z.imag)):
                    bad[t] = 1
                    break
                chat[t, c] = z
    return c_arr, bad_arr.astype(bool)
