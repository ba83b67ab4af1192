# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: batched tanh-MLP forward pass and per-sample Jacobian.

Same contract and parameter layout as ``numpy_backend``; see there.
"""

from libc.math cimport tanh

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def forward(x, params, dims):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(params, dtype=np.float64)
    cdef long[::1] dd = np.asarray(dims, dtype=np.int64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t nl = dd.shape[0] - 1
    cdef Py_ssize_t c_out = dd[nl]
    cdef Py_ssize_t maxw = 0
    cdef Py_ssize_t l, i, j, o
    for l in range(nl + 1):
        if dd[l] > maxw:
            maxw = dd[l]

    offsets_arr = np.empty(nl, dtype=np.int64)
    cdef long[::1] offs = offsets_arr
    cdef Py_ssize_t pos = 0
    for l in range(nl):
        offs[l] = pos
        pos += (dd[l] + 1) * dd[l + 1]

    out_arr = np.empty((n, c_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    buf_arr = np.empty((2, maxw), dtype=np.float64)
    cdef double[:, ::1] buf = buf_arr

    cdef Py_ssize_t cur, nxt, fin, fout, off
    cdef double s
    for i in range(n):
        cur = 0
        for j in range(dd[0]):
            buf[0, j] = xv[i, j]
        for l in range(nl):
            fin = dd[l]
            fout = dd[l + 1]
            off = offs[l]
            nxt = 1 - cur
            for o in range(fout):
                s = pv[off + fin * fout + o]
                for j in range(fin):
                    s += pv[off + o * fin + j] * buf[cur, j]
                if l < nl - 1:
                    buf[nxt, o] = tanh(s)
                else:
                    out[i, o] = s
            cur = nxt
    return out_arr


def forward_jacobian(x, params, dims):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(params, dtype=np.float64)
    cdef long[::1] dd = np.asarray(dims, dtype=np.int64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t nl = dd.shape[0] - 1
    cdef Py_ssize_t c_out = dd[nl]
    cdef Py_ssize_t maxw = 0
    cdef Py_ssize_t l, i, j, o, c, row
    for l in range(nl + 1):
        if dd[l] > maxw:
            maxw = dd[l]

    offsets_arr = np.empty(nl, dtype=np.int64)
    cdef long[::1] offs = offsets_arr
    cdef Py_ssize_t pos = 0
    for l in range(nl):
        offs[l] = pos
        pos += (dd[l] + 1) * dd[l + 1]
    cdef Py_ssize_t p = pos

    out_arr = np.empty((n, c_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    jac_arr = np.zeros((n * c_out, p), dtype=np.float64)
    cdef double[:, ::1] jac = jac_arr
    # acts[l] is the input to layer l (so acts[0] is the sample itself)
    acts_arr = np.empty((nl, maxw), dtype=np.float64)
    cdef double[:, ::1] acts = acts_arr
    delta_arr = np.empty((2, maxw), dtype=np.float64)
    cdef double[:, ::1] delta = delta_arr

    cdef Py_ssize_t cur, nxt, fin, fout, off, h_last, last
    cdef double s
    h_last = dd[nl - 1]
    last = offs[nl - 1]
    for i in range(n):
        for j in range(dd[0]):
            acts[0, j] = xv[i, j]
        for l in range(nl):
            fin = dd[l]
            fout = dd[l + 1]
            off = offs[l]
            for o in range(fout):
                s = pv[off + fin * fout + o]
                for j in range(fin):
                    s += pv[off + o * fin + j] * acts[l, j]
                if l < nl - 1:
                    acts[l + 1, o] = tanh(s)
                else:
                    out[i, o] = s

        for c in range(c_out):
            row = i * c_out + c
            for j in range(h_last):
                jac[row, last + c * h_last + j] = acts[nl - 1, j]
            jac[row, last + c_out * h_last + c] = 1.0
            if nl == 1:
                continue
            cur = 0
            for j in range(h_last):
                delta[cur, j] = pv[last + c * h_last + j] * (
                    1.0 - acts[nl - 1, j] * acts[nl - 1, j]
                )
            for l in range(nl - 2, -1, -1):
                fin = dd[l]
                fout = dd[l + 1]
                off = offs[l]
                for o in range(fout):
                    for j in range(fin):
                        jac[row, off + o * fin + j] = delta[cur, o] * acts[l, j]
                    jac[row, off + fin * fout + o] = delta[cur, o]
                if l > 0:
                    nxt = 1 - cur
                    for j in range(fin):
                        s = 0.0
                        for o in range(fout):
                            s += delta[cur, o] * pv[off + o * fin + j]
                        delta[nxt, j] = s * (1.0 - acts[l, j] * acts[l, j])
                    cur = nxt
    return out_arr, jac_arr
