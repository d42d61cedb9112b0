# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused causal attention forward/backward.

Same math as the numpy fallback in pinyinlm.kernels. The T x T and T x D
products go through BLAS dgemm (one call per head, no batch temporaries);
the causal softmax and the softmax-Jacobian row pass are typed loops fused
between the dgemm calls, so no mask or extra (H, T, T) arrays are built.
Arrays are float64 C-contiguous; probs rows beyond the diagonal stay 0.

dgemm is column-major, arrays here are row-major: each call below is
written against the transposed view (C^T = B^T A^T), hence the swapped
operand order and the leading dimensions equal to the row lengths.
"""
from libc.math cimport exp, sqrt

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def attn_forward(double[:, :, ::1] q, double[:, :, ::1] k, double[:, :, ::1] v,
                 double[:, :, ::1] out, double[:, :, ::1] probs):
    cdef int H = <int> q.shape[0], T = <int> q.shape[1], D = <int> q.shape[2]
    cdef Py_ssize_t h, t, s
    cdef double scale = 1.0 / sqrt(<double> D)
    cdef double one = 1.0, zero = 0.0
    cdef double acc, m, z, inv
    cdef double *qh
    cdef double *kh
    cdef double *vh
    cdef double *oh
    cdef double *ph
    for h in range(H):
        qh = &q[h, 0, 0]
        kh = &k[h, 0, 0]
        vh = &v[h, 0, 0]
        oh = &out[h, 0, 0]
        ph = &probs[h, 0, 0]
        # scores = scale * q @ k^T, full T x T into the probs buffer
        dgemm("T", "N", &T, &T, &D, &scale, kh, &D, qh, &D, &zero, ph, &T)
        for t in range(T):
            m = -1e300
            for s in range(t + 1):
                if probs[h, t, s] > m:
                    m = probs[h, t, s]
            z = 0.0
            for s in range(t + 1):
                acc = exp(probs[h, t, s] - m)
                probs[h, t, s] = acc
                z += acc
            inv = 1.0 / z
            for s in range(t + 1):
                probs[h, t, s] *= inv
            for s in range(t + 1, T):
                probs[h, t, s] = 0.0  # dgemm filled the acausal half
        # out = probs @ v
        dgemm("N", "N", &D, &T, &T, &one, vh, &D, ph, &T, &zero, oh, &D)


def attn_backward(double[:, :, ::1] q, double[:, :, ::1] k, double[:, :, ::1] v,
                  double[:, :, ::1] probs, double[:, :, ::1] dout,
                  double[:, :, ::1] dq, double[:, :, ::1] dk, double[:, :, ::1] dv):
    cdef int H = <int> q.shape[0], T = <int> q.shape[1], D = <int> q.shape[2]
    cdef Py_ssize_t h, t, s
    cdef double scale = 1.0 / sqrt(<double> D)
    cdef double one = 1.0, zero = 0.0
    cdef double rowdot
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g_arr = np.empty((T, T), dtype=np.float64)
    cdef double[:, ::1] g = g_arr
    cdef double *gp = &g[0, 0]
    cdef double *qh
    cdef double *kh
    cdef double *vh
    cdef double *ph
    cdef double *doh
    for h in range(H):
        qh = &q[h, 0, 0]
        kh = &k[h, 0, 0]
        vh = &v[h, 0, 0]
        ph = &probs[h, 0, 0]
        doh = &dout[h, 0, 0]
        # dv += probs^T @ dout (probs is zero above the diagonal)
        dgemm("N", "T", &D, &T, &T, &one, doh, &D, ph, &T, &one, &dv[h, 0, 0], &D)
        # dprobs = dout @ v^T
        dgemm("T", "N", &T, &T, &D, &one, vh, &D, doh, &D, &zero, gp, &T)
        # dscores = probs * (dprobs - rowdot) * scale, causal rows only
        for t in range(T):
            rowdot = 0.0
            for s in range(t + 1):
                rowdot += g[t, s] * probs[h, t, s]
            for s in range(t + 1):
                g[t, s] = probs[h, t, s] * (g[t, s] - rowdot) * scale
            for s in range(t + 1, T):
                g[t, s] = 0.0
        # dq += dscores @ k; dk += dscores^T @ q
        dgemm("N", "N", &D, &T, &T, &one, kh, &D, gp, &T, &one, &dq[h, 0, 0], &D)
        dgemm("N", "T", &D, &T, &T, &one, qh, &D, gp, &T, &one, &dk[h, 0, 0], &D)
