# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled loops for the per-coordinate recurrences.

Semantics match ``_pykernels`` exactly; only the evaluation strategy differs
(single pass, no temporaries).
"""
import numpy as np
from libc.math cimport sqrt, fabs


def prefix_sq_norms(const double[:, ::1] G):
    cdef Py_ssize_t T = G.shape[0], d = G.shape[1], t, i
    out = np.empty((T, d))
    cdef double[:, ::1] S = out
    cdef double[:] acc = np.zeros(d)
    for t in range(T):
        for i in range(d):
            acc[i] += G[t, i] * G[t, i]
            S[t, i] = sqrt(acc[i])
    return out


def lemma4_terms(const double[:, ::1] G):
    cdef Py_ssize_t T = G.shape[0], d = G.shape[1], t, i
    out = np.zeros(d)
    cdef double[:] res = out
    cdef double[:] acc = np.zeros(d)
    cdef double sq, s
    for t in range(T):
        for i in range(d):
            sq = G[t, i] * G[t, i]
            acc[i] += sq
            s = sqrt(acc[i])
            if s > 0:
                res[i] += sq / s
    return out


def lemma103_terms(const double[:, ::1] G):
    cdef Py_ssize_t T = G.shape[0], d = G.shape[1], t, i
    out = np.zeros(d)
    cdef double[:] res = out
    cdef double rt
    for t in range(T):
        rt = sqrt(<double>(t + 1))
        for i in range(d):
            res[i] += fabs(G[t, i]) / rt
    return out


def adam_moments(const double[:, ::1] G, double beta1, double beta2, double lam=1.0):
    cdef Py_ssize_t T = G.shape[0], d = G.shape[1], t, i
    mh = np.empty((T, d))
    vh = np.empty((T, d))
    cdef double[:, ::1] MH = mh
    cdef double[:, ::1] VH = vh
    cdef double[:] m = np.zeros(d)
    cdef double[:] v = np.zeros(d)
    cdef double b1_decay = beta1, b1_pow = 1.0, b2_pow = 1.0, g, bc1, bc2
    for t in range(T):
        b1_pow *= beta1
        b2_pow *= beta2
        bc1 = 1.0 - b1_pow
        bc2 = 1.0 - b2_pow
        for i in range(d):
            g = G[t, i]
            m[i] = b1_decay * m[i] + (1.0 - b1_decay) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g)
            MH[t, i] = m[i] / bc1
            VH[t, i] = v[i] / bc2
        b1_decay *= lam
    return mh, vh


def lemma104_terms(const double[:, ::1] G, double beta1, double beta2):
    cdef Py_ssize_t T = G.shape[0], d = G.shape[1], t, i
    out = np.zeros(d)
    cdef double[:] res = out
    cdef double[:] m = np.zeros(d)
    cdef double[:] v = np.zeros(d)
    cdef double b1_pow = 1.0, b2_pow = 1.0, g, bc1, bc2, mhat, vhat, den
    for t in range(T):
        b1_pow *= beta1
        b2_pow *= beta2
        bc1 = 1.0 - b1_pow
        bc2 = 1.0 - b2_pow
        for i in range(d):
            g = G[t, i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g)
            mhat = m[i] / bc1
            vhat = v[i] / bc2
            den = sqrt((t + 1) * vhat)
            if den > 0:
                res[i] += (mhat * mhat) / den
    return out


def adagrad_update(const double[::1] theta, const double[::1] accum, const double[::1] g,
                   double eta, double eps):
    cdef Py_ssize_t d = theta.shape[0], i
    th = np.empty(d)
    ac = np.empty(d)
    cdef double[::1] TH = th
    cdef double[::1] AC = ac
    cdef double den
    for i in range(d):
        AC[i] = accum[i] + g[i] * g[i]
        den = sqrt(AC[i] + eps)
        if den > 0:
            TH[i] = theta[i] - (eta * g[i]) / den
        else:
            TH[i] = theta[i]
    return th, ac


def adam_update(const double[::1] theta, const double[::1] m, const double[::1] v,
                const double[::1] g, double beta1_t, double beta2, double bc1, double bc2,
                double eta_t, double eps):
    cdef Py_ssize_t d = theta.shape[0], i
    th = np.empty(d)
    mo = np.empty(d)
    vo = np.empty(d)
    cdef double[::1] TH = th
    cdef double[::1] MO = mo
    cdef double[::1] VO = vo
    cdef double den
    for i in range(d):
        MO[i] = beta1_t * m[i] + (1.0 - beta1_t) * g[i]
        VO[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i])
        den = sqrt(VO[i] / bc2) + eps
        if den > 0:
            TH[i] = theta[i] - (eta_t * (MO[i] / bc1)) / den
        else:
            TH[i] = theta[i]
    return th, mo, vo
