# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training loops: logistic / MLP gradient descent and Adam policy
ascent. Semantics match ``ref.py``; see that module for documentation."""

import numpy as np

from libc.math cimport exp, sqrt, tanh

BACKEND = "compiled"


cdef inline double _sigmoid(double z) nogil:
    cdef double ez
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


def sigmoid(z):
    z_arr = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=np.float64)))
    out = np.empty_like(z_arr)
    cdef double[::1] zv = z_arr
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(zv.shape[0]):
        ov[i] = _sigmoid(zv[i])
    if np.ndim(z) == 0:
        return out[0]
    return out


def logistic_gd(x, y, double reg, double lr, long iters, w, double b):
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    w_arr = np.array(w, dtype=np.float64, copy=True)
    cdef double[:, ::1] xv = x_arr
    cdef double[::1] yv = y_arr
    cdef double[::1] wv = w_arr
    cdef Py_ssize_t n = xv.shape[0], p = xv.shape[1]
    gw_arr = np.zeros(p, dtype=np.float64)
    cdef double[::1] gw = gw_arr
    cdef double gb, z, d
    cdef Py_ssize_t it, i, j
    with nogil:
        for it in range(iters):
            for j in range(p):
                gw[j] = 0.0
            gb = 0.0
            for i in range(n):
                z = b
                for j in range(p):
                    z += xv[i, j] * wv[j]
                d = (_sigmoid(z) - yv[i]) / n
                for j in range(p):
                    gw[j] += xv[i, j] * d
                gb += d
            for j in range(p):
                wv[j] -= lr * (gw[j] + reg * wv[j])
            b -= lr * gb
    return w_arr, b


def mlp_gd(x, y, w1, b1, w2, double b2, double reg, double lr, long iters,
           bint probability):
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    w1_arr = np.array(w1, dtype=np.float64, copy=True)
    b1_arr = np.array(b1, dtype=np.float64, copy=True)
    w2_arr = np.array(w2, dtype=np.float64, copy=True)
    cdef double[:, ::1] xv = x_arr
    cdef double[::1] yv = y_arr
    cdef double[:, ::1] w1v = w1_arr
    cdef double[::1] b1v = b1_arr
    cdef double[::1] w2v = w2_arr
    cdef Py_ssize_t n = xv.shape[0], p = xv.shape[1], h = w1v.shape[0]
    hid_arr = np.zeros(h, dtype=np.float64)
    gw1_arr = np.zeros((h, p), dtype=np.float64)
    gb1_arr = np.zeros(h, dtype=np.float64)
    gw2_arr = np.zeros(h, dtype=np.float64)
    cdef double[::1] hid = hid_arr
    cdef double[:, ::1] gw1 = gw1_arr
    cdef double[::1] gb1 = gb1_arr
    cdef double[::1] gw2 = gw2_arr
    cdef double gb2, z, out, d_out, dh
    cdef Py_ssize_t it, i, j, k
    with nogil:
        for it in range(iters):
            for k in range(h):
                gb1[k] = 0.0
                gw2[k] = 0.0
                for j in range(p):
                    gw1[k, j] = 0.0
            gb2 = 0.0
            for i in range(n):
                out = b2
                for k in range(h):
                    z = b1v[k]
                    for j in range(p):
                        z += w1v[k, j] * xv[i, j]
                    hid[k] = tanh(z)
                    out += w2v[k] * hid[k]
                if probability:
                    d_out = (_sigmoid(out) - yv[i]) / n
                else:
                    d_out = (out - yv[i]) / n
                gb2 += d_out
                for k in range(h):
                    gw2[k] += hid[k] * d_out
                    dh = d_out * w2v[k] * (1.0 - hid[k] * hid[k])
                    gb1[k] += dh
                    for j in range(p):
                        gw1[k, j] += dh * xv[i, j]
            for k in range(h):
                for j in range(p):
                    w1v[k, j] -= lr * (gw1[k, j] + reg * w1v[k, j])
                b1v[k] -= lr * gb1[k]
                w2v[k] -= lr * (gw2[k] + reg * w2v[k])
            b2 -= lr * gb2
    return w1_arr, b1_arr, w2_arr, b2


def adam_max(xb, slope, double lr, long iters, double beta1, double beta2,
             double eps, theta):
    xb_arr = np.ascontiguousarray(xb, dtype=np.float64)
    s_arr = np.ascontiguousarray(slope, dtype=np.float64)
    th_arr = np.array(theta, dtype=np.float64, copy=True)
    cdef double[:, ::1] xv = xb_arr
    cdef double[::1] sv = s_arr
    cdef double[::1] th = th_arr
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1]
    g_arr = np.zeros(d, dtype=np.float64)
    m_arr = np.zeros(d, dtype=np.float64)
    v_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] g = g_arr
    cdef double[::1] m = m_arr
    cdef double[::1] v = v_arr
    cdef double z, pval, c, bc1, bc2
    cdef Py_ssize_t it, i, j
    with nogil:
        for it in range(1, iters + 1):
            for j in range(d):
                g[j] = 0.0
            for i in range(n):
                z = 0.0
                for j in range(d):
                    z += xv[i, j] * th[j]
                pval = _sigmoid(z)
                c = sv[i] * pval * (1.0 - pval) / n
                for j in range(d):
                    g[j] += c * xv[i, j]
            bc1 = 1.0 - beta1 ** it
            bc2 = 1.0 - beta2 ** it
            for j in range(d):
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j]
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j]
                th[j] += lr * (m[j] / bc1) / (sqrt(v[j] / bc2) + eps)
    return th_arr
