# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise kernels: fused loops, no intermediate arrays."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p, tanh as ctanh

cnp.import_array()


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef cnp.ndarray _flat(object x):
    return np.ascontiguousarray(x, dtype=np.float64).ravel()


def sigmoid(object x):
    shape = np.shape(x)
    cdef double[::1] xf = _flat(x)
    out = np.empty(xf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = xf.shape[0]
    with nogil:
        for i in range(n):
            of[i] = _sigmoid(xf[i])
    return out.reshape(shape)


def sigmoid_grad(object y, object g):
    shape = np.shape(y)
    cdef double[::1] yf = _flat(y)
    cdef double[::1] gf = _flat(g)
    out = np.empty(yf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = yf.shape[0]
    with nogil:
        for i in range(n):
            of[i] = gf[i] * yf[i] * (1.0 - yf[i])
    return out.reshape(shape)


def tanh(object x):
    shape = np.shape(x)
    cdef double[::1] xf = _flat(x)
    out = np.empty(xf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = xf.shape[0]
    with nogil:
        for i in range(n):
            of[i] = ctanh(xf[i])
    return out.reshape(shape)


def tanh_grad(object y, object g):
    shape = np.shape(y)
    cdef double[::1] yf = _flat(y)
    cdef double[::1] gf = _flat(g)
    out = np.empty(yf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = yf.shape[0]
    with nogil:
        for i in range(n):
            of[i] = gf[i] * (1.0 - yf[i] * yf[i])
    return out.reshape(shape)


def softplus(object x):
    shape = np.shape(x)
    cdef double[::1] xf = _flat(x)
    out = np.empty(xf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = xf.shape[0]
    cdef double v
    with nogil:
        for i in range(n):
            v = xf[i]
            # log(1 + exp(v)) = max(v, 0) + log1p(exp(-|v|))
            if v >= 0.0:
                of[i] = v + log1p(exp(-v))
            else:
                of[i] = log1p(exp(v))
    return out.reshape(shape)


def softplus_grad(object x, object g):
    shape = np.shape(x)
    cdef double[::1] xf = _flat(x)
    cdef double[::1] gf = _flat(g)
    out = np.empty(xf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = xf.shape[0]
    with nogil:
        for i in range(n):
            of[i] = gf[i] * _sigmoid(xf[i])
    return out.reshape(shape)


def leaky_relu(object x, double alpha):
    shape = np.shape(x)
    cdef double[::1] xf = _flat(x)
    out = np.empty(xf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = xf.shape[0]
    with nogil:
        for i in range(n):
            of[i] = xf[i] if xf[i] >= 0.0 else alpha * xf[i]
    return out.reshape(shape)


def leaky_relu_grad(object x, object g, double alpha):
    shape = np.shape(x)
    cdef double[::1] xf = _flat(x)
    cdef double[::1] gf = _flat(g)
    out = np.empty(xf.shape[0], dtype=np.float64)
    cdef double[::1] of = out
    cdef Py_ssize_t i, n = xf.shape[0]
    with nogil:
        for i in range(n):
            of[i] = gf[i] if xf[i] >= 0.0 else alpha * gf[i]
    return out.reshape(shape)
