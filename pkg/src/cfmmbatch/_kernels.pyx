# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-half kernels. Same contract as _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY, NAN

cnp.import_array()

BACKEND = "cython"

cdef double CAP = 1.0 + 1e-12


cdef inline double _sold(long k, double a, double b, double z) nogil:
    if k == 0:
        return a if z > b else 0.0
    if k == 1:
        return a - b / z if a * z > b else 0.0
    return NAN


cdef inline double _phi(long k, double a, double b, double z) nogil:
    if k == 0:
        return a * log(z / b) if z > b else 0.0
    if k == 1:
        return a * log(a * z / b) - a + b / z if a * z > b else 0.0
    return NAN


cdef inline double _negg(long k, double a, double b, double x) nogil:
    cdef double r, v
    if k == 0:
        return x * log(b) if x <= a * CAP else INFINITY
    if k == 1:
        r = a - x
        if r < 0:
            if x > a * CAP:
                return INFINITY
            r = 0.0
        v = x * log(b) + x
        if a > 0:
            v -= a * log(a)
        if r > 0:
            v += r * log(r)
        return v
    return NAN


cdef inline double _lnq(long k, double a, double b, double x) nogil:
    cdef double r
    if k == 0:
        return log(b) if x <= a * CAP else INFINITY
    if k == 1:
        r = a - x
        return log(b) - log(r) if r > 0 else INFINITY
    return NAN


def _prep(kind, p0, p1, v):
    return (
        np.ascontiguousarray(kind, dtype=np.int64),
        np.ascontiguousarray(p0, dtype=np.float64),
        np.ascontiguousarray(p1, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.float64),
    )


def half_sold(kind, p0, p1, z):
    cdef const cnp.int64_t[:] k
    cdef const double[:] a, b, zz
    k, a, b, zz = _prep(kind, p0, p1, z)
    out = np.empty(zz.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(zz.shape[0]):
            o[i] = _sold(k[i], a[i], b[i], zz[i])
    return out


def half_phi(kind, p0, p1, z):
    cdef const cnp.int64_t[:] k
    cdef const double[:] a, b, zz
    k, a, b, zz = _prep(kind, p0, p1, z)
    out = np.empty(zz.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(zz.shape[0]):
            o[i] = _phi(k[i], a[i], b[i], zz[i])
    return out


def half_negg(kind, p0, p1, x):
    cdef const cnp.int64_t[:] k
    cdef const double[:] a, b, xx
    k, a, b, xx = _prep(kind, p0, p1, x)
    out = np.empty(xx.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xx.shape[0]):
            o[i] = _negg(k[i], a[i], b[i], xx[i])
    return out


def half_lnq(kind, p0, p1, x):
    cdef const cnp.int64_t[:] k
    cdef const double[:] a, b, xx
    k, a, b, xx = _prep(kind, p0, p1, x)
    out = np.empty(xx.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xx.shape[0]):
            o[i] = _lnq(k[i], a[i], b[i], xx[i])
    return out


def convex_terms(kind, p0, p1, pa, pb, y):
    cdef const cnp.int64_t[:] k
    cdef const double[:] a, b, yy
    k, a, b, yy = _prep(kind, p0, p1, y)
    cdef const double[:] qa = np.ascontiguousarray(pa, dtype=np.float64)
    cdef const double[:] qb = np.ascontiguousarray(pb, dtype=np.float64)
    cdef Py_ssize_t n = yy.shape[0], i
    obj = np.empty(n)
    g_pa = np.empty(n)
    g_pb = np.empty(n)
    g_y = np.empty(n)
    cdef double[:] o = obj, ga = g_pa, gb = g_pb, gy = g_y
    cdef double rho, x, phi, d, ng, lq, xlq
    with nogil:
        for i in range(n):
            rho = qa[i] / qb[i]
            x = yy[i] / qa[i]
            phi = _phi(k[i], a[i], b[i], rho)
            d = _sold(k[i], a[i], b[i], rho)
            ng = _negg(k[i], a[i], b[i], x)
            lq = _lnq(k[i], a[i], b[i], x)
            xlq = x * lq if x > 0 else 0.0
            o[i] = qa[i] * (phi + ng)
            ga[i] = phi + d + ng - xlq
            gb[i] = -rho * d
            gy[i] = lq
    return obj, g_pa, g_pb, g_y


def excess_grid(kind, p0, p1, side, grid):
    cdef const cnp.int64_t[:] k = np.ascontiguousarray(kind, dtype=np.int64)
    cdef const cnp.int64_t[:] s = np.ascontiguousarray(side, dtype=np.int64)
    cdef const double[:] a = np.ascontiguousarray(p0, dtype=np.float64)
    cdef const double[:] b = np.ascontiguousarray(p1, dtype=np.float64)
    cdef const double[:] g = np.ascontiguousarray(grid, dtype=np.float64)
    out = np.zeros(g.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i, j
    cdef double z, inv, acc, dz
    with nogil:
        for i in range(g.shape[0]):
            inv = 1.0 / g[i]
            acc = 0.0
            for j in range(k.shape[0]):
                if k[j] != 0 and k[j] != 1:
                    continue
                z = g[i] if s[j] == 0 else inv
                dz = _sold(k[j], a[j], b[j], z)
                if s[j] == 0:
                    acc -= dz
                else:
                    acc += dz * inv
            o[i] = acc
    return out
