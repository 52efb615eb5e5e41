# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of the numpy kernel backend.

Same function set, same formulas, same clamps as ``_numpy``; loops are fused
so each row is touched once. The dispatcher prefers this module when the
extension is built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport acosh, atanh, cosh, fabs, sinh, sqrt, tanh

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double MIN_NORM = 1e-15
cdef double ARTANH_CLIP = 1.0 - 1e-12


cdef inline double _clip_artanh(double v):
    if v > ARTANH_CLIP:
        return ARTANH_CLIP
    if v < -ARTANH_CLIP:
        return -ARTANH_CLIP
    return v


def _as2d(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def artanh(x):
    return np.arctanh(np.clip(x, -ARTANH_CLIP, ARTANH_CLIP))


def acosh_np(x):
    return np.arccosh(np.maximum(x, 1.0))


# ---------------------------------------------------------------------------
# Poincare ball
# ---------------------------------------------------------------------------

def mobius_add(x, y, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ya = _as2d(y)
    cdef Py_ssize_t n = xa.shape[0], d = xa.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, d))
    cdef double x2, y2, xy, den, cx, cy
    for i in range(n):
        x2 = 0.0; y2 = 0.0; xy = 0.0
        for j in range(d):
            x2 += xa[i, j] * xa[i, j]
            y2 += ya[i, j] * ya[i, j]
            xy += xa[i, j] * ya[i, j]
        den = 1.0 - 2.0 * k * xy + k * k * x2 * y2
        if den < MIN_NORM:
            den = MIN_NORM
        cx = (1.0 - 2.0 * k * xy - k * y2) / den
        cy = (1.0 + k * x2) / den
        for j in range(d):
            out[i, j] = cx * xa[i, j] + cy * ya[i, j]
    return out


def poincare_dist_rows(x, y, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ya = _as2d(y)
    cdef Py_ssize_t n = xa.shape[0], d = xa.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double sk = sqrt(-k)
    cdef double d2, x2, y2, a, b, arg, diff
    for i in range(n):
        d2 = 0.0; x2 = 0.0; y2 = 0.0
        for j in range(d):
            diff = xa[i, j] - ya[i, j]
            d2 += diff * diff
            x2 += xa[i, j] * xa[i, j]
            y2 += ya[i, j] * ya[i, j]
        a = 1.0 + k * x2
        if a < MIN_NORM:
            a = MIN_NORM
        b = 1.0 + k * y2
        if b < MIN_NORM:
            b = MIN_NORM
        arg = 1.0 - 2.0 * k * d2 / (a * b)
        if arg < 1.0:
            arg = 1.0
        out[i] = acosh(arg) / sk
    return out


def poincare_pairwise_dist(x, y, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ya = _as2d(y)
    cdef bint same = x is y
    cdef Py_ssize_t n = xa.shape[0], m = ya.shape[0], d = xa.shape[1], i, j, t
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qx = np.empty(n), qy = np.empty(m)
    cdef double sk = sqrt(-k)
    cdef double acc, diff, arg
    for i in range(n):
        acc = 0.0
        for t in range(d):
            acc += xa[i, t] * xa[i, t]
        acc = 1.0 + k * acc
        qx[i] = acc if acc > MIN_NORM else MIN_NORM
    for j in range(m):
        acc = 0.0
        for t in range(d):
            acc += ya[j, t] * ya[j, t]
        acc = 1.0 + k * acc
        qy[j] = acc if acc > MIN_NORM else MIN_NORM
    for i in range(n):
        for j in range(m):
            if same and i == j:
                out[i, j] = 0.0
                continue
            acc = 0.0
            for t in range(d):
                diff = xa[i, t] - ya[j, t]
                acc += diff * diff
            arg = 1.0 - 2.0 * k * acc / (qx[i] * qy[j])
            if arg < 1.0:
                arg = 1.0
            out[i, j] = acosh(arg) / sk
    return out


def poincare_exp0_rows(v, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] va = _as2d(v)
    cdef Py_ssize_t n = va.shape[0], d = va.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, d))
    cdef double sk = sqrt(-k)
    cdef double r, coef
    for i in range(n):
        r = 0.0
        for j in range(d):
            r += va[i, j] * va[i, j]
        r = sqrt(r)
        if r < MIN_NORM:
            r = MIN_NORM
        coef = tanh(sk * r) / (sk * r)
        for j in range(d):
            out[i, j] = coef * va[i, j]
    return out


def poincare_log0_rows(x, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef Py_ssize_t n = xa.shape[0], d = xa.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, d))
    cdef double sk = sqrt(-k)
    cdef double r, coef
    for i in range(n):
        r = 0.0
        for j in range(d):
            r += xa[i, j] * xa[i, j]
        r = sqrt(r)
        if r < MIN_NORM:
            r = MIN_NORM
        coef = atanh(_clip_artanh(sk * r)) / (sk * r)
        for j in range(d):
            out[i, j] = coef * xa[i, j]
    return out


# ---------------------------------------------------------------------------
# Lorentz model
# ---------------------------------------------------------------------------

def lorentz_inner_rows(x, y):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ya = _as2d(y)
    cdef Py_ssize_t n = xa.shape[0], d = xa.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double acc
    for i in range(n):
        acc = -xa[i, 0] * ya[i, 0]
        for j in range(1, d):
            acc += xa[i, j] * ya[i, j]
        out[i] = acc
    return out


def lorentz_dist_rows(x, y, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ya = _as2d(y)
    cdef Py_ssize_t n = xa.shape[0], d = xa.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double sk = sqrt(-k)
    cdef double acc, arg
    cdef bint identical
    for i in range(n):
        identical = True
        for j in range(d):
            if xa[i, j] != ya[i, j]:
                identical = False
                break
        if identical:
            out[i] = 0.0
            continue
        acc = -xa[i, 0] * ya[i, 0]
        for j in range(1, d):
            acc += xa[i, j] * ya[i, j]
        arg = k * acc
        if arg < 1.0:
            arg = 1.0
        out[i] = acosh(arg) / sk
    return out


def lorentz_pairwise_dist(x, y, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ya = _as2d(y)
    cdef bint same = x is y
    cdef Py_ssize_t n = xa.shape[0], m = ya.shape[0], d = xa.shape[1], i, j, t
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m))
    cdef double sk = sqrt(-k)
    cdef double acc, arg
    for i in range(n):
        for j in range(m):
            if same and i == j:
                out[i, j] = 0.0
                continue
            acc = -xa[i, 0] * ya[j, 0]
            for t in range(1, d):
                acc += xa[i, t] * ya[j, t]
            arg = k * acc
            if arg < 1.0:
                arg = 1.0
            out[i, j] = acosh(arg) / sk
    return out


def lorentz_exp0_rows(v_spatial, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] va = _as2d(v_spatial)
    cdef Py_ssize_t n = va.shape[0], d = va.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, d + 1))
    cdef double sk = sqrt(-k)
    cdef double r, coef
    for i in range(n):
        r = 0.0
        for j in range(d):
            r += va[i, j] * va[i, j]
        r = sqrt(r)
        if r < MIN_NORM:
            r = MIN_NORM
        out[i, 0] = cosh(sk * r) / sk
        coef = sinh(sk * r) / (sk * r)
        for j in range(d):
            out[i, j + 1] = coef * va[i, j]
    return out


def lorentz_log0_rows(x, double k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xa = _as2d(x)
    cdef Py_ssize_t n = xa.shape[0], d = xa.shape[1] - 1, i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, d))
    cdef double sk = sqrt(-k)
    cdef double c, theta, s, coef
    for i in range(n):
        c = sk * xa[i, 0]
        if c < 1.0:
            c = 1.0
        theta = acosh(c)
        s = sinh(theta)
        if s < MIN_NORM:
            s = MIN_NORM
        coef = theta / s
        for j in range(d):
            out[i, j] = coef * xa[i, j + 1]
    return out


# ---------------------------------------------------------------------------
# Graph metric kernels
# ---------------------------------------------------------------------------

def bfs_all_pairs(indptr, indices, Py_ssize_t n):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    if ptr.shape[0] != n + 1 or ptr[n] != idx.shape[0]:
        raise ValueError("inconsistent CSR structure")
    if idx.shape[0] and (np.min(idx) < 0 or np.max(idx) >= n):
        raise ValueError("CSR index out of range")
    cdef cnp.ndarray[cnp.int32_t, ndim=2] dist = np.full((n, n), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t src, head, tail, u, v, e
    for src in range(n):
        head = 0
        tail = 0
        queue[tail] = src
        tail += 1
        dist[src, src] = 0
        while head < tail:
            u = queue[head]
            head += 1
            for e in range(ptr[u], ptr[u + 1]):
                v = idx[e]
                if dist[src, v] < 0:
                    dist[src, v] = dist[src, u] + 1
                    queue[tail] = v
                    tail += 1
    return dist


def four_point_delta_exact(dist):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], i, j, p, q
    cdef double best = 0.0, s1, s2, s3, hi, mid, tmp, gap
    for i in range(n - 3):
        for j in range(i + 1, n - 2):
            for p in range(j + 1, n - 1):
                for q in range(p + 1, n):
                    s1 = d[i, j] + d[p, q]
                    s2 = d[i, p] + d[j, q]
                    s3 = d[i, q] + d[j, p]
                    if s2 > s1:
                        tmp = s1; s1 = s2; s2 = tmp
                    if s3 > s1:
                        tmp = s1; s1 = s3; s3 = tmp
                    mid = s2 if s2 > s3 else s3
                    gap = s1 - mid
                    if gap > best:
                        best = gap
    return 0.5 * best


def four_point_delta_quads(dist, quads):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] qd = np.ascontiguousarray(quads, dtype=np.int64)
    cdef Py_ssize_t nq = qd.shape[0], t
    cdef Py_ssize_t w, x, y, z
    cdef double best = 0.0, s1, s2, s3, mid, tmp, gap
    if nq == 0:
        return 0.0
    for t in range(nq):
        w = qd[t, 0]; x = qd[t, 1]; y = qd[t, 2]; z = qd[t, 3]
        s1 = d[w, x] + d[y, z]
        s2 = d[w, y] + d[x, z]
        s3 = d[w, z] + d[x, y]
        if s2 > s1:
            tmp = s1; s1 = s2; s2 = tmp
        if s3 > s1:
            tmp = s1; s1 = s3; s3 = tmp
        mid = s2 if s2 > s3 else s3
        gap = s1 - mid
        if gap > best:
            best = gap
    return 0.5 * best
