# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_fallback`` bit for bit."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, fabs, fmod, sin, sqrt

cnp.import_array()


def pairwise_sum(x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    if n == 0:
        return 0.0
    cdef Py_ssize_t size = 1
    while size < n:
        size *= 2
    cdef double[::1] buf = np.zeros(size, dtype=np.float64)
    cdef Py_ssize_t i
    for i in range(n):
        buf[i] = xv[i]
    while size > 1:
        size //= 2
        for i in range(size):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
    return buf[0]


cdef inline Py_ssize_t _bucket(long long key, Py_ssize_t mask) nogil:
    cdef unsigned long long h = <unsigned long long>key * 11400714819323198485ULL
    return <Py_ssize_t>((h >> 17) & mask)


def greedy_separated(orbits, keys, neighbor_offsets, long long cells, double eps):
    cdef double[:, :, ::1] orb = np.ascontiguousarray(orbits, dtype=np.float64)
    cdef long long[:, ::1] kv = np.ascontiguousarray(keys, dtype=np.int64)
    cdef long long[:, ::1] offs = np.ascontiguousarray(neighbor_offsets, dtype=np.int64)
    cdef Py_ssize_t N = orb.shape[0], T = orb.shape[1], D = orb.shape[2]
    cdef Py_ssize_t K = offs.shape[0], W = kv.shape[1]
    cdef Py_ssize_t nbuckets = 1
    while nbuckets < 2 * N + 2:
        nbuckets *= 2
    cdef Py_ssize_t mask = nbuckets - 1
    cdef long long[::1] head = np.full(nbuckets, -1, dtype=np.int64)
    cdef long long[::1] nxt = np.full(N, -1, dtype=np.int64)
    cdef long long[::1] ownkey = np.zeros(N, dtype=np.int64)
    cdef long long[::1] chosen = np.empty(N, dtype=np.int64)
    cdef Py_ssize_t count = 0
    cdef Py_ssize_t i, j, k, t, c, w
    cdef long long key, cell
    cdef double eps2 = eps * eps, diff, dist2
    cdef bint ok, far
    with nogil:
        for i in range(N):
            ok = True
            for k in range(K):
                key = 0
                for w in range(W):
                    cell = (kv[i, w] + offs[k, w]) % cells
                    if cell < 0:
                        cell += cells
                    key = key * cells + cell
                j = head[_bucket(key, mask)]
                while j >= 0:
                    if ownkey[j] == key:
                        far = False
                        for t in range(T):
                            diff = fabs(orb[i, t, 0] - orb[j, t, 0])
                            if 1.0 - diff < diff:
                                diff = 1.0 - diff
                            dist2 = diff * diff
                            for c in range(1, D):
                                diff = fabs(orb[i, t, c] - orb[j, t, c])
                                if 1.0 - diff < diff:
                                    diff = 1.0 - diff
                                dist2 = dist2 + diff * diff
                            if dist2 > eps2:
                                far = True
                                break
                        if not far:
                            ok = False
                            break
                    j = nxt[j]
                if not ok:
                    break
            if ok:
                key = 0
                for w in range(W):
                    key = key * cells + kv[i, w]
                ownkey[i] = key
                c = _bucket(key, mask)
                nxt[i] = head[c]
                head[c] = i
                chosen[count] = i
                count += 1
    return np.asarray(chosen[:count]).copy()


cdef double TWO_PI = 6.283185307179586
cdef double NEWTON_TOL = 1e-9
cdef int NEWTON_MAX = 60


cdef inline double _wrap1(double r) nogil:
    r = fmod(r, 1.0)
    if r != 0.0 and r < 0.0:
        r = r + 1.0
    if r >= 1.0:
        r = 0.0
    return r


cdef void _preimage(double[:, ::1] orb, Py_ssize_t src, Py_ssize_t dst,
                    double[:, ::1] B, double eps, double eb) noexcept nogil:
    cdef Py_ssize_t d = orb.shape[1], r, j, it
    cdef double c, t, g, step, s
    for r in range(d):
        orb[dst, r] = orb[src, 0] * B[r, 0]
        for j in range(1, d):
            orb[dst, r] = orb[dst, r] + orb[src, j] * B[r, j]
    c = orb[dst, 1]
    t = c - eb * sin(TWO_PI * c) / TWO_PI
    for it in range(NEWTON_MAX):
        g = t + eb * sin(TWO_PI * t) / TWO_PI - c
        step = g / (1.0 + eb * cos(TWO_PI * t))
        t = t - step
        if fabs(step) < NEWTON_TOL:
            break
    s = sin(TWO_PI * t) / TWO_PI
    for r in range(d):
        orb[dst, r] = _wrap1(orb[dst, r] - (eps * s) * B[r, 0])


cdef void _run(double[::1] cosines, Py_ssize_t k, double[:, ::1] A,
               double[::1] init, double[::1] w, double[::1] tmp) noexcept nogil:
    cdef Py_ssize_t d = w.shape[0], r, c, j
    cdef double cs, a, nrm
    for r in range(d):
        w[r] = init[r]
    for j in range(k, 0, -1):
        cs = cosines[j]
        for r in range(d):
            tmp[r] = A[r, 0] * w[0]
            for c in range(1, d):
                a = A[r, c] + cs if (r == 0 and c == 1) else A[r, c]
                tmp[r] = tmp[r] + a * w[c]
        nrm = tmp[0] * tmp[0]
        for c in range(1, d):
            nrm = nrm + tmp[c] * tmp[c]
        nrm = sqrt(nrm)
        for r in range(d):
            w[r] = tmp[r] / nrm


def perturbed_frames_1d(x, A, B, double eps, init, int k_stab):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef double[::1] iv = np.ascontiguousarray(init, dtype=np.float64)
    cdef Py_ssize_t N = xv.shape[0], d = xv.shape[1], i, j, c
    out = np.empty((N, d), dtype=np.float64)
    ang = np.empty(N, dtype=np.float64)
    cdef double[:, ::1] fv = out
    cdef double[::1] av = ang
    cdef double[:, ::1] orb = np.empty((k_stab + 2, d), dtype=np.float64)
    cdef double[::1] u = np.empty(d), v = np.empty(d), tmp = np.empty(d)
    cdef double[::1] cosv = np.zeros(k_stab + 2)
    cdef double eb = eps * Bv[1, 0], dot, r2, e
    with nogil:
        for i in range(N):
            for c in range(d):
                orb[0, c] = xv[i, c]
            for j in range(1, k_stab + 2):
                _preimage(orb, j - 1, j, Bv, eps, eb)
                cosv[j] = eps * cos(TWO_PI * orb[j, 1])
            _run(cosv, k_stab, Av, iv, u, tmp)
            _run(cosv, k_stab + 1, Av, iv, v, tmp)
            dot = u[0] * v[0]
            for c in range(1, d):
                dot = dot + u[c] * v[c]
            r2 = 0.0
            for c in range(d):
                e = v[c] - dot * u[c]
                r2 = r2 + e * e if c > 0 else e * e
            av[i] = sqrt(r2)
            for c in range(d):
                fv[i, c] = u[c]
    return out, ang
