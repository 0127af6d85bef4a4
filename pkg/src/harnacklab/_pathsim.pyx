# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled path simulation engine.

Bit-identical twin of the pure-Python module: same splitmix64-seeded
xoshiro256++ streams, same draw order, same float arithmetic.
"""

from libc.math cimport log1p

import numpy as np

ctypedef unsigned long long u64

DEF INV53 = 1.0 / 9007199254740992.0


cdef struct Xo:
    u64 s0
    u64 s1
    u64 s2
    u64 s3


cdef inline u64 _rotl(u64 v, int k) nogil:
    return (v << k) | (v >> (64 - k))


cdef inline u64 _sm_next(u64* x) nogil:
    x[0] = x[0] + <u64>0x9E3779B97F4A7C15
    cdef u64 z = x[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline Xo _path_state(u64 seed, u64 idx) nogil:
    cdef u64 x = seed ^ (idx * <u64>0x9E3779B97F4A7C15)
    cdef Xo s
    s.s0 = _sm_next(&x)
    s.s1 = _sm_next(&x)
    s.s2 = _sm_next(&x)
    s.s3 = _sm_next(&x)
    if s.s0 == 0 and s.s1 == 0 and s.s2 == 0 and s.s3 == 0:
        s.s0 = 1
    return s


cdef inline u64 _next_u64(Xo* s) nogil:
    cdef u64 result = _rotl(s.s0 + s.s3, 23) + s.s0
    cdef u64 t = s.s1 << 17
    s.s2 = s.s2 ^ s.s0
    s.s3 = s.s3 ^ s.s1
    s.s1 = s.s1 ^ s.s2
    s.s0 = s.s0 ^ s.s3
    s.s2 = s.s2 ^ t
    s.s3 = _rotl(s.s3, 45)
    return result


cdef inline double _uniform(Xo* s) nogil:
    return <double>(_next_u64(s) >> 11) * INV53


cdef inline Py_ssize_t _pick(const double[:] row, double v) nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = row.shape[0] - 1
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if row[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def exit_times(const double[:, ::1] cum, const double[::1] lam,
               const unsigned char[::1] mask, Py_ssize_t x0, double horizon,
               u64 seed, Py_ssize_t n_paths, long long max_jumps):
    times_arr = np.empty(n_paths)
    reasons_arr = np.empty(n_paths, dtype=np.uint8)
    cdef double[::1] times = times_arr
    cdef unsigned char[::1] reasons = reasons_arr
    cdef Py_ssize_t i, x
    cdef long long j
    cdef double t, h
    cdef int reason
    cdef Xo s
    for i in range(n_paths):
        s = _path_state(seed, <u64>i)
        x = x0
        t = 0.0
        reason = 2
        if not mask[x]:
            times[i] = 0.0
            reasons[i] = 0
            continue
        for j in range(max_jumps):
            h = -log1p(-_uniform(&s)) / lam[x]
            if t + h > horizon:
                t = horizon
                reason = 1
                break
            t = t + h
            x = _pick(cum[x], _uniform(&s))
            if not mask[x]:
                reason = 0
                break
        times[i] = t
        reasons[i] = reason
    return times_arr, reasons_arr


def hitting(const double[:, ::1] cum, const double[::1] lam,
            const unsigned char[::1] mask, Py_ssize_t z, Py_ssize_t x0,
            u64 seed, Py_ssize_t n_paths, long long max_jumps):
    hits_arr = np.zeros(n_paths, dtype=np.uint8)
    reasons_arr = np.empty(n_paths, dtype=np.uint8)
    cdef unsigned char[::1] hits = hits_arr
    cdef unsigned char[::1] reasons = reasons_arr
    cdef Py_ssize_t i, x
    cdef long long j
    cdef int reason
    cdef Xo s
    for i in range(n_paths):
        s = _path_state(seed, <u64>i)
        x = x0
        reason = 2
        for j in range(max_jumps):
            if not mask[x]:
                reason = 0
                break
            _uniform(&s)
            x = _pick(cum[x], _uniform(&s))
        hits[i] = 1 if (reason == 0 and x == z) else 0
        reasons[i] = reason
    return hits_arr, reasons_arr


def states_at(const double[:, ::1] cum, const double[::1] lam, Py_ssize_t x0,
              double t_target, u64 seed, Py_ssize_t n_paths,
              long long max_jumps):
    states_arr = np.empty(n_paths, dtype=np.int64)
    counts_arr = np.empty(n_paths, dtype=np.int64)
    reasons_arr = np.empty(n_paths, dtype=np.uint8)
    cdef long long[::1] states = states_arr
    cdef long long[::1] counts = counts_arr
    cdef unsigned char[::1] reasons = reasons_arr
    cdef Py_ssize_t i, x
    cdef long long j, c
    cdef double t, h
    cdef int reason
    cdef Xo s
    for i in range(n_paths):
        s = _path_state(seed, <u64>i)
        x = x0
        t = 0.0
        c = 0
        reason = 2
        for j in range(max_jumps):
            h = -log1p(-_uniform(&s)) / lam[x]
            if t + h > t_target:
                reason = 0
                break
            t = t + h
            x = _pick(cum[x], _uniform(&s))
            c = c + 1
        states[i] = x
        counts[i] = c
        reasons[i] = reason
    return states_arr, counts_arr, reasons_arr


def levy(const double[:, ::1] cum, const double[::1] lam,
         const double[:, ::1] F, const double[::1] g, Py_ssize_t x0, double T,
         u64 seed, Py_ssize_t n_paths, long long max_jumps):
    lhs_arr = np.zeros(n_paths)
    rhs_arr = np.zeros(n_paths)
    reasons_arr = np.empty(n_paths, dtype=np.uint8)
    cdef double[::1] lhs = lhs_arr
    cdef double[::1] rhs = rhs_arr
    cdef unsigned char[::1] reasons = reasons_arr
    cdef Py_ssize_t i, x, y
    cdef long long j
    cdef double t, h, a, b
    cdef int reason
    cdef Xo s
    for i in range(n_paths):
        s = _path_state(seed, <u64>i)
        x = x0
        t = 0.0
        a = 0.0
        b = 0.0
        reason = 2
        for j in range(max_jumps):
            h = -log1p(-_uniform(&s)) / lam[x]
            if t + h > T:
                b = b + g[x] * (T - t)
                reason = 0
                break
            b = b + g[x] * h
            t = t + h
            y = _pick(cum[x], _uniform(&s))
            a = a + F[x, y]
            x = y
        lhs[i] = a
        rhs[i] = b
        reasons[i] = reason
    return lhs_arr, rhs_arr, reasons_arr


def record_path(const double[:, ::1] cum, const double[::1] lam,
                Py_ssize_t x0, double horizon, u64 seed, u64 idx,
                long long max_jumps):
    cdef Xo s = _path_state(seed, idx)
    cdef Py_ssize_t x = x0
    cdef double t = 0.0
    cdef double h
    cdef long long j
    cdef int reason = 2
    times = []
    states = [x0]
    for j in range(max_jumps):
        h = -log1p(-_uniform(&s)) / lam[x]
        if t + h > horizon:
            reason = 1
            break
        t = t + h
        x = _pick(cum[x], _uniform(&s))
        times.append(t)
        states.append(x)
    return (np.array(times), np.array(states, dtype=np.int64), reason)
