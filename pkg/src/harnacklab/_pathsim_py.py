"""Pure-Python path simulation engine.

Reference implementation of the compiled extension: same per-path RNG
(splitmix64-seeded xoshiro256++), same draw order (holding time, then
jump target), same float arithmetic, so outputs are bit-identical to the
compiled engine on every platform.  Path index idx selects an
independent stream; worker counts never change results.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0


def _splitmix_next(x):
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


def _path_state(seed, idx):
    x = (seed ^ ((idx * _GOLDEN) & _MASK)) & _MASK
    s = [0, 0, 0, 0]
    for i in range(4):
        x, s[i] = _splitmix_next(x)
    if not any(s):
        s[0] = 1
    return s


def _rotl(v, k):
    return ((v << k) | (v >> (64 - k))) & _MASK


def _next_u64(s):
    s0, s1, s2, s3 = s
    result = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
    t = (s1 << 17) & _MASK
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    s[0], s[1], s[2], s[3] = s0, s1, s2, s3
    return result


def _uniform(s):
    return (_next_u64(s) >> 11) * _INV53


def _pick(row, v):
    # smallest k with row[k] > v; row[-1] == 1.0 > v always
    lo, hi = 0, row.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if row[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def exit_times(cum, lam, mask, x0, horizon, seed, n_paths, max_jumps):
    """First time the chain leaves mask, truncated at horizon.

    reasons: 0 exit, 1 horizon, 2 jump cap.
    """
    times = np.empty(n_paths)
    reasons = np.empty(n_paths, dtype=np.uint8)
    for i in range(n_paths):
        s = _path_state(seed, i)
        x = x0
        t = 0.0
        reason = 2
        if not mask[x]:
            times[i] = 0.0
            reasons[i] = 0
            continue
        for _ in range(max_jumps):
            h = -math.log1p(-_uniform(s)) / lam[x]
            if t + h > horizon:
                t = horizon
                reason = 1
                break
            t = t + h
            x = _pick(cum[x], _uniform(s))
            if not mask[x]:
                reason = 0
                break
        times[i] = t
        reasons[i] = reason
    return times, reasons


def hitting(cum, lam, mask, z, x0, seed, n_paths, max_jumps):
    """Indicator that the first state outside mask equals z."""
    hits = np.zeros(n_paths, dtype=np.uint8)
    reasons = np.empty(n_paths, dtype=np.uint8)
    for i in range(n_paths):
        s = _path_state(seed, i)
        x = x0
        reason = 2
        for _ in range(max_jumps):
            if not mask[x]:
                reason = 0
                break
            _uniform(s)
            x = _pick(cum[x], _uniform(s))
        hits[i] = 1 if (reason == 0 and x == z) else 0
        reasons[i] = reason
    return hits, reasons


def states_at(cum, lam, x0, t_target, seed, n_paths, max_jumps):
    """State occupied at a fixed time, plus the jump count up to it."""
    states = np.empty(n_paths, dtype=np.int64)
    counts = np.empty(n_paths, dtype=np.int64)
    reasons = np.empty(n_paths, dtype=np.uint8)
    for i in range(n_paths):
        s = _path_state(seed, i)
        x = x0
        t = 0.0
        c = 0
        reason = 2
        for _ in range(max_jumps):
            h = -math.log1p(-_uniform(s)) / lam[x]
            if t + h > t_target:
                reason = 0
                break
            t = t + h
            x = _pick(cum[x], _uniform(s))
            c += 1
        states[i] = x
        counts[i] = c
        reasons[i] = reason
    return states, counts, reasons


def levy(cum, lam, F, g, x0, T, seed, n_paths, max_jumps):
    """Paired jump-sum and rate-integral functionals up to time T.

    lhs accumulates F[prev, next] over jumps before T; rhs integrates
    g[x] = sum_y F[x,y] J(x,y) mu(y) along the same trajectory.
    """
    lhs = np.zeros(n_paths)
    rhs = np.zeros(n_paths)
    reasons = np.empty(n_paths, dtype=np.uint8)
    for i in range(n_paths):
        s = _path_state(seed, i)
        x = x0
        t = 0.0
        a = 0.0
        b = 0.0
        reason = 2
        for _ in range(max_jumps):
            h = -math.log1p(-_uniform(s)) / lam[x]
            if t + h > T:
                b = b + g[x] * (T - t)
                reason = 0
                break
            b = b + g[x] * h
            t = t + h
            y = _pick(cum[x], _uniform(s))
            a = a + F[x, y]
            x = y
        lhs[i] = a
        rhs[i] = b
        reasons[i] = reason
    return lhs, rhs, reasons


def record_path(cum, lam, x0, horizon, seed, idx, max_jumps):
    """Full trajectory of one path: jump times, states, terminal reason."""
    s = _path_state(seed, idx)
    x = x0
    t = 0.0
    times = []
    states = [x0]
    reason = 2
    for _ in range(max_jumps):
        h = -math.log1p(-_uniform(s)) / lam[x]
        if t + h > horizon:
            reason = 1
            break
        t = t + h
        x = _pick(cum[x], _uniform(s))
        times.append(t)
        states.append(x)
    return (np.array(times), np.array(states, dtype=np.int64), reason)
