"""Stochastic oracle: simulate the jump process and verify identities.

The embedded chain holds at x for an exponential time with rate
lambda(x) and jumps to y with probability J(x,y) mu(y) / lambda(x).
Every path gets its own RNG stream derived from (seed, path index), so
results are independent of worker count and bit-identical between the
compiled and pure-Python engines.  Set HARNACKLAB_PURE_PYTHON=1 to force
the fallback engine.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError
from .form import FormReport

if os.environ.get("HARNACKLAB_PURE_PYTHON") == "1":
    from . import _pathsim_py as _engine
    ENGINE = "pure-python"
else:
    try:
        from . import _pathsim as _engine
        ENGINE = "compiled"
    except ImportError:
        from . import _pathsim_py as _engine
        ENGINE = "pure-python"

_MASK64 = (1 << 64) - 1
_REASONS = {0: "exit", 1: "horizon", 2: "jump-cap"}


@dataclass
class PathSample:
    """One realized trajectory: jump times, visited states, stop reason."""

    seed: int
    times: np.ndarray
    states: np.ndarray
    reason: str

    def tobytes(self):
        return self.times.tobytes() + self.states.tobytes()


def _tables(space, kernel):
    P = kernel.J * space.mu[None, :] / kernel.lam[:, None]
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    return np.ascontiguousarray(cum), np.ascontiguousarray(kernel.lam, dtype=float)


def simulate_path(space, kernel, x0, horizon, seed, max_jumps=10 ** 6, idx=0):
    """Simulate one path from x0 up to the time horizon."""
    if horizon <= 0:
        raise InvalidSpecError("horizon must be positive")
    cum, lam = _tables(space, kernel)
    times, states, reason = _engine.record_path(
        cum, lam, int(x0), float(horizon), seed & _MASK64, idx, max_jumps)
    return PathSample(seed=seed, times=times, states=states,
                      reason=_REASONS[reason])


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    m = float(values.mean())
    if values.size < 2:
        return m, float("inf")
    return m, float(values.std(ddof=1) / np.sqrt(values.size))


def estimate(space, kernel, what, paths, seed, horizon=np.inf,
             max_jumps=10 ** 7):
    """Monte Carlo estimate with standard error.

    what is ("exit-time", x0, R), ("hitting", D, z, x0), or
    ("kernel", t, x, y); hitting needs D as an index set and estimates
    the probability that the chain leaves D through z.
    """
    if paths < 100:
        raise InvalidSpecError("need at least 100 paths")
    cum, lam = _tables(space, kernel)
    seed = seed & _MASK64
    mode = what[0]
    if mode == "exit-time":
        _, x0, R = what
        mask = np.zeros(space.n, dtype=np.uint8)
        mask[space.ball(x0, R)] = 1
        times, _ = _engine.exit_times(cum, lam, mask, int(x0), float(horizon),
                                      seed, paths, max_jumps)
        return _mean_stderr(times)
    if mode == "hitting":
        _, D, z, x0 = what
        mask = np.zeros(space.n, dtype=np.uint8)
        mask[np.asarray(D, dtype=int)] = 1
        if mask[int(z)]:
            raise InvalidSpecError("hitting target must lie outside D")
        hits, _ = _engine.hitting(cum, lam, mask, int(z), int(x0), seed,
                                  paths, max_jumps)
        return _mean_stderr(hits)
    if mode == "kernel":
        _, t, x, y = what
        states, _, _ = _engine.states_at(cum, lam, int(x), float(t), seed,
                                         paths, max_jumps)
        ind = (states == int(y)).astype(float) / space.mu[int(y)]
        return _mean_stderr(ind)
    raise InvalidSpecError("unknown estimate mode %r" % (mode,))


def jump_counts(space, kernel, x0, t, paths, seed, max_jumps=10 ** 7):
    """Number of jumps in [0, t] per path (Poisson when rates are flat)."""
    cum, lam = _tables(space, kernel)
    _, counts, _ = _engine.states_at(cum, lam, int(x0), float(t),
                                     seed & _MASK64, paths, max_jumps)
    return counts


def verify_levy_system(space, kernel, f, T, paths, seed, x0=0,
                       max_jumps=10 ** 7):
    """Paired check of the jump-measure identity at a fixed time T.

    E[sum_{jumps s<=T} f(X_{s-}, X_s)] must equal
    E[int_0^T sum_y f(X_s, y) J(X_s, y) mu(y) ds].  Both functionals are
    evaluated on the same paths; the verdict compares the mean pairwise
    gap against three standard errors of the gap.
    """
    F = np.ascontiguousarray(np.asarray(f, dtype=float))
    if F.shape != (space.n, space.n):
        raise InvalidSpecError("test functional must be n x n")
    if np.any(F < 0):
        raise InvalidSpecError("test functional must be nonnegative")
    if np.any(np.diag(F) != 0):
        raise InvalidSpecError("test functional must vanish on the diagonal")
    cum, lam = _tables(space, kernel)
    g = np.ascontiguousarray((F * kernel.J) @ space.mu)
    lhs, rhs, reasons = _engine.levy(cum, lam, F, g, int(x0), float(T),
                                     seed & _MASK64, paths, max_jumps)
    diff = lhs - rhs
    gap, se = _mean_stderr(diff)
    ok = abs(gap) <= 3.0 * se if se > 0 else gap == 0.0
    return FormReport(
        condition="levy",
        verdict="pass" if ok else "fail",
        constants={"lhs_mean": float(lhs.mean()), "rhs_mean": float(rhs.mean()),
                   "gap": gap, "stderr": se, "paths": int(paths),
                   "capped_paths": int((reasons == 2).sum())},
        grid={"T": float(T), "x0": int(x0), "engine": ENGINE},
    )
