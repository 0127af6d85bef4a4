"""Heat semigroup, Dirichlet heat tensors, and kernel-estimate checkers.

p(t,x,y) is the transition density against mu: the matrix exponential of
the generator divided by mu(y).  Ball domains use the killed generator
(jumps landing outside the ball remove the particle).  Checkers compare
the global tensor against the two-sided profile
Pi(t,x,y) = min(1/V(x, phi^{-1}(t)), t/(V(x,d) phi(d))), probe the
near-diagonal lower bound on Dirichlet tensors, and fit the mean exit
time against the scale function.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapExceededError, InvalidSpecError, NonconvergentError
from .form import FormReport
from .scale import build_scale

SIZE_CAP = 20000
_MAGIC = b"HKT1"


@dataclass
class HeatTensor:
    """Transition densities p(t,x,y) on a global or ball domain."""

    times: np.ndarray
    values: np.ndarray
    domain: str
    indices: np.ndarray
    mu: np.ndarray

    def mass(self, k):
        """Total mass sum_y p(t_k, x, y) mu(y) per row."""
        return self.values[k] @ self.mu


def _sym_generator(space, kernel, indices=None):
    """mu-symmetrized (killed) generator A = D^{1/2} Q D^{-1/2}."""
    idx = np.arange(space.n) if indices is None else np.asarray(indices)
    mu = space.mu[idx]
    A = kernel.J[np.ix_(idx, idx)] * np.sqrt(np.outer(mu, mu))
    A[np.diag_indices_from(A)] = -kernel.lam[idx]
    return 0.5 * (A + A.T), idx, mu


def _eig_cache(space, kernel, domain_key, indices):
    cache = getattr(kernel, "_heat_eig", None)
    if cache is None:
        cache = kernel._heat_eig = {}
    if domain_key not in cache:
        A, idx, mu = _sym_generator(space, kernel, indices)
        w, U = scipy.linalg.eigh(A)
        cache[domain_key] = (w, U, idx, mu)
    return cache[domain_key]


def _density_from_eig(w, U, mu, t):
    core = (U * np.exp(t * w)) @ U.T
    return core / np.sqrt(np.outer(mu, mu))


def _stepped_exponential(A, t, max_halvings=40):
    """exp(tA) by scaled implicit stepping with halving until 1e-8."""
    prev = None
    for k in range(8, max_halvings):
        h = t / (1 << k)
        B = np.linalg.inv(np.eye(A.shape[0]) - h * A)
        P = B
        for _ in range(k):
            P = P @ P
        if prev is not None:
            scale = max(np.abs(P).max(), 1e-300)
            if np.abs(P - prev).max() <= 1e-8 * scale:
                return P
        prev = P
    raise NonconvergentError("implicit stepping did not reach 1e-8")


def heat_kernel(space, kernel, times, domain=None, method=None, cap=SIZE_CAP):
    """Heat tensor on the global space or a ball domain (x0, R).

    Dense eigendecomposition of the mu-symmetrized generator up to 4096
    points; scaled implicit time stepping with step-halving error control
    beyond that, capped at `cap` points.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise InvalidSpecError("times must be nonnegative")
    if np.any(np.diff(times) < 0):
        raise InvalidSpecError("times must be increasing")
    if domain is None:
        key, indices, name = "global", None, "global"
    else:
        x0, R = domain
        indices = space.ball(x0, R)
        if indices.size >= space.n:
            raise InvalidSpecError("ball domain must be a proper subset")
        key, name = ("ball", int(x0), float(R)), "ball"
    m = space.n if indices is None else indices.size
    if m > cap:
        raise CapExceededError("domain size %d exceeds cap %d" % (m, cap))
    if method is None:
        method = "eig" if m <= 4096 else "stepping"
    vals = np.empty((times.size, m, m))
    if method == "eig":
        w, U, idx, mu = _eig_cache(space, kernel, key, indices)
        for k, t in enumerate(times):
            if t == 0:
                vals[k] = np.diag(1.0 / mu)
            else:
                vals[k] = _density_from_eig(w, U, mu, t)
    else:
        A, idx, mu = _sym_generator(space, kernel, indices)
        root = np.sqrt(np.outer(mu, mu))
        for k, t in enumerate(times):
            if t == 0:
                vals[k] = np.eye(m) / root
            else:
                vals[k] = _stepped_exponential(A, t) / root
    return HeatTensor(times=times, values=vals, domain=name,
                      indices=np.arange(space.n) if indices is None else indices,
                      mu=space.mu if indices is None else space.mu[indices])


def heat_column(space, kernel, t, z):
    """Global density column p(t, . , z) via the cached eigensystem."""
    w, U, idx, mu = _eig_cache(space, kernel, "global", None)
    core = (U * np.exp(t * w)) @ U[z]
    return core / np.sqrt(mu * mu[z])


def heat_columns(space, kernel, t, zs):
    """Columns p(t, . , z) for several z at once, shape (n, len(zs))."""
    zs = np.asarray(zs, dtype=int)
    w, U, idx, mu = _eig_cache(space, kernel, "global", None)
    core = (U * np.exp(t * w)) @ U[zs].T
    return core / np.sqrt(np.outer(mu, mu[zs]))


def save_tensor(path, tensor):
    """Binary cache: magic HKT1, n, time count, then LE float64 payload."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", tensor.values.shape[1], tensor.times.size))
        fh.write(tensor.times.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(tensor.values, dtype="<f8").tobytes())


def load_tensor(path, space):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise InvalidSpecError("not a heat tensor cache")
        n, nt = struct.unpack("<QQ", fh.read(16))
        times = np.frombuffer(fh.read(8 * nt), dtype="<f8")
        vals = np.frombuffer(fh.read(8 * nt * n * n), dtype="<f8")
    if n != space.n:
        raise InvalidSpecError("cache built for a different space")
    return HeatTensor(times=times.copy(), values=vals.reshape(nt, n, n).copy(),
                      domain="global", indices=np.arange(n), mu=space.mu)


def check_conservative(tensor):
    """Global mass identity: sum_y p(t,x,y) mu(y) = 1 within 1e-8."""
    if tensor.domain != "global":
        raise InvalidSpecError("conservativeness applies to global tensors")
    worst = 0.0
    for k in range(tensor.times.size):
        worst = max(worst, float(np.abs(tensor.mass(k) - 1.0).max()))
    return FormReport(condition="conservative",
                      verdict="pass" if worst <= 1e-8 else "fail",
                      constants={"max_mass_defect": worst},
                      grid={"times": tensor.times.tolist()})


def hk_profile(space, phi, t, swap_v=False):
    """Two-sided profile matrix Pi(t, x, y); diagonal uses the first branch.

    swap_v replaces V(x, d(x,y)) by V(y, d(x,y)) in the far branch; under
    volume doubling the fitted constants move by a bounded factor.
    """
    phi = build_scale(phi)
    rt = float(phi.inv(t))
    near = np.array([1.0 / space.volume(x, rt) for x in range(space.n)])
    d = space.dist
    vol = space.volume_at_dist()
    if swap_v:
        vol = vol.T
    off = d > 0
    far = np.full_like(d, np.inf)
    far[off] = t / (vol[off] * phi(d[off]))
    return np.minimum(near[:, None], far)


def check_hk(space, phi, kernel, tensor, mode, lower_floor=0.01, swap_v=False):
    """Heat-kernel estimate against the profile Pi.

    upper fits c2 = max p/Pi; lower fits c1 = min p/Pi (pass needs c1
    above a calibration floor, default 0.01); diag-upper restricts to the
    diagonal.  Stability compares the constant with the one from the
    even-index time subgrid.
    """
    if tensor.domain != "global":
        raise InvalidSpecError("profile comparison applies to global tensors")
    phi = build_scale(phi)
    lo, hi = space.radius_window
    tmin, tmax = float(phi(lo)), float(phi(hi))
    sel = [k for k, t in enumerate(tensor.times)
           if tmin * (1 - 1e-9) <= t <= tmax * (1 + 1e-9)]
    if not sel:
        raise InvalidSpecError("no tensor times inside the scale window")

    def fit(ks):
        best = None
        wit = None
        for k in ks:
            t = float(tensor.times[k])
            pi = hk_profile(space, phi, t, swap_v=swap_v)
            ratio = tensor.values[k] / pi
            if mode == "diag-upper":
                ratio = np.diag(ratio)
            if mode in ("upper", "diag-upper"):
                j = int(np.argmax(ratio))
                v = float(ratio.flat[j] if ratio.ndim > 1 else ratio[j])
                better = best is None or v > best
            else:
                j = int(np.argmin(ratio))
                v = float(ratio.flat[j] if ratio.ndim > 1 else ratio[j])
                better = best is None or v < best
            if better:
                best = v
                if ratio.ndim > 1:
                    wit = {"t": t, "x": int(j // space.n), "y": int(j % space.n)}
                else:
                    wit = {"t": t, "x": int(j), "y": int(j)}
        return best, wit

    c, wit = fit(sel)
    c_sub, _ = fit(sel[::2] or sel)
    stable = np.isfinite(c) and (max(c, c_sub) <= 1.5 * min(c, c_sub) + 1e-300
                                 if min(c, c_sub) > 0 else c == c_sub)
    if mode in ("upper", "diag-upper"):
        ok = np.isfinite(c)
        constants = {"c2": c, "c2_subgrid": c_sub}
    elif mode == "lower":
        ok = c >= lower_floor
        constants = {"c1": c, "c1_subgrid": c_sub, "floor": lower_floor}
    else:
        raise InvalidSpecError("mode must be upper, lower, or diag-upper")
    verdict = "fail" if not ok else ("pass" if stable else "flagged")
    return FormReport(condition="hk-" + mode, verdict=verdict,
                      constants=constants, witnesses=[wit],
                      grid={"times": [float(tensor.times[k]) for k in sel]})


def check_ndl(space, phi, kernel, eps=0.5, floor=1e-3, seed=0):
    """Near-diagonal lower bound on Dirichlet tensors.

    For sampled balls B(x0,r) and times t <= phi(eps*r), requires
    p^B(t,x,y) >= c1 / V(x0, phi^{-1}(t)) for x,y within eps*phi^{-1}(t)
    of the center.  Inner balls below the lattice spacing are skipped
    with a recorded warning.  Verdict: c1 above the floor and still above
    it at eps/2.
    """
    if not 0 < eps < 1:
        raise InvalidSpecError("eps must lie in (0,1)")
    phi = build_scale(phi)
    rng = np.random.default_rng(seed)
    centers = sorted(rng.choice(space.n, size=min(space.n, 4),
                                replace=False).tolist())
    radii = space.dyadic_radii()

    def sweep(e):
        c1, wit, warns = np.inf, None, []
        for x0 in centers:
            for r in radii:
                B = space.ball(x0, r)
                if B.size >= space.n or B.size < 2:
                    continue
                tgrid = [float(phi(e * r)) * 2.0 ** (-k) for k in range(3)]
                tens = heat_kernel(space, kernel, sorted(tgrid), domain=(x0, r))
                loc = {int(p): i for i, p in enumerate(B)}
                for k, t in enumerate(tens.times):
                    rt = float(phi.inv(t))
                    if e * rt < 1.0:
                        warns.append({"x0": int(x0), "r": float(r), "t": float(t),
                                      "reason": "inner ball below lattice spacing"})
                        continue
                    inner = space.ball(x0, e * rt)
                    ii = np.array([loc[int(p)] for p in inner if int(p) in loc])
                    if ii.size == 0:
                        continue
                    vals = tens.values[k][np.ix_(ii, ii)] * space.volume(x0, rt)
                    v = float(vals.min())
                    if v < c1:
                        c1 = v
                        j = int(np.argmin(vals))
                        wit = {"x0": int(x0), "r": float(r), "t": float(t),
                               "x": int(B[ii[j // ii.size]]),
                               "y": int(B[ii[j % ii.size]])}
        return c1, wit, warns

    c1, wit, warns = sweep(eps)
    c_half, _, warns2 = sweep(eps / 2)
    if not np.isfinite(c1) or c1 < floor:
        verdict = "fail"
    else:
        # an entirely-skipped eps/2 sweep (inner balls below lattice
        # spacing) is vacuously stable; the warnings record it
        verdict = "pass" if c_half >= floor else "flagged"
    return FormReport(condition="ndl", verdict=verdict,
                      constants={"c1": c1 if np.isfinite(c1) else None,
                                 "c1_half_eps": c_half if np.isfinite(c_half) else None,
                                 "eps": eps, "floor": floor},
                      witnesses=[wit] if wit else [],
                      grid={"warnings": warns + warns2})


def exit_time_green(space, kernel, ball):
    """Mean exit time E^x[tau_B] for x in the ball, by one linear solve.

    Solves (-Q_B) u = 1 on B through the symmetric form
    diag(mu)(-Q_B) u = mu.  Returns a full-length vector, zero outside.
    """
    x0, R = ball
    B = space.ball(x0, R)
    if B.size >= space.n:
        raise InvalidSpecError("exit ball must be a proper subset")
    mu = space.mu[B]
    M = -(kernel.J[np.ix_(B, B)] * np.outer(mu, mu))
    M[np.diag_indices_from(M)] = mu * kernel.lam[B]
    try:
        u = scipy.linalg.solve(M, mu, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NonconvergentError("singular exit-time system: %s" % exc)
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        raise NonconvergentError("exit-time solve produced nonpositive times")
    out = np.zeros(space.n)
    out[B] = u
    return out


def check_ephi(space, phi, kernel, seed=0):
    """Exit-time versus scale: c = max(phi(r)/u(x), u(x)/phi(r)) fitted
    over sampled balls; pass iff finite and stable under radius-grid
    refinement."""
    phi = build_scale(phi)
    rng = np.random.default_rng(seed)
    centers = sorted(rng.choice(space.n, size=min(space.n, 8),
                                replace=False).tolist())

    def sweep(radii):
        c, wit = 0.0, None
        for x in centers:
            for r in radii:
                if space.ball_size(x, r) >= space.n:
                    continue
                u = exit_time_green(space, kernel, (x, r))[x]
                v = max(float(phi(r)) / u, u / float(phi(r)))
                if v > c:
                    c, wit = v, {"x": int(x), "r": float(r), "mean_exit": u,
                                 "phi_r": float(phi(r))}
        return c, wit

    base = space.dyadic_radii()
    c, wit = sweep(base)
    lo, hi = space.radius_window
    fine, r = [], lo
    while r <= hi * (1 + 1e-12):
        fine.append(r)
        r *= np.sqrt(2)
    cf, _ = sweep(np.array(fine))
    if not (np.isfinite(c) and c >= 1):
        verdict = "fail"
    elif cf > 1.5 * c + 1e-300:
        verdict = "flagged"
    else:
        verdict = "pass"
    return FormReport(condition="ephi",
                      verdict=verdict,
                      constants={"c": c, "c_refined": cf},
                      witnesses=[wit] if wit else [],
                      grid={"radii": [float(v) for v in base]})


def default_time_grid(phi, r, levels=6):
    """Dyadic times {phi(r) 2^-k} aligned with the scale function."""
    phi = build_scale(phi)
    top = float(phi(r))
    return np.array(sorted(top * 2.0 ** (-k) for k in range(levels)))
