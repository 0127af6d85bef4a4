"""Jump kernels and their comparability conditions.

Kernel families on a metric measure space: stable-like (reference kernel
1/(V(x,d)phi(d)), symmetrized), perturbed-stable (seeded symmetric
multiplicative field), cone (fixed double cone of directions), per-point
cone (seeded per-point double cones, union membership), sector (a union
of exponentially thinning angular intervals, 4-fold symmetric), and axis
(jumps only along single lattice coordinates with one-dimensional stable
weights).  Checkers measure two-sided comparability with the reference
kernel, the UJS averaged-dominance condition, and tail integrals.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedKernelError, InvalidSpecError
from .scale import build_scale

_TIE = 1e-9


class JumpKernel:
    """Symmetric nonnegative jump intensity matrix with zero diagonal.

    lam[x] = sum_y J(x,y) mu(y) is the total jump rate out of x; every
    state must have a positive rate and the jump graph must be connected.
    """

    def __init__(self, J, space, family=None, params=None):
        J = np.asarray(J, dtype=float)
        n = space.n
        if J.shape != (n, n):
            raise InvalidSpecError("kernel shape %r != space size %d" % (J.shape, n))
        if np.any(J < 0):
            raise InvalidSpecError("kernel must be nonnegative")
        if not np.array_equal(J, J.T):
            raise InvalidSpecError("kernel must be exactly symmetric")
        if np.any(np.diag(J) != 0):
            raise InvalidSpecError("kernel diagonal must be zero")
        self.J = J
        self.space = space
        self.family = dict(family or {"kind": "custom"})
        self.params = dict(params or {})
        self.lam = J @ space.mu
        if np.any(self.lam <= 0):
            raise DisconnectedKernelError("state with zero jump rate")
        self._check_connected()

    def _check_connected(self):
        n = self.J.shape[0]
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = np.array([0])
        adj = self.J > 0
        while frontier.size:
            reach = np.any(adj[frontier], axis=0) & ~seen
            frontier = np.nonzero(reach)[0]
            seen |= reach
        if not seen.all():
            raise DisconnectedKernelError(
                "jump graph splits into components (%d of %d reachable)"
                % (int(seen.sum()), n))

    def to_csv(self, path):
        """Write nonzero upper-triangle entries as `i,j,J` rows."""
        i, j = np.nonzero(np.triu(self.J, 1))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("i,j,J\n")
            for a, b in zip(i, j):
                fh.write("%d,%d,%.17g\n" % (a, b, self.J[a, b]))


def _wrapped_deltas(space):
    """Per-coordinate wrapped offsets delta[k][x,y] in [-N/2, N/2)."""
    lat = space.lattice
    if lat is None:
        raise InvalidSpecError("this kernel family needs a lattice space")
    coords = lat["coords"]
    side = lat["side"]
    out = []
    for k in range(lat["dim"]):
        raw = coords[None, :, k] - coords[:, None, k]
        out.append(((raw + side // 2) % side) - side // 2)
    return out


def _stable_like(space, phi):
    V = space.volume_at_dist()
    D = space.dist
    base = np.zeros_like(D)
    off = ~np.eye(space.n, dtype=bool)
    base[off] = 1.0 / (V[off] * phi(D[off]))
    return 0.5 * (base + base.T)


def _sector_intervals():
    # union of [start, start+width) angular intervals inside [0, pi/2),
    # widths shrinking 4x per level while the gaps shrink 2x
    base = 3 * np.pi / 8
    starts, widths = [0.0], [base / 4]
    s = 0.0
    n = 1
    while True:
        s += base * (4.0 ** -n + 2.0 ** -n)
        w = base * 4.0 ** -(n + 1)
        if w < 1e-14:
            break
        starts.append(s)
        widths.append(w)
        n += 1
    return np.array(starts), np.array(widths)


def _fold_angle(psi):
    """Fold an angle to [0, pi/2] modulo the four-fold symmetry."""
    a = np.abs(psi)
    return np.where(a > np.pi / 2, np.pi - a, a)


def make_kernel(space, phi, spec):
    """Build a jump kernel from a family descriptor.

    spec: {"kind": ...} plus family parameters.  Masking families (cone,
    per-point-cone, sector) zero the stable-like reference off their
    direction sets; ties on the closed cone boundary are kept.
    """
    phi = build_scale(phi)
    spec = dict(spec)
    try:
        kind = spec.pop("kind")
        return _dispatch_kernel(space, phi, kind, spec)
    except KeyError as exc:
        raise InvalidSpecError("kernel spec is missing parameter %s" % exc)


def _dispatch_kernel(space, phi, kind, spec):
    n = space.n

    if kind == "stable-like":
        J = _stable_like(space, phi)
        return JumpKernel(J, space, {"kind": kind}, spec)

    if kind == "perturbed-stable":
        c_lo, c_hi = float(spec["c_lo"]), float(spec["c_hi"])
        if not (0 < c_lo <= c_hi):
            raise InvalidSpecError("perturbation bounds must satisfy 0 < c_lo <= c_hi")
        seed = int(spec["seed"])
        rng = np.random.default_rng(seed)
        U = rng.uniform(c_lo, c_hi, size=(n, n))
        C = np.triu(U, 1)
        C = C + C.T
        J = _stable_like(space, phi) * C
        return JumpKernel(J, space, {"kind": kind},
                          {"c_lo": c_lo, "c_hi": c_hi, "seed": seed})

    if kind == "cone":
        v = np.asarray(spec["v"], dtype=float)
        theta = float(spec["theta"])
        if not (0 < theta < 1):
            raise InvalidSpecError("cone aperture cosine must lie in (0,1)")
        v = v / np.linalg.norm(v)
        deltas = _wrapped_deltas(space)
        if len(deltas) != v.size:
            raise InvalidSpecError("cone axis dimension mismatch")
        dot = sum(v[k] * d for k, d in enumerate(deltas))
        norm2 = sum(np.asarray(d, dtype=float) ** 2 for d in deltas)
        mask = np.abs(dot) >= theta * np.sqrt(norm2) - _TIE
        np.fill_diagonal(mask, False)
        J = _stable_like(space, phi) * mask
        return JumpKernel(J, space, {"kind": kind},
                          {"v": [float(c) for c in v], "theta": theta})

    if kind == "per-point-cone":
        theta = float(spec["theta"])
        if not (0 < theta < 1):
            raise InvalidSpecError("cone aperture cosine must lie in (0,1)")
        seed = int(spec["seed"])
        dim = space.lattice["dim"] if space.lattice else None
        if dim is None:
            raise InvalidSpecError("per-point-cone needs a lattice space")
        axes = np.empty((n, dim))
        for x in range(n):
            g = np.random.default_rng(np.random.SeedSequence([seed, x]))
            vec = g.normal(size=dim)
            axes[x] = vec / np.linalg.norm(vec)
        deltas = _wrapped_deltas(space)
        norm = np.sqrt(sum(np.asarray(d, dtype=float) ** 2 for d in deltas))
        dot_x = sum(axes[:, k][:, None] * deltas[k] for k in range(dim))
        in_x = np.abs(dot_x) >= theta * norm - _TIE
        mask = in_x | in_x.T
        np.fill_diagonal(mask, False)
        J = _stable_like(space, phi) * mask
        return JumpKernel(J, space, {"kind": kind},
                          {"theta": theta, "seed": seed})

    if kind == "sector":
        if space.lattice is None or space.lattice["dim"] != 2:
            raise InvalidSpecError("sector kernels need a 2-d lattice")
        dx, dy = _wrapped_deltas(space)
        psi = _fold_angle(np.arctan2(dy, dx))
        starts, widths = _sector_intervals()
        bounds = np.empty(2 * starts.size)
        bounds[0::2] = starts
        bounds[1::2] = starts + widths
        mask = np.searchsorted(bounds, psi, side="right") % 2 == 1
        np.fill_diagonal(mask, False)
        J = _stable_like(space, phi) * mask
        return JumpKernel(J, space, {"kind": kind}, {})

    if kind == "axis":
        alpha = float(spec["alpha"])
        if not (0 < alpha < 2):
            raise InvalidSpecError("axis exponent must lie in (0,2)")
        deltas = _wrapped_deltas(space)
        absd = [np.abs(d) for d in deltas]
        nonzero = sum((a > 0).astype(int) for a in absd)
        J = np.zeros((n, n))
        single = nonzero == 1
        mag = sum(a * (a > 0) for a in absd)[single].astype(float)
        J[single] = mag ** (-1.0 - alpha)
        return JumpKernel(J, space, {"kind": kind}, {"alpha": alpha})

    raise InvalidSpecError("unknown kernel family %r" % (kind,))


@dataclass
class KernelReport:
    condition: str
    verdict: str
    constants: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    grid: dict = field(default_factory=dict)

    def to_dict(self):
        return {"condition": self.condition, "verdict": self.verdict,
                "constants": self.constants, "witnesses": self.witnesses,
                "grid": self.grid}


def check_j_bounds(space, phi, kernel):
    """Two-sided comparability with the reference 1/(V(x,d) phi(d)).

    c2_upper / c1_lower are the extreme values of
    J(x,y) * V(x,d(x,y)) * phi(d(x,y)) over x != y.  The upper bound
    passes iff finite; the lower bound passes iff strictly positive.
    """
    phi = build_scale(phi)
    V = space.volume_at_dist()
    D = space.dist
    off = ~np.eye(space.n, dtype=bool)
    ratio = kernel.J[off] * V[off] * phi(D[off])
    idx = np.nonzero(off)
    k_lo, k_hi = int(np.argmin(ratio)), int(np.argmax(ratio))
    c1 = float(ratio[k_lo])
    c2 = float(ratio[k_hi])
    return KernelReport(
        condition="j-bounds",
        verdict="pass" if (np.isfinite(c2) and c1 > 0) else "fail",
        constants={"c1_lower": c1, "c2_upper": c2,
                   "verdict_j_le": "pass" if np.isfinite(c2) else "fail",
                   "verdict_j_ge": "pass" if c1 > 0 else "fail"},
        witnesses=[{"role": "c1_lower", "x": int(idx[0][k_lo]), "y": int(idx[1][k_lo])},
                   {"role": "c2_upper", "x": int(idx[0][k_hi]), "y": int(idx[1][k_hi])}],
    )


def _sqrt2_floor(v, r_min):
    """Largest r_min * 2^(k/2) <= v (k >= 0 integer), NaN below r_min."""
    v = np.asarray(v, dtype=float)
    k = np.floor(2 * np.log2(np.maximum(v, 1e-300) / r_min) + 1e-9)
    out = r_min * 2.0 ** (k / 2)
    return np.where(v >= r_min * (1 - 1e-12), out, np.nan)


def _ujs_ladder(space):
    r_min = space.radius_window[0]
    top = space.diameter / 2
    ladder = []
    r = r_min
    while r <= top * (1 + 1e-12):
        ladder.append(r)
        r *= 2
    return ladder


def _kernel_is_invariant(space, kernel, probes=32):
    if space.lattice is None:
        return False
    if np.ptp(space.mu) != 0:
        return False
    lat = space.lattice
    side, dim = lat["side"], lat["dim"]
    coords = lat["coords"]
    strides = np.array([side ** (dim - 1 - k) for k in range(dim)])
    rng = np.random.default_rng(12345)
    K = kernel.J[0]
    for _ in range(probes):
        x = int(rng.integers(space.n))
        y = int(rng.integers(space.n))
        w = (coords[y] - coords[x]) % side
        if kernel.J[x, y] != K[int(w @ strides)]:
            return False
    return True


def _torus_norm_grid(space):
    lat = space.lattice
    side, dim = lat["side"], lat["dim"]
    ax = np.minimum(np.arange(side), side - np.arange(side)).astype(float)
    grids = np.meshgrid(*[ax] * dim, indexing="ij")
    if lat["metric"] == "l2":
        return np.sqrt(sum(g * g for g in grids))
    return np.maximum.reduce(grids)


def _ujs_invariant(space, kernel, ladder):
    """Exhaustive UJS sweep for translation-invariant lattice kernels.

    All pair ratios reduce to offset ratios; the ball-averaged denominator
    is a circular convolution of the offset kernel with the ball mask,
    done once per distinct capped radius.
    """
    lat = space.lattice
    side, dim = lat["side"], lat["dim"]
    shape = (side,) * dim
    mu0 = float(space.mu[0])
    K = kernel.J[0].reshape(shape)
    dist = _torus_norm_grid(space)
    r_min = space.radius_window[0]
    capped = _sqrt2_floor(dist / 2, r_min)
    radii = sorted({float(v) for v in capped[~np.isnan(capped)]}
                   | {float(r) for r in ladder})
    fK = np.fft.rfftn(K)
    denom = {}
    vol = {}
    for v in radii:
        M = (dist <= v + _TIE).astype(float)
        conv = np.fft.irfftn(fK * np.fft.rfftn(M), s=shape,
                             axes=tuple(range(dim)))
        denom[v] = np.maximum(conv, 0.0) * mu0
        vol[v] = float(M.sum()) * mu0
    per_radius = {}
    witnesses = []
    evaluable = ~np.isnan(capped)
    for r in ladder:
        reff = np.minimum(r, capped)
        best, wit = 0.0, None
        for v in radii:
            sel = evaluable & (reff == v) & (K > 0)
            if not sel.any():
                continue
            ratios = K[sel] * vol[v] / np.maximum(denom[v][sel], 1e-300)
            k = int(np.argmax(ratios))
            if ratios[k] > best:
                best = float(ratios[k])
                offs = np.array(np.nonzero(sel)).T[k]
                wit = {"offset": [int(c) for c in offs], "r_eff": v}
        per_radius[r] = best
        if wit is not None:
            wit["r"] = float(r)
            witnesses.append(wit)
    return per_radius, witnesses


def _ujs_dense(space, kernel, ladder, sample_budget):
    n = space.n
    W = space.mu[:, None] * kernel.J
    D = space.dist
    r_min = space.radius_window[0]
    capped = _sqrt2_floor(D / 2, r_min)
    np.fill_diagonal(capped, np.nan)
    if n <= 4096:
        rows = np.arange(n)
    else:
        m = max(1, min(n, int(sample_budget) // n))
        rows = np.sort(np.random.default_rng(0).choice(n, size=m, replace=False))
    capped = capped[rows]
    radii = sorted({float(v) for v in capped[~np.isnan(capped)]}
                   | {float(r) for r in ladder})
    denom = {}
    vol = {}
    for v in radii:
        B = (D[rows] <= v + _TIE).astype(float)
        denom[v] = B @ W
        vol[v] = np.array([space.volume(int(x), v) for x in rows])
    Jr = kernel.J[rows]
    per_radius = {}
    witnesses = []
    evaluable = ~np.isnan(capped)
    for r in ladder:
        reff = np.minimum(r, capped)
        best, wit = 0.0, None
        for v in radii:
            sel = evaluable & (reff == v) & (Jr > 0)
            if not sel.any():
                continue
            num = Jr[sel] * vol[v][np.nonzero(sel)[0]]
            den = denom[v][sel]
            ratios = np.where(den > 0, num / np.maximum(den, 1e-300), np.inf)
            k = int(np.argmax(ratios))
            if ratios[k] > best:
                best = float(ratios[k])
                i, j = np.nonzero(sel)
                wit = {"x": int(rows[i[k]]), "y": int(j[k]), "r_eff": v}
        per_radius[r] = best
        if wit is not None:
            wit["r"] = float(r)
            witnesses.append(wit)
    return per_radius, witnesses


def check_ujs(space, kernel, sample_budget=10 ** 6):
    """Averaged dominance of single jumps by ball averages.

    For pairs x != y the ratio J(x,y) V(x,r_eff) / sum_{z in B(x,r_eff)}
    J(z,y) mu(z) is evaluated at every rung r of the dyadic ladder from
    r_min up to diameter/2, with the per-pair effective radius
    min(r, d(x,y)/2) floored to a sqrt(2)-geometric grid so the radius
    constraint r <= d/2 always holds; pairs closer than 2 r_min admit no
    radius and are skipped.  Ratios are 0 where J(x,y)=0.  c(r) is the
    max ratio at rung r; the verdict fails iff some c is infinite or the
    rung maxima climb monotonically by more than a factor 2 overall.
    """
    ladder = _ujs_ladder(space)
    if _kernel_is_invariant(space, kernel):
        per_radius, wits = _ujs_invariant(space, kernel, ladder)
    else:
        per_radius, wits = _ujs_dense(space, kernel, ladder, sample_budget)
    cs = [per_radius[r] for r in ladder]
    overall = max(cs) if cs else 0.0
    growth = 1.0
    k = 0
    while k < len(cs):
        j = k
        while j + 1 < len(cs) and cs[j + 1] >= cs[j] > 0:
            j += 1
        if cs[k] > 0:
            growth = max(growth, cs[j] / cs[k])
        k = max(j, k + 1)
    verdict = "pass" if (np.isfinite(overall) and growth <= 2.0) else "fail"
    return KernelReport(
        condition="ujs",
        verdict=verdict,
        constants={"c": overall, "growth_factor": growth,
                   **{"c(%g)" % r: per_radius[r] for r in ladder}},
        witnesses=wits,
        grid={"ladder": [float(r) for r in ladder]},
    )


def check_tail_integral(space, phi, kernel):
    """Upper bound phi(r) * sum_{y outside B(x,r)} J(x,y) mu(y) <= c1.

    c1 is the max over all x and dyadic window r; the verdict requires a
    finite value that is stable (within 50%) on a refined radius grid.
    """
    phi = build_scale(phi)
    W = kernel.J * space.mu[None, :]

    def sweep(radii):
        best, wit = 0.0, None
        for r in radii:
            pv = float(phi(r))
            for x in range(space.n):
                inside = space.ball(x, r)
                tail = kernel.lam[x] - W[x, inside].sum()
                val = pv * tail
                if val > best:
                    best, wit = float(val), {"x": x, "r": float(r)}
        return best, wit

    lo, hi = space.radius_window
    base = space.dyadic_radii()
    c1, wit = sweep(base)
    fine = []
    r = lo
    while r <= hi * (1 + 1e-12):
        fine.append(r)
        r *= np.sqrt(2)
    c1f, _ = sweep(np.array(fine))
    if not np.isfinite(c1):
        verdict = "fail"
    elif c1f > 1.5 * c1 + 1e-300:
        verdict = "flagged"
    else:
        verdict = "pass"
    return KernelReport(
        condition="tail-integral",
        verdict=verdict,
        constants={"c1": c1, "c1_refined": c1f},
        witnesses=[wit] if wit else [],
        grid={"radii": [float(r) for r in base]},
    )


def nonlocal_tail(space, phi, u, x0, r):
    """Tail functional of u outside B(x0,r) against the reference kernel."""
    phi = build_scale(phi)
    lo, hi = space.radius_window
    if not (lo - _TIE <= r <= hi + _TIE):
        raise InvalidSpecError("tail radius %g outside window [%g, %g]" % (r, lo, hi))
    u = np.asarray(u, dtype=float)
    inside = np.zeros(space.n, dtype=bool)
    inside[space.ball(x0, r)] = True
    z = ~inside
    if not z.any():
        return 0.0
    d = space.dist[x0, z]
    V = space.volumes(x0, d)
    return float(phi(r) * np.sum(np.abs(u[z]) * space.mu[z] / (V * phi(d))))
