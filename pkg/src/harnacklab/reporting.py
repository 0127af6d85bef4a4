"""Config-driven orchestration and canonical report serialization.

An experiment is described by a TOML file: space, scale, and kernel
specs, a list of checkers with per-checker parameters, an explicit seed,
and optional tolerance overrides.  Running it produces a suite report
whose canonical section (resolved config, condition reports, equivalence
matrix) serializes to byte-identical JSON across repeated runs; wall
times and timestamps live outside the canonical section.  Emitters
render the same report as JSON, CSV (one row per fitted constant), or a
markdown summary with the equivalence matrix as a table.
"""

import concurrent.futures
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib as _toml
except ImportError:
    import tomli as _toml

from .errors import CapExceededError, HarnackLabError, InvalidSpecError
from .form import check_csj, check_fk, check_pi
from .harnack import check_ehi, check_phi, equivalence_suite, fit_holder
from .heat import (check_conservative, check_ephi, check_hk, check_ndl,
                   default_time_grid, heat_kernel, load_tensor, save_tensor)
from .kernel import check_j_bounds, check_tail_integral, check_ujs, make_kernel
from .montecarlo import ENGINE, estimate, verify_levy_system
from .scale import build_scale, check_polycon
from .space import build_space, check_doubling

CACHE_ENV = "HARNACKLAB_CACHE"


def _jsonable(obj):
    """Recursively coerce to plain JSON types with stable float text."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    raise InvalidSpecError("cannot serialize %r" % type(obj).__name__)


def canonical_json(obj):
    """Sorted-key, minimal-separator JSON with non-finite floats as text."""
    return json.dumps(_jsonable(obj), sort_keys=True,
                      separators=(",", ":"), allow_nan=False)


@dataclass
class ConditionReport:
    """One checker outcome plus the tolerances and timing of the run."""
    condition: str
    verdict: str
    constants: dict
    witnesses: list
    grid: dict
    tolerances: dict = field(default_factory=dict)
    wall_time: float = 0.0

    VERDICTS = ("pass", "fail", "flagged")

    def __post_init__(self):
        if self.verdict not in self.VERDICTS:
            raise InvalidSpecError("unknown verdict %r" % (self.verdict,))

    @classmethod
    def from_checker(cls, report, tolerances, wall_time):
        d = report.to_dict()
        verdict = d.get("verdict", "fail")
        constants = dict(d.get("constants", {}))
        if isinstance(verdict, dict):
            # compound checkers (volume doubling) report per-part verdicts
            for part, v in verdict.items():
                constants["verdict_" + part] = v
            verdict = "pass" if all(v == "pass" for v in verdict.values()) \
                else "fail"
        return cls(condition=d.get("condition", "unknown"),
                   verdict=verdict,
                   constants=constants,
                   witnesses=d.get("witnesses", []),
                   grid=d.get("grid", {}),
                   tolerances=dict(tolerances),
                   wall_time=float(wall_time))

    def to_dict(self):
        # wall time is reported separately so the canonical section
        # stays byte-stable across runs
        return {"condition": self.condition, "verdict": self.verdict,
                "constants": self.constants, "witnesses": self.witnesses,
                "grid": self.grid, "tolerances": self.tolerances}


@dataclass
class SuiteReport:
    """Resolved config, condition reports, and the equivalence matrix."""
    config: dict
    conditions: list
    matrix: dict = None
    refined: dict = None
    meta: dict = field(default_factory=dict)

    def canonical(self):
        body = {"config": self.config,
                "conditions": [c.to_dict() for c in self.conditions]}
        if self.matrix is not None:
            body["matrix"] = self.matrix
        if self.refined is not None:
            body["refined"] = self.refined
        return _jsonable(body)

    def to_dict(self):
        meta = dict(self.meta)
        meta["wall_times"] = {c.condition: c.wall_time for c in self.conditions}
        return {"canonical": self.canonical(), "meta": _jsonable(meta)}

    @classmethod
    def from_dict(cls, d):
        body = d["canonical"]
        conds = [ConditionReport(tolerances=c.get("tolerances", {}), **{
            k: c[k] for k in ("condition", "verdict", "constants",
                              "witnesses", "grid")}) for c in body["conditions"]]
        return cls(config=body["config"], conditions=conds,
                   matrix=body.get("matrix"), refined=body.get("refined"),
                   meta=d.get("meta", {}))


def _require(table, key, where):
    if key not in table:
        raise InvalidSpecError("missing %r in %s" % (key, where))
    return table[key]


_KNOWN_CHECKS = ("fk", "pi", "csj", "ujs", "j_bounds", "tail", "hk-upper",
                 "hk-lower", "hk-diag", "ndl", "ephi", "phi", "ehi", "ehr",
                 "phr", "conservative", "doubling", "polycon", "levy")


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    The seed is mandatory: reports must be reproducible from the config
    alone, so no wall-clock default is ever substituted.
    """
    space: dict
    scale: dict
    kernel: dict
    seed: int
    checks: list = field(default_factory=list)
    suite: dict = None
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    refine: bool = False
    simulate: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw, source="config"):
        if "seed" not in raw:
            raise InvalidSpecError(
                "%s: 'seed' is required (reports must not depend on the "
                "wall clock)" % source)
        seed = raw["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise InvalidSpecError("%s: 'seed' must be an integer" % source)
        space = dict(_require(raw, "space", source))
        scale = dict(_require(raw, "scale", source))
        kernel = dict(_require(raw, "kernel", source))
        checks = [dict(c) for c in raw.get("check", [])]
        for c in checks:
            name = _require(c, "name", source + ".check")
            if name not in _KNOWN_CHECKS:
                raise InvalidSpecError(
                    "%s: unknown checker %r (known: %s)"
                    % (source, name, ", ".join(_KNOWN_CHECKS)))
        suite = raw.get("suite")
        if suite is not None:
            suite = dict(suite)
            if not suite.pop("enabled", True):
                suite = None
        return cls(space=space, scale=scale, kernel=kernel, seed=seed,
                   checks=checks, suite=suite,
                   tolerances=dict(raw.get("tolerances", {})),
                   output=dict(raw.get("output", {})),
                   refine=bool(raw.get("refine", False)),
                   simulate=dict(raw.get("simulate", {})))

    @classmethod
    def from_toml(cls, path):
        try:
            with open(path, "rb") as fh:
                raw = _toml.load(fh)
        except OSError as e:
            raise InvalidSpecError("cannot read config %s: %s" % (path, e))
        except _toml.TOMLDecodeError as e:
            raise InvalidSpecError("config %s does not parse: %s" % (path, e))
        return cls.from_dict(raw, source=str(path))

    def resolved(self):
        """Full config as embedded in reports (self-describing)."""
        out = {"space": self.space, "scale": self.scale,
               "kernel": self.kernel, "seed": self.seed,
               "check": self.checks, "tolerances": self.tolerances,
               "refine": self.refine}
        if self.suite is not None:
            out["suite"] = dict(self.suite, enabled=True)
        if self.simulate:
            out["simulate"] = self.simulate
        return out


def _build(config):
    space = build_space(dict(config.space))
    phi = build_scale(dict(config.scale))
    kernel = make_kernel(space, phi, dict(config.kernel))
    return space, phi, kernel


def _tensor_for(space, phi, kernel, config):
    """Global heat tensor, via the cache directory when configured."""
    times = default_time_grid(phi, space.radius_window[1])
    cache = os.environ.get(CACHE_ENV)
    if cache:
        key = hashlib.sha256(canonical_json(
            {"space": config.space, "scale": config.scale,
             "kernel": config.kernel, "times": times}).encode()).hexdigest()[:24]
        path = os.path.join(cache, key + ".hkt")
        if os.path.exists(path):
            return load_tensor(path, space)
        tensor = heat_kernel(space, kernel, times)
        os.makedirs(cache, exist_ok=True)
        save_tensor(path, tensor)
        return tensor
    return heat_kernel(space, kernel, times)


def _halfspace_functional(space):
    # indicator of jumps landing in the lower half of the first coordinate
    if space.lattice is not None:
        coords = space.lattice["coords"]
        inside = coords[:, 0] < space.lattice["side"] / 2
    else:
        inside = np.arange(space.n) < space.n / 2
    F = np.tile(inside.astype(float), (space.n, 1))
    np.fill_diagonal(F, 0.0)
    return F


def _run_check(name, params, space, phi, kernel, tensor, seed, tol):
    if name == "fk":
        return check_fk(space, phi, kernel, seed=params.get("seed", seed))
    if name == "pi":
        return check_pi(space, phi, kernel,
                        kappa=params.get("kappa", 2.0),
                        seed=params.get("seed", seed))
    if name == "csj":
        return check_csj(space, phi, kernel, C0=params.get("C0", 1.0),
                         seed=params.get("seed", seed))
    if name == "ujs":
        return check_ujs(space, kernel)
    if name == "j_bounds":
        return check_j_bounds(space, phi, kernel)
    if name == "tail":
        return check_tail_integral(space, phi, kernel)
    if name in ("hk-upper", "hk-lower", "hk-diag"):
        mode = {"hk-upper": "upper", "hk-lower": "lower",
                "hk-diag": "diag-upper"}[name]
        return check_hk(space, phi, kernel, tensor, mode,
                        lower_floor=tol.get("lhk_floor", 0.01))
    if name == "ndl":
        return check_ndl(space, phi, kernel,
                         eps=tol.get("ndl_eps", params.get("eps", 0.5)),
                         floor=tol.get("ndl_floor", params.get("floor", 1e-3)),
                         seed=params.get("seed", seed))
    if name == "ephi":
        return check_ephi(space, phi, kernel, seed=params.get("seed", seed))
    if name == "phi":
        kwargs = {}
        if "constants" in params:
            kwargs["constants"] = tuple(params["constants"])
        if "C5" in params:
            kwargs["C5"] = params["C5"]
        return check_phi(space, phi, kernel, seed=params.get("seed", seed),
                         family_budget=params.get("family_budget", 16),
                         **kwargs)
    if name == "ehi":
        return check_ehi(space, phi, kernel,
                         delta=params.get("delta", 0.5),
                         seed=params.get("seed", seed))
    if name in ("ehr", "phr"):
        return fit_holder(space, phi, kernel, mode=name.upper(),
                          seed=params.get("seed", seed),
                          members=params.get("members", 8))
    if name == "conservative":
        return check_conservative(tensor)
    if name == "doubling":
        return check_doubling(space)
    if name == "polycon":
        return check_polycon(phi, space.radius_window)
    if name == "levy":
        return verify_levy_system(
            space, kernel, _halfspace_functional(space),
            T=params.get("T", 1.0), paths=params.get("paths", 10 ** 4),
            seed=params.get("seed", seed), x0=params.get("x0", 0))
    raise InvalidSpecError("unknown checker %r" % (name,))


def _needs_tensor(config):
    names = {c["name"] for c in config.checks}
    return bool(names & {"hk-upper", "hk-lower", "hk-diag", "conservative"})


def _refined_space_spec(spec):
    """The same family at doubled linear size (N -> 2N refinement pair)."""
    out = dict(spec)
    kind = out.get("kind")
    if kind == "torus":
        out["side"] = 2 * out["side"]
        if "radius_window" in out:
            lo, hi = out["radius_window"]
            out["radius_window"] = [lo, 2 * hi]
    elif kind == "gasket":
        out["level"] = out["level"] + 1
        if "radius_window" in out:
            lo, hi = out["radius_window"]
            out["radius_window"] = [lo, 2 * hi]
    else:
        raise InvalidSpecError(
            "refinement pairs are defined for torus and gasket families only")
    return out


def _execute_checks(config, space, phi, kernel, tensor, threads):
    tol = config.tolerances
    jobs = [(c["name"], {k: v for k, v in c.items() if k != "name"})
            for c in config.checks]

    def one(job):
        name, params = job
        t0 = time.perf_counter()
        rep = _run_check(name, params, space, phi, kernel, tensor,
                         config.seed, tol)
        return ConditionReport.from_checker(rep, tol, time.perf_counter() - t0)

    if threads > 1 and len(jobs) > 1:
        # checkers share the space/kernel immutably; results are collected
        # in config order so scheduling cannot affect the canonical output
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, jobs))
    return [one(job) for job in jobs]


def run(config, threads=1, refine=None):
    """Execute an experiment config and return the suite report."""
    space, phi, kernel = _build(config)
    tensor = _tensor_for(space, phi, kernel, config) if (
        _needs_tensor(config) or config.suite is not None) else None
    conditions = _execute_checks(config, space, phi, kernel, tensor, threads)
    matrix = None
    if config.suite is not None:
        cfg = dict(config.suite)
        cfg.setdefault("seed", config.seed)
        cfg.update(config.tolerances)
        cfg["tensor"] = tensor
        matrix = equivalence_suite(space, phi, kernel, cfg).to_dict()
    refined = None
    if config.refine if refine is None else refine:
        spec2 = _refined_space_spec(config.space)
        space2 = build_space(dict(spec2))
        kernel2 = make_kernel(space2, phi, dict(config.kernel))
        tensor2 = _tensor_for(space2, phi, kernel2, config) if (
            _needs_tensor(config)) else None
        conds2 = _execute_checks(config, space2, phi, kernel2, tensor2, 1)
        ratios = {}
        for a, b in zip(conditions, conds2):
            r = {}
            for k, v in a.constants.items():
                w = b.constants.get(k)
                if (isinstance(v, float) and isinstance(w, float)
                        and np.isfinite(v) and np.isfinite(w) and v > 0 and w > 0):
                    r[k] = w / v
            ratios[a.condition] = r
        refined = {"space": spec2,
                   "conditions": [c.to_dict() for c in conds2],
                   "constant_ratios": ratios}
    return SuiteReport(config=config.resolved(), conditions=conditions,
                       matrix=matrix, refined=refined,
                       meta={"engine": ENGINE, "timestamp": time.time()})


def run_simulation(config, paths):
    """Monte Carlo estimate described by the config's simulate table."""
    sim = config.simulate
    if not sim:
        raise InvalidSpecError("config has no [simulate] table")
    space, phi, kernel = _build(config)
    mode = _require(sim, "mode", "[simulate]")
    x0 = int(sim.get("x0", 0))
    if mode == "exit-time":
        what = ("exit-time", x0, float(_require(sim, "radius", "[simulate]")))
    elif mode == "hitting":
        D = space.ball(x0, float(_require(sim, "radius", "[simulate]")))
        what = ("hitting", D, int(_require(sim, "z", "[simulate]")), x0)
    elif mode == "kernel":
        what = ("kernel", float(_require(sim, "t", "[simulate]")),
                x0, int(_require(sim, "y", "[simulate]")))
    else:
        raise InvalidSpecError("unknown simulate mode %r" % (mode,))
    t0 = time.perf_counter()
    mean, stderr = estimate(space, kernel, what, paths, config.seed,
                            horizon=float(sim.get("horizon", np.inf)))
    body = {"config": config.resolved(), "mode": mode, "paths": int(paths),
            "mean": float(mean), "stderr": float(stderr)}
    return {"canonical": _jsonable(body),
            "meta": _jsonable({"engine": ENGINE,
                               "wall_time": time.perf_counter() - t0,
                               "timestamp": time.time()})}


def _md_constants(constants):
    parts = []
    for k in sorted(constants):
        v = constants[k]
        if isinstance(v, float):
            parts.append("%s=%.6g" % (k, v))
        else:
            parts.append("%s=%s" % (k, v))
    return ", ".join(parts)


def render_markdown(report):
    """Markdown summary: conditions table plus the equivalence matrix."""
    lines = ["# Condition report", ""]
    cfg = report.config
    lines.append("space `%s`, scale `%s`, kernel `%s`, seed %d" % (
        canonical_json(cfg.get("space", {})), canonical_json(cfg.get("scale", {})),
        canonical_json(cfg.get("kernel", {})), cfg.get("seed", 0)))
    lines.append("")
    if report.conditions:
        lines += ["| condition | verdict | constants |", "|---|---|---|"]
        for c in report.conditions:
            lines.append("| %s | %s | %s |"
                         % (c.condition, c.verdict, _md_constants(c.constants)))
        lines.append("")
    if report.matrix:
        m = report.matrix
        lines += ["## Equivalence matrix", "",
                  "| group | verdict | components |", "|---|---|---|"]
        for name, g in m["groups"].items():
            comp = []
            for cname in g["components"]:
                rep = m["reports"].get(cname, {})
                comp.append("%s=%s" % (cname, rep.get("verdict", "?")))
            lines.append("| %s | %s | %s |"
                         % (name, g["verdict"], ", ".join(comp)))
        cor = m["corollary"]
        hk_side = ["%s=%s" % (k, m["reports"].get(k, {}).get("verdict", "?"))
                   for k in ("uhk", "lhk")]
        jb = m["reports"].get("j_bounds", {}).get("constants", {})
        phi_side = ["phi=%s" % m["reports"].get("phi", {}).get("verdict", "?"),
                    "j_ge=%s" % jb.get("verdict_j_ge", "?")]
        lines.append("| corollary | %s | %s |" % (
            "hk=%s (%s)" % ("pass" if cor["hk"] else "fail", ", ".join(hk_side)),
            "phi+j_ge=%s (%s)" % ("pass" if cor["phi_and_j_ge"] else "fail",
                                  ", ".join(phi_side))))
        lines += ["", "consistent: **%s**" % cor["consistent"]]
        if m.get("disagreements"):
            lines += ["", "disagreements:"]
            for d in m["disagreements"]:
                lines.append("- `%s`" % canonical_json(d))
    lines.append("")
    return "\n".join(lines)


def render_csv(report):
    """One row per (condition, constant); witness serialized inline."""
    rows = ["condition,constant,value,witness"]
    for c in report.conditions:
        wit = canonical_json(c.witnesses[0]) if c.witnesses else ""
        wit = '"%s"' % wit.replace('"', '""') if wit else ""
        for k in sorted(c.constants):
            v = c.constants[k]
            if isinstance(v, float):
                text = repr(v)
            else:
                text = canonical_json(v) if not isinstance(v, str) else v
            rows.append("%s,%s,%s,%s" % (c.condition, k, text, wit))
    return "\n".join(rows) + "\n"


def emit(report, fmt, out_dir=".", stem="report"):
    """Write the report in the requested format; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "json":
        path = os.path.join(out_dir, stem + ".json")
        payload = report.to_dict() if isinstance(report, SuiteReport) else report
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)
            fh.write("\n")
        return [path]
    if fmt == "csv":
        path = os.path.join(out_dir, stem + ".csv")
        with open(path, "w") as fh:
            fh.write(render_csv(report))
        return [path]
    if fmt == "md":
        path = os.path.join(out_dir, stem + ".md")
        with open(path, "w") as fh:
            fh.write(render_markdown(report))
        return [path]
    raise InvalidSpecError("unknown format %r (json|csv|md)" % (fmt,))
