"""Config parsing, canonical serialization, run(), and renderers."""

import json
import math

import numpy as np
import pytest

import harnacklab.reporting as reporting
from harnacklab import (ConditionReport, ExperimentConfig, InvalidSpecError,
                        SuiteReport, build_scale, build_space, canonical_json,
                        check_doubling, emit, estimate, make_kernel, run,
                        run_simulation)
from harnacklab.reporting import render_csv, render_markdown

from conftest import PHI1

RAW16 = {
    "seed": 0,
    "space": {"kind": "torus", "d": 1, "side": 16,
              "radius_window": [1.0, 2.0]},
    "scale": dict(PHI1),
    "kernel": {"kind": "stable-like"},
}


def raw16(**extra):
    out = {k: (dict(v) if isinstance(v, dict) else v)
           for k, v in RAW16.items()}
    out.update(extra)
    return out


class TestCanonicalJson:
    def test_key_order_invariance(self):
        a = {"b": 1, "a": {"y": 2.0, "x": [3, 4]}}
        b = {"a": {"x": [3, 4], "y": 2.0}, "b": 1}
        assert canonical_json(a) == canonical_json(b)

    def test_minimal_separators(self):
        assert canonical_json({"a": [1, 2]}) == '{"a":[1,2]}'

    def test_bool_stays_bool(self):
        assert canonical_json({"t": True, "f": False}) == '{"f":false,"t":true}'
        assert canonical_json(np.bool_(True)) == "true"

    def test_numpy_scalars_and_arrays(self):
        s = canonical_json({"i": np.int64(7), "f": np.float64(0.5),
                            "v": np.array([1.0, 2.0])})
        assert s == '{"f":0.5,"i":7,"v":[1.0,2.0]}'

    def test_tuple_becomes_list(self):
        assert canonical_json((1, 2)) == "[1,2]"

    def test_nonfinite_floats_become_text(self):
        s = canonical_json({"a": float("nan"), "b": float("inf"),
                            "c": float("-inf")})
        assert s == '{"a":"nan","b":"inf","c":"-inf"}'
        # and the result is valid strict JSON
        assert json.loads(s) == {"a": "nan", "b": "inf", "c": "-inf"}

    def test_to_dict_fallback(self):
        class Thing:
            def to_dict(self):
                return {"k": 1}

        assert canonical_json(Thing()) == '{"k":1}'

    def test_unserializable_raises(self):
        with pytest.raises(InvalidSpecError):
            canonical_json({"f": object()})


class TestConditionReport:
    def test_unknown_verdict_rejected(self):
        with pytest.raises(InvalidSpecError):
            ConditionReport(condition="x", verdict="maybe", constants={},
                            witnesses=[], grid={})

    def test_from_checker_flattens_compound_verdict(self, z16):
        rep = ConditionReport.from_checker(check_doubling(z16), {}, 0.125)
        assert rep.condition == "VD+RVD"
        assert rep.constants["verdict_vd"] == "pass"
        assert rep.constants["verdict_rvd"] == "pass"
        assert rep.verdict == "pass"
        assert rep.wall_time == 0.125

    def test_from_checker_compound_fail_dominates(self):
        class Fake:
            def to_dict(self):
                return {"condition": "c", "verdict": {"a": "pass", "b": "fail"},
                        "constants": {}, "witnesses": [], "grid": {}}

        rep = ConditionReport.from_checker(Fake(), {}, 0.0)
        assert rep.verdict == "fail"
        assert rep.constants["verdict_b"] == "fail"

    def test_to_dict_excludes_wall_time(self):
        rep = ConditionReport(condition="x", verdict="pass", constants={},
                              witnesses=[], grid={}, wall_time=3.0)
        d = rep.to_dict()
        assert "wall_time" not in d
        assert set(d) == {"condition", "verdict", "constants", "witnesses",
                          "grid", "tolerances"}


class TestExperimentConfig:
    def test_missing_seed_message(self):
        raw = raw16()
        del raw["seed"]
        with pytest.raises(InvalidSpecError, match="'seed' is required"):
            ExperimentConfig.from_dict(raw)

    def test_bool_seed_rejected(self):
        with pytest.raises(InvalidSpecError, match="must be an integer"):
            ExperimentConfig.from_dict(raw16(seed=True))

    def test_missing_space(self):
        raw = raw16()
        del raw["space"]
        with pytest.raises(InvalidSpecError, match="space"):
            ExperimentConfig.from_dict(raw)

    def test_unknown_checker_named_in_error(self):
        raw = raw16(check=[{"name": "uhi"}])
        with pytest.raises(InvalidSpecError, match="uhi"):
            ExperimentConfig.from_dict(raw)

    def test_check_without_name(self):
        with pytest.raises(InvalidSpecError):
            ExperimentConfig.from_dict(raw16(check=[{"kappa": 2.0}]))

    def test_suite_disabled_becomes_none(self):
        cfg = ExperimentConfig.from_dict(raw16(suite={"enabled": False}))
        assert cfg.suite is None

    def test_suite_enabled_keeps_options(self):
        cfg = ExperimentConfig.from_dict(
            raw16(suite={"enabled": True, "family_budget": 8}))
        assert cfg.suite == {"family_budget": 8}

    def test_from_toml_bundled_config(self):
        cfg = ExperimentConfig.from_toml("configs/stable_1d.toml")
        assert cfg.seed == 0
        assert len(cfg.checks) == 18
        assert cfg.suite is not None
        assert cfg.simulate["mode"] == "exit-time"
        assert cfg.output == {"csv": True, "md": True}

    def test_from_toml_missing_file(self, tmp_path):
        with pytest.raises(InvalidSpecError, match="cannot read"):
            ExperimentConfig.from_toml(str(tmp_path / "nope.toml"))

    def test_from_toml_parse_error(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("seed = [unclosed\n")
        with pytest.raises(InvalidSpecError, match="does not parse"):
            ExperimentConfig.from_toml(str(bad))

    def test_resolved_embeds_everything(self):
        cfg = ExperimentConfig.from_dict(
            raw16(check=[{"name": "tail"}], suite={"enabled": True}))
        res = cfg.resolved()
        assert res["space"]["side"] == 16
        assert res["check"] == [{"name": "tail"}]
        assert res["suite"] == {"enabled": True}


@pytest.fixture(scope="module")
def small_cfg_raw():
    return raw16(check=[{"name": "doubling"}, {"name": "polycon"},
                        {"name": "tail"}])


class TestRun:
    def test_conditions_follow_config_order(self, small_cfg_raw):
        rep = run(ExperimentConfig.from_dict(small_cfg_raw))
        assert [c.condition for c in rep.conditions] == \
            ["VD+RVD", "polycon", "tail-integral"]
        assert rep.matrix is None and rep.refined is None

    def test_deterministic_canonical_bytes(self, small_cfg_raw):
        r1 = run(ExperimentConfig.from_dict(small_cfg_raw))
        r2 = run(ExperimentConfig.from_dict(small_cfg_raw))
        assert canonical_json(r1.canonical()) == canonical_json(r2.canonical())

    def test_threads_do_not_change_output(self, small_cfg_raw):
        cfg = ExperimentConfig.from_dict(small_cfg_raw)
        r1 = run(cfg, threads=1)
        r4 = run(cfg, threads=4)
        assert canonical_json(r1.canonical()) == canonical_json(r4.canonical())

    def test_meta_carries_engine_and_wall_times(self, small_cfg_raw):
        rep = run(ExperimentConfig.from_dict(small_cfg_raw))
        d = rep.to_dict()
        assert d["meta"]["engine"] in ("compiled", "pure-python")
        assert set(d["meta"]["wall_times"]) == \
            {"VD+RVD", "polycon", "tail-integral"}
        assert "wall_times" not in d["canonical"]

    def test_refine_reports_constant_ratios(self):
        cfg = ExperimentConfig.from_dict(raw16(check=[{"name": "tail"}]))
        rep = run(cfg, refine=True)
        ref = rep.refined
        assert ref["space"]["side"] == 32
        assert ref["space"]["radius_window"] == [1.0, 4.0]
        ratios = ref["constant_ratios"]["tail-integral"]
        assert ratios["c1"] > 0 and math.isfinite(ratios["c1"])
        assert len(ref["conditions"]) == 1

    def test_refine_rejects_custom_space(self):
        raw = raw16(check=[])
        raw["space"] = {"kind": "complete", "n": 4}
        with pytest.raises(InvalidSpecError):
            reporting._refined_space_spec(raw["space"])

    def test_suite_report_roundtrip(self, small_cfg_raw):
        rep = run(ExperimentConfig.from_dict(small_cfg_raw))
        back = SuiteReport.from_dict(rep.to_dict())
        assert canonical_json(back.canonical()) == \
            canonical_json(rep.canonical())
        assert back.meta["engine"] == rep.meta["engine"]

    def test_cache_round_trip_and_reuse(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HARNACKLAB_CACHE", str(tmp_path))
        raw = raw16(check=[{"name": "conservative"}])
        r1 = run(ExperimentConfig.from_dict(raw))
        files = list(tmp_path.glob("*.hkt"))
        assert len(files) == 1

        def boom(*a, **k):
            raise AssertionError("tensor recomputed despite cache")

        monkeypatch.setattr(reporting, "heat_kernel", boom)
        r2 = run(ExperimentConfig.from_dict(raw))
        assert canonical_json(r1.canonical()) == canonical_json(r2.canonical())
        assert list(tmp_path.glob("*.hkt")) == files


class TestRunSimulation:
    def test_matches_direct_estimate(self):
        raw = raw16(simulate={"mode": "exit-time", "x0": 0, "radius": 2.0,
                              "horizon": 1e6})
        cfg = ExperimentConfig.from_dict(raw)
        result = run_simulation(cfg, 500)
        body = result["canonical"]
        space = build_space(dict(raw["space"]))
        kernel = make_kernel(space, build_scale(dict(PHI1)),
                             {"kind": "stable-like"})
        mean, stderr = estimate(space, kernel, ("exit-time", 0, 2.0), 500, 0,
                                horizon=1e6)
        assert body["mean"] == mean
        assert body["stderr"] == stderr
        assert body["mode"] == "exit-time" and body["paths"] == 500
        assert set(result["meta"]) == {"engine", "wall_time", "timestamp"}

    def test_requires_simulate_table(self):
        with pytest.raises(InvalidSpecError, match="simulate"):
            run_simulation(ExperimentConfig.from_dict(raw16()), 500)

    def test_unknown_mode(self):
        cfg = ExperimentConfig.from_dict(raw16(simulate={"mode": "escape"}))
        with pytest.raises(InvalidSpecError, match="escape"):
            run_simulation(cfg, 500)


def _synthetic_report():
    conds = [
        ConditionReport(condition="tail", verdict="pass",
                        constants={"c1": 0.5, "n": 3, "ok": True},
                        witnesses=[{"x": 1}], grid={}),
        ConditionReport(condition="ujs", verdict="fail",
                        constants={"c": 2.0}, witnesses=[], grid={}),
    ]
    matrix = {
        "groups": {"uhk_ndl_ujs": {"verdict": "pass",
                                   "components": ["uhk", "ndl", "ujs"]}},
        "reports": {"uhk": {"verdict": "pass", "constants": {}},
                    "ndl": {"verdict": "pass", "constants": {}},
                    "ujs": {"verdict": "pass", "constants": {}},
                    "lhk": {"verdict": "pass", "constants": {}},
                    "phi": {"verdict": "pass", "constants": {}},
                    "j_bounds": {"verdict": "pass",
                                 "constants": {"verdict_j_ge": "pass"}}},
        "corollary": {"hk": True, "phi_and_j_ge": True, "consistent": True},
        "disagreements": [],
    }
    return SuiteReport(config={"space": {"kind": "torus"}, "scale": {},
                               "kernel": {}, "seed": 0},
                       conditions=conds, matrix=matrix)


class TestRenderers:
    def test_markdown_sections(self):
        md = render_markdown(_synthetic_report())
        assert md.startswith("# Condition report")
        assert "| tail | pass | c1=0.5, n=3, ok=True |" in md
        assert "## Equivalence matrix" in md
        assert "| uhk_ndl_ujs | pass | uhk=pass, ndl=pass, ujs=pass |" in md
        assert ("| corollary | hk=pass (uhk=pass, lhk=pass) "
                "| phi+j_ge=pass (phi=pass, j_ge=pass) |") in md
        assert "consistent: **True**" in md
        assert "disagreements:" not in md

    def test_markdown_lists_disagreements(self):
        rep = _synthetic_report()
        rep.matrix["corollary"]["consistent"] = False
        rep.matrix["disagreements"] = [{"groups": ["a", "b"]}]
        md = render_markdown(rep)
        assert "consistent: **False**" in md
        assert '- `{"groups":["a","b"]}`' in md

    def test_csv_rows_and_quoting(self):
        csv = render_csv(_synthetic_report())
        lines = csv.strip().split("\n")
        assert lines[0] == "condition,constant,value,witness"
        # one row per constant, constants sorted within each condition
        assert lines[1] == 'tail,c1,0.5,"{""x"":1}"'
        assert lines[2] == 'tail,n,3,"{""x"":1}"'
        assert lines[3] == 'tail,ok,true,"{""x"":1}"'
        assert lines[4] == "ujs,c,2.0,"
        assert len(lines) == 5

    def test_emit_all_formats(self, tmp_path):
        rep = _synthetic_report()
        paths = []
        for fmt in ("json", "csv", "md"):
            paths += emit(rep, fmt, out_dir=str(tmp_path))
        names = sorted(p.split("/")[-1] for p in paths)
        assert names == ["report.csv", "report.json", "report.md"]
        with open(tmp_path / "report.json") as fh:
            payload = json.load(fh)
        assert payload["canonical"] == rep.canonical()
        assert (tmp_path / "report.csv").read_text().startswith("condition,")
        assert (tmp_path / "report.md").read_text().startswith(
            "# Condition report")

    def test_emit_stem_and_unknown_format(self, tmp_path):
        rep = _synthetic_report()
        [p] = emit(rep, "json", out_dir=str(tmp_path), stem="foo")
        assert p.endswith("foo.json")
        with pytest.raises(InvalidSpecError, match="unknown format"):
            emit(rep, "yaml", out_dir=str(tmp_path))
