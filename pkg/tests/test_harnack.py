import numpy as np
import pytest

from harnacklab import (Cylinder, InsufficientScalesError, InvalidSpecError,
                        build_space, check_ehi, check_phi, equivalence_suite,
                        fit_holder, heat_kernel, make_kernel, solve_caloric,
                        solve_harmonic)

from conftest import PHI1


class TestCylinder:
    def test_windows(self):
        cyl = Cylinder(t0=1.0, x0=0, R=2.0)
        w = cyl.windows(PHI1)
        assert w["full"] == (1.0, 9.0)
        assert w["minus"] == (3.0, 5.0)
        assert w["plus"] == (7.0, 9.0)

    def test_constants_must_increase(self):
        with pytest.raises(InvalidSpecError):
            Cylinder(t0=0.0, x0=0, R=2.0, c=(1.0, 3.0, 2.0, 4.0))

    def test_shrink_factor_range(self):
        with pytest.raises(InvalidSpecError):
            Cylinder(t0=0.0, x0=0, R=2.0, C5=1.5)


class TestHarmonic:
    def test_constants_preserved(self, z16, stable16):
        D = z16.ball(0, 3.0)
        u = solve_harmonic(z16, stable16, D, np.full(16, 2.5))
        np.testing.assert_array_equal(u, np.full(16, 2.5))

    def test_maximum_principle(self, z16, stable16):
        rng = np.random.default_rng(0)
        D = z16.ball(0, 3.0)
        for _ in range(10):
            g = rng.normal(size=16)
            u = solve_harmonic(z16, stable16, D, g)
            E = z16.complement(D)
            assert u.min() >= g[E].min()
            assert u.max() <= g[E].max()

    def test_linearity(self, z16, stable16):
        rng = np.random.default_rng(1)
        D = z16.ball(0, 3.0)
        f = rng.normal(size=16)
        g = rng.normal(size=16)
        lhs = solve_harmonic(z16, stable16, D, 2.0 * f - 3.0 * g)
        rhs = 2.0 * solve_harmonic(z16, stable16, D, f) \
            - 3.0 * solve_harmonic(z16, stable16, D, g)
        np.testing.assert_allclose(lhs[D], rhs[D], atol=1e-10)

    def test_jump_balance_residual(self, z16, stable16):
        rng = np.random.default_rng(2)
        D = z16.ball(0, 3.0)
        g = rng.normal(size=16)
        u = solve_harmonic(z16, stable16, D, g)
        resid = stable16.J @ (z16.mu * u) - stable16.lam * u
        assert np.abs(resid[D]).max() <= 1e-10 * max(1.0, np.abs(u).max())

    def test_domain_validation(self, z16, stable16):
        with pytest.raises(InvalidSpecError):
            solve_harmonic(z16, stable16, np.arange(16), np.zeros(16))
        with pytest.raises(InvalidSpecError):
            solve_harmonic(z16, stable16, np.array([], dtype=int),
                           np.zeros(16))


class TestCaloric:
    def test_constant_data_stays_constant(self, z16, stable16):
        cyl = Cylinder(t0=0.0, x0=0, R=3.0)
        fld = solve_caloric(z16, stable16, cyl, np.ones(16), np.ones(16),
                            PHI1)
        assert np.abs(fld.values - 1.0).max() <= 1e-12

    def test_reproduces_dirichlet_column(self, z16, stable16):
        # point mass initial data, zero exterior: the field must match the
        # ball-killed transition column at the final time
        cyl = Cylinder(t0=0.0, x0=0, R=3.0)
        z = 1
        init = np.zeros(16)
        init[z] = 1.0 / z16.mu[z]
        fld = solve_caloric(z16, stable16, cyl, init, np.zeros(16), PHI1)
        TB = heat_kernel(z16, stable16, [float(fld.times[-1])],
                         domain=(0, 3.0))
        col = np.zeros(16)
        zi = int(np.nonzero(TB.indices == z)[0][0])
        col[TB.indices] = TB.values[0][:, zi]
        rel = np.abs(fld.values[-1] - col).max() / col.max()
        assert rel <= 1e-6

    def test_field_metadata(self, z16, stable16):
        cyl = Cylinder(t0=0.0, x0=0, R=3.0)
        fld = solve_caloric(z16, stable16, cyl, np.ones(16), np.ones(16),
                            PHI1)
        assert fld.provenance == "exterior-value-problem"
        assert fld.cylinder is cyl
        assert fld.times[0] == 0.0
        assert fld.times[-1] == pytest.approx(4.0 * 3.0, rel=1e-12)

    def test_ball_must_be_proper(self, z16, stable16):
        cyl = Cylinder(t0=0.0, x0=0, R=8.0)
        with pytest.raises(InvalidSpecError):
            solve_caloric(z16, stable16, cyl, np.ones(16), np.ones(16), PHI1)


class TestPHI:
    def test_stable_1d(self, z64, stable64):
        rep = check_phi(z64, PHI1, stable64, seed=0)
        assert rep.verdict == "pass"
        assert rep.constants["C6"] == pytest.approx(4.7095, rel=1e-4)
        assert rep.constants["C6(2)"] == pytest.approx(4.7095, rel=1e-4)
        assert rep.constants["C6(4)"] == pytest.approx(3.31988, rel=1e-4)
        assert rep.constants["C6(8)"] == pytest.approx(2.20762, rel=1e-4)
        assert rep.constants["C6"] >= 1.0

    def test_arithmetic_window_shape(self, z64, stable64):
        rep = check_phi(z64, PHI1, stable64,
                        constants=(0.5, 1.0, 1.5, 2.0), seed=0)
        assert rep.verdict == "pass"
        assert rep.constants["C6"] == pytest.approx(6.11939, rel=1e-4)


class TestEHI:
    def test_stable_1d(self, z64, stable64):
        rep = check_ehi(z64, PHI1, stable64, seed=0)
        assert rep.verdict == "pass"
        assert rep.constants["c"] == pytest.approx(2.28005, rel=1e-4)
        assert rep.constants["growth_factor"] == pytest.approx(1.21703,
                                                               rel=1e-4)

    def test_sector_flagged(self, cone48):
        space, _ = cone48
        ker = make_kernel(space, PHI1, {"kind": "sector"})
        rep = check_ehi(space, PHI1, ker, seed=0)
        assert rep.verdict == "flagged"
        assert rep.constants["growth_factor"] == pytest.approx(56.28103,
                                                               rel=1e-3)
        assert rep.constants["c(4)"] == pytest.approx(4775.08325, rel=1e-3)


class TestHolderFit:
    def test_elliptic_stable_1d(self, z64, stable64):
        rep = fit_holder(z64, PHI1, stable64, mode="EHR", seed=0)
        assert rep.verdict == "pass"
        assert rep.constants["theta"] == pytest.approx(1.0, rel=1e-6)
        assert rep.constants["c"] == pytest.approx(0.000825598, rel=1e-3)

    def test_parabolic_stable_1d(self, z64, stable64):
        rep = fit_holder(z64, PHI1, stable64, mode="PHR", seed=0)
        assert rep.verdict == "pass"
        assert rep.constants["theta"] == pytest.approx(1.0, rel=1e-6)

    def test_exponent_clamped_to_one(self, z32, stable32):
        rep = fit_holder(z32, PHI1, stable32, mode="EHR", seed=0)
        assert 0.0 < rep.constants["theta"] <= 1.0
        assert rep.constants["theta"] == pytest.approx(0.96292, rel=1e-4)

    def test_axis_positive_exponent(self, axis12):
        space, kernel = axis12
        rep = fit_holder(space, PHI1, kernel, mode="EHR", seed=0)
        assert rep.constants["theta"] == pytest.approx(0.66878, rel=1e-4)
        assert rep.constants["theta"] > 0.0

    def test_narrow_window_rejected(self):
        sp = build_space("torus", d=1, side=16, radius_window=(1.0, 1.2))
        ker = make_kernel(sp, PHI1, {"kind": "stable-like"})
        with pytest.raises(InsufficientScalesError):
            fit_holder(sp, PHI1, ker, mode="EHR", seed=0)

    def test_unknown_mode(self, z32, stable32):
        with pytest.raises(InvalidSpecError):
            fit_holder(z32, PHI1, stable32, mode="XHR", seed=0)


class TestEquivalenceSuite:
    def test_stable_all_groups_pass(self, z64, stable64):
        mat = equivalence_suite(z64, PHI1, stable64, {"seed": 0})
        assert all(g["verdict"] == "pass" for g in mat.groups.values())
        assert mat.consistent is True
        assert mat.disagreements == []
        assert mat.corollary["hk"] is True
        assert mat.corollary["phi_and_j_ge"] is True
        assert mat.corollary["consistent"] is True
        assert set(mat.reports) == {
            "ujs", "j_bounds", "pi", "csj", "uhk", "lhk", "ndl", "ephi",
            "phr", "ehr", "phi", "phi_plus"}

    def test_axis_disagreement_signature(self, axis12):
        # a kernel violating the jump-comparability condition must split
        # the groups: the Harnack side passes while every group that
        # carries the violated condition fails
        space, kernel = axis12
        mat = equivalence_suite(space, PHI1, kernel, {"seed": 0})
        assert mat.groups["phi"]["verdict"] == "pass"
        assert mat.groups["phi_plus"]["verdict"] == "pass"
        for name in ("uhk_ndl_ujs", "ndl_ujs", "phr_ephi_ujs",
                     "ehr_ephi_ujs", "pi_jle_csj_ujs"):
            assert mat.groups[name]["verdict"] == "fail"
        assert mat.consistent is False
        assert len(mat.disagreements) == 8
        assert mat.corollary["hk"] is True
        assert mat.corollary["phi_and_j_ge"] is False
        assert mat.corollary["consistent"] is False
        assert mat.reports["pi"].constants["C"] == pytest.approx(
            0.10629, rel=1e-4)
        assert mat.reports["lhk"].constants["c1"] == pytest.approx(
            0.01575, rel=1e-3)

    def test_to_dict_shape(self, z64, stable64):
        mat = equivalence_suite(z64, PHI1, stable64, {"seed": 0})
        d = mat.to_dict()
        assert set(d) == {"groups", "corollary", "consistent",
                          "disagreements", "reports"}
        assert d["reports"]["phi"]["verdict"] == "pass"
