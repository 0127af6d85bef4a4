import numpy as np
import pytest

from harnacklab import (CapExceededError, InvalidSpecError, check_conservative,
                        check_ephi, check_hk, check_ndl, default_time_grid,
                        exit_time_green, heat_column, heat_kernel, hk_profile,
                        load_tensor, save_tensor)
from harnacklab.heat import _stepped_exponential, _sym_generator

from conftest import PHI1


@pytest.fixture(scope="module")
def tensor32(z32, stable32):
    grid = default_time_grid(PHI1, 4.0, levels=6)
    return heat_kernel(z32, stable32, grid)


@pytest.fixture(scope="module")
def tensor64(z64, stable64):
    grid = default_time_grid(PHI1, 8.0)
    return heat_kernel(z64, stable64, grid)


class TestClosedForms:
    def test_two_state_density(self, two_state):
        space, kernel = two_state
        times = [0.25, 0.5, 1.0, 2.0]
        T = heat_kernel(space, kernel, times)
        for k, t in enumerate(times):
            off = (1.0 - np.exp(-2.0 * t)) / 2.0
            on = (1.0 + np.exp(-2.0 * t)) / 2.0
            assert T.values[k][0, 1] == pytest.approx(off, abs=1e-12)
            assert T.values[k][0, 0] == pytest.approx(on, abs=1e-12)

    def test_time_zero_identity(self, z16, stable16):
        T = heat_kernel(z16, stable16, [0.0])
        np.testing.assert_array_equal(T.values[0], np.diag(1.0 / z16.mu))


class TestAxioms:
    def test_symmetry(self, tensor32):
        for k in range(tensor32.times.size):
            P = tensor32.values[k]
            assert np.abs(P - P.T).max() <= 1e-8 * np.abs(P).max()

    def test_chapman_kolmogorov(self, z32, tensor32):
        # consecutive dyadic times double, so p(2t) = p(t) mu p(t)
        for k in range(tensor32.times.size - 1):
            assert tensor32.times[k + 1] == pytest.approx(
                2.0 * tensor32.times[k], rel=1e-12)
            P = tensor32.values[k]
            composed = (P * z32.mu[None, :]) @ P
            err = np.abs(composed - tensor32.values[k + 1]).max()
            assert err <= 1e-8 * np.abs(tensor32.values[k + 1]).max()

    def test_conservative(self, tensor32):
        rep = check_conservative(tensor32)
        assert rep.verdict == "pass"
        assert rep.constants["max_mass_defect"] <= 1e-12

    def test_conservative_rejects_ball_tensor(self, z32, stable32):
        TB = heat_kernel(z32, stable32, [1.0], domain=(0, 4.0))
        with pytest.raises(InvalidSpecError):
            check_conservative(TB)

    def test_mass_method(self, tensor32):
        for k in range(tensor32.times.size):
            np.testing.assert_allclose(tensor32.mass(k), 1.0, atol=1e-10)

    def test_positivity(self, tensor32):
        assert tensor32.values.min() >= -1e-12

    def test_time_validation(self, z16, stable16):
        with pytest.raises(InvalidSpecError):
            heat_kernel(z16, stable16, [-1.0])
        with pytest.raises(InvalidSpecError):
            heat_kernel(z16, stable16, [2.0, 1.0])


class TestDirichlet:
    def test_dominated_by_global(self, z32, stable32):
        t = 1.0
        ball = (0, 4.0)
        TB = heat_kernel(z32, stable32, [t], domain=ball)
        TG = heat_kernel(z32, stable32, [t])
        idx = TB.indices
        sub = TG.values[0][np.ix_(idx, idx)]
        assert np.all(TB.values[0] <= sub + 1e-12)

    def test_mass_strictly_below_one(self, z32, stable32):
        TB = heat_kernel(z32, stable32, [1.0], domain=(0, 4.0))
        assert TB.mass(0).max() < 1.0

    def test_domain_must_be_proper(self, z16, stable16):
        with pytest.raises(InvalidSpecError):
            heat_kernel(z16, stable16, [1.0], domain=(0, 8.0))


class TestStepping:
    def test_matches_eigendecomposition(self, z32, stable32):
        A, _, mu = _sym_generator(z32, stable32)
        root = np.sqrt(np.outer(mu, mu))
        stepped = _stepped_exponential(A, 2.0) / root
        eig = heat_kernel(z32, stable32, [2.0]).values[0]
        assert np.abs(stepped - eig).max() <= 1e-6 * eig.max()

    def test_public_method_switch(self, z16, stable16):
        a = heat_kernel(z16, stable16, [0.5], method="stepping").values[0]
        b = heat_kernel(z16, stable16, [0.5], method="eig").values[0]
        assert np.abs(a - b).max() <= 1e-6 * b.max()

    def test_cap(self, z16, stable16):
        with pytest.raises(CapExceededError):
            heat_kernel(z16, stable16, [1.0], cap=8)


class TestColumns:
    def test_column_matches_tensor(self, z32, stable32, tensor32):
        t = float(tensor32.times[2])
        col = heat_column(z32, stable32, t, 5)
        np.testing.assert_allclose(col, tensor32.values[2][:, 5], rtol=1e-10)


class TestCacheFile:
    def test_roundtrip(self, z32, stable32, tensor32, tmp_path):
        path = str(tmp_path / "t.hkt")
        save_tensor(path, tensor32)
        back = load_tensor(path, z32)
        assert back.times.tobytes() == tensor32.times.tobytes()
        assert back.values.tobytes() == tensor32.values.tobytes()

    def test_rejects_bad_magic(self, z32, tmp_path):
        path = tmp_path / "bad.hkt"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(InvalidSpecError):
            load_tensor(str(path), z32)

    def test_rejects_wrong_space(self, z16, z32, stable32, tensor32, tmp_path):
        path = str(tmp_path / "t.hkt")
        save_tensor(path, tensor32)
        with pytest.raises(InvalidSpecError):
            load_tensor(path, z16)


class TestHKBounds:
    def test_upper(self, z64, stable64, tensor64):
        rep = check_hk(z64, PHI1, stable64, tensor64, "upper")
        assert rep.verdict == "pass"
        assert rep.constants["c2"] == pytest.approx(1.48356, rel=1e-4)
        assert rep.constants["c2_subgrid"] == pytest.approx(1.38178, rel=1e-4)

    def test_lower(self, z64, stable64, tensor64):
        rep = check_hk(z64, PHI1, stable64, tensor64, "lower")
        assert rep.verdict == "pass"
        assert rep.constants["c1"] == pytest.approx(0.354923, rel=1e-4)
        assert rep.constants["c1_subgrid"] == pytest.approx(0.356378, rel=1e-4)

    def test_diag_upper(self, z64, stable64, tensor64):
        rep = check_hk(z64, PHI1, stable64, tensor64, "diag-upper")
        assert rep.verdict == "pass"
        assert rep.constants["c2"] == pytest.approx(1.04211, rel=1e-4)

    def test_unknown_mode(self, z64, stable64, tensor64):
        with pytest.raises(InvalidSpecError):
            check_hk(z64, PHI1, stable64, tensor64, "sideways")

    def test_profile_positive(self, z64):
        prof = hk_profile(z64, PHI1, 1.0)
        assert np.all(np.isfinite(prof)) and np.all(prof > 0)


class TestNDL:
    def test_stable(self, z64, stable64):
        rep = check_ndl(z64, PHI1, stable64, seed=0)
        assert rep.verdict == "pass"
        assert rep.constants["c1"] == pytest.approx(0.336404, rel=1e-4)
        assert rep.constants["eps"] == 0.5

    def test_axis_fails(self, axis12):
        space, kernel = axis12
        rep = check_ndl(space, PHI1, kernel, seed=0)
        assert rep.verdict == "fail"
        assert rep.constants["c1"] is None


class TestExitTime:
    def test_singleton_closed_form(self, z16, stable16):
        u = exit_time_green(z16, stable16, (0, 0.5))
        assert u[0] == pytest.approx(1.0 / stable16.lam[0], rel=1e-12)
        assert np.all(u[1:] == 0.0)

    def test_positive_inside_zero_outside(self, z64, stable64):
        u = exit_time_green(z64, stable64, (3, 4.0))
        B = z64.ball(3, 4.0)
        assert np.all(u[B] > 0)
        outside = np.setdiff1d(np.arange(z64.n), B)
        assert np.all(u[outside] == 0.0)

    def test_monotone_in_radius(self, z64, stable64):
        u2 = exit_time_green(z64, stable64, (0, 2.0))[0]
        u4 = exit_time_green(z64, stable64, (0, 4.0))[0]
        assert u4 > u2

    def test_full_domain_rejected(self, z16, stable16):
        with pytest.raises(InvalidSpecError):
            exit_time_green(z16, stable16, (0, 8.0))


class TestEPhi:
    def test_stable(self, z64, stable64):
        rep = check_ephi(z64, PHI1, stable64, seed=0)
        assert rep.verdict == "pass"
        assert rep.constants["c"] == pytest.approx(1.61821, rel=1e-4)
        assert rep.constants["c"] >= 1.0


class TestTimeGrid:
    def test_dyadic_structure(self):
        grid = default_time_grid(PHI1, 8.0, levels=6)
        assert grid.size == 6
        assert grid[-1] == pytest.approx(8.0, rel=1e-12)
        np.testing.assert_allclose(grid[1:] / grid[:-1], 2.0, rtol=1e-12)
