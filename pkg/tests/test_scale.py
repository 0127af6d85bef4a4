import numpy as np
import pytest

from harnacklab import (InvalidSpecError, ScaleFunction, build_scale,
                        check_polycon)


class TestPower:
    def test_values(self):
        phi = build_scale({"family": "power", "alpha": 1.5})
        assert phi(0.0) == 0.0
        assert phi(1.0) == 1.0
        assert phi(4.0) == pytest.approx(8.0, rel=1e-15)

    def test_exponent_must_be_positive(self):
        for alpha in (0.0, -1.0):
            with pytest.raises(InvalidSpecError):
                build_scale({"family": "power", "alpha": alpha})

    def test_regularity_exponents(self):
        phi = build_scale({"family": "power", "alpha": 0.7})
        assert phi.beta1 == phi.beta2 == 0.7

    def test_inverse_roundtrip(self):
        phi = build_scale({"family": "power", "alpha": 1.3})
        r = np.array([0.25, 1.0, 3.7, 16.0])
        np.testing.assert_allclose(phi.inv(phi(r)), r, rtol=1e-14)

    def test_negative_argument(self):
        phi = build_scale({"family": "power", "alpha": 1.0})
        with pytest.raises(InvalidSpecError):
            phi(-1.0)
        with pytest.raises(InvalidSpecError):
            phi.inv(-1.0)


class TestMixed:
    def spec(self):
        return {"family": "mixed", "atoms": [[0.5, 0.5], [1.5, 0.5]]}

    def test_harmonic_mean_shape(self):
        phi = build_scale(self.spec())
        # at r=1 every atom contributes its weight, so phi(1) = 1
        assert phi(1.0) == pytest.approx(1.0, rel=1e-15)
        r = 4.0
        expect = 1.0 / (0.5 * r ** -0.5 + 0.5 * r ** -1.5)
        assert phi(r) == pytest.approx(expect, rel=1e-14)

    def test_monotone(self):
        phi = build_scale(self.spec())
        r = np.linspace(0.1, 20.0, 200)
        assert np.all(np.diff(phi(r)) > 0)

    def test_inverse_by_bisection(self):
        phi = build_scale(self.spec())
        r = np.array([0.3, 1.0, 2.0, 9.0])
        np.testing.assert_allclose(phi.inv(phi(r)), r, rtol=1e-10)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidSpecError):
            build_scale({"family": "mixed", "atoms": [[0.5, 0.4], [1.5, 0.5]]})

    def test_exponents_must_lie_in_range(self):
        with pytest.raises(InvalidSpecError):
            build_scale({"family": "mixed", "atoms": [[2.5, 1.0]]})

    def test_regularity_exponents(self):
        phi = build_scale(self.spec())
        assert phi.beta1 == 0.5
        assert phi.beta2 == 1.5


class TestPiecewise:
    def test_continuity_at_knot(self):
        phi = build_scale({"family": "piecewise", "alphas": [0.5, 1.5]})
        assert phi(1.0) == 1.0
        assert phi(0.25) == pytest.approx(0.5, rel=1e-15)
        assert phi(4.0) == pytest.approx(8.0, rel=1e-15)

    def test_inverse_roundtrip(self):
        phi = build_scale({"family": "piecewise", "alphas": [0.5, 1.5]})
        r = np.array([0.1, 0.9, 1.0, 1.1, 7.0])
        np.testing.assert_allclose(phi.inv(phi(r)), r, rtol=1e-14)

    def test_explicit_keys(self):
        phi = ScaleFunction("piecewise", alpha_low=0.6, alpha_high=1.2)
        assert phi.beta1 == 0.6
        assert phi.beta2 == 1.2


class TestBuildScale:
    def test_passthrough(self):
        phi = ScaleFunction("power", alpha=1.0)
        assert build_scale(phi) is phi

    def test_unknown_family(self):
        with pytest.raises(InvalidSpecError):
            build_scale({"family": "exponential", "alpha": 1.0})

    def test_to_dict_roundtrip(self):
        for spec in ({"family": "power", "alpha": 1.2},
                     {"family": "mixed", "atoms": [[0.5, 0.5], [1.5, 0.5]]},
                     {"family": "piecewise", "alphas": [0.5, 1.5]}):
            phi = build_scale(spec)
            clone = build_scale(phi.to_dict())
            r = np.array([0.3, 1.0, 2.7])
            np.testing.assert_array_equal(phi(r), clone(r))


class TestPolycon:
    def test_power_is_exactly_polynomial(self):
        rep = check_polycon({"family": "power", "alpha": 1.0}, (1.0, 8.0))
        assert rep.verdict == "pass"
        assert rep.beta1 == pytest.approx(1.0, rel=1e-12)
        assert rep.beta2 == pytest.approx(1.0, rel=1e-12)
        assert rep.c1 == pytest.approx(1.0, rel=1e-12)
        assert rep.c2 == pytest.approx(1.0, rel=1e-12)

    def test_mixed_two_sided_control(self):
        rep = check_polycon(
            {"family": "mixed", "atoms": [[0.5, 0.5], [1.5, 0.5]]},
            (1.0, 8.0))
        assert rep.verdict == "pass"
        assert 0.5 - 1e-9 <= rep.beta1 <= rep.beta2 <= 1.5 + 1e-9

    def test_sandwich_property_on_grid(self):
        # the fitted envelopes must sandwich phi(R)/phi(r) on grid pairs
        phi = build_scale({"family": "mixed",
                           "atoms": [[0.7, 0.3], [1.4, 0.7]]})
        rep = check_polycon(phi, (1.0, 8.0))
        radii = rep.grid["radii"]
        for a in range(len(radii)):
            for b in range(a + 1, len(radii)):
                r, R = radii[a], radii[b]
                ratio = phi(R) / phi(r)
                q = R / r
                assert ratio >= rep.c1 * q ** rep.beta1 * (1 - 1e-9)
                assert ratio <= rep.c2 * q ** rep.beta2 * (1 + 1e-9)

    def test_to_dict(self):
        d = check_polycon({"family": "power", "alpha": 1.0}, (1.0, 8.0)).to_dict()
        assert d["condition"] == "polycon"
        assert d["verdict"] == "pass"
