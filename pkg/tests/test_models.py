from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wkam.errors import ConfigError
from wkam.models import (ConformalFactorModel, DissipativeStandardFamily, conformal_residuals, default_family,
                         numeric_jacobian_check, sample_points, standard_J, verify_conformal)
from wkam.cohomology import GOLDEN_MEAN

MU = np.array([0.1])


@pytest.fixture
def coupled():
    return default_family({"eps_c": 0.05, "eps": 0.01})


@pytest.fixture
def points():
    return sample_points(default_family(), 100, np.random.default_rng(0))


@dataclass(frozen=True)
class CorruptedJacobian(DissipativeStandardFamily):
    def jacobian(self, mu, eps, x):
        out = super().jacobian(mu, eps, x).copy()
        out[..., 2, 0] += 1e-3
        return out


class TestDefaultFamily:
    def test_closed_form_torus(self):
        f = default_family()
        th = np.linspace(0, 1, 17)
        K = np.stack([th, 0 * th, GOLDEN_MEAN + 0 * th, 0 * th], -1)
        image = f.apply([(1 - 0.9) * GOLDEN_MEAN], 0.0, K)
        assert np.max(np.abs(image - (K + [GOLDEN_MEAN, 0, 0, 0]))) < 1e-15

    def test_hyperbolic_factor_block(self):
        f = default_family()
        Df = f.jacobian(MU, 0.0, np.zeros(4))
        block = Df[np.ix_([1, 3], [1, 3])]
        assert np.allclose(block, [[1 + 1.5, 0.9], [1.5, 0.9]])
        assert np.linalg.det(block) == pytest.approx(0.9)

    def test_hyperbolic_eigenvalues(self):
        # quadratic formula on trace 3.4, det 0.9
        disc = np.sqrt(3.4**2 - 4 * 0.9)
        lo, hi = (3.4 - disc) / 2, (3.4 + disc) / 2
        ev = np.sort(np.linalg.eigvals([[2.5, 0.9], [1.5, 0.9]]).real)
        assert ev == pytest.approx([lo, hi], rel=1e-14)
        assert hi == pytest.approx(3.1107, abs=1e-4) and lo == pytest.approx(0.2894, abs=1e-4)
        assert lo * hi == pytest.approx(0.9)

    def test_parameter_validation(self):
        with pytest.raises(ConfigError):
            default_family({"lam": 1.2})
        with pytest.raises(ConfigError):
            default_family({"c": -1.0})
        with pytest.raises(ConfigError):
            default_family({"alpha": -1.0})

    def test_at_changes_only_eps(self, coupled):
        g = coupled.at(0.3)
        assert g.eps == 0.3 and g.eps_c == coupled.eps_c and g.c == coupled.c


class TestConformality:
    def test_random_points(self, coupled, points):
        assert verify_conformal(coupled, MU, coupled.eps, points) <= 1e-11

    def test_linear_limit(self):
        f = default_family({"c": 1e-300, "eps": 0.0, "eps_c": 0.0})
        pts = sample_points(f, 20, np.random.default_rng(1))
        assert verify_conformal(f, [0.0], 0.0, pts) <= 1e-14

    def test_corrupted_jacobian_detected(self, points):
        f = CorruptedJacobian(0.9, 1.5, 0.05, 0.01)
        assert verify_conformal(f, MU, f.eps, points) >= 1e-4

    def test_wrong_factor_detected(self, coupled, points):
        assert verify_conformal(coupled, MU, coupled.eps, points, lam=0.91) > 1e-3

    def test_per_sample_residuals(self, coupled, points):
        res = conformal_residuals(coupled, MU, coupled.eps, points)
        assert res.shape == (100,)

    def test_empty_samples_rejected(self, coupled):
        with pytest.raises(ValueError):
            verify_conformal(coupled, MU, 0.0, np.zeros((0, 4)))

    def test_standard_form_antisymmetric(self):
        J = standard_J(2)
        assert np.array_equal(J.T, -J)


class TestDerivatives:
    def test_finite_differences(self, coupled, points):
        assert max(numeric_jacobian_check(coupled, MU, coupled.eps, p, 1e-6) for p in points[:20]) <= 1e-8

    def test_linear_family_exact(self):
        f = default_family({"c": 1e-300})
        for h in (1e-8, 1e-6, 1e-4):
            assert numeric_jacobian_check(f, MU, 0.0, np.array([0.1, 0.2, 0.3, -0.4]), h) <= 1e-12 / h

    def test_eps_derivative_at_zero(self, coupled):
        x = np.array([0.3, 0.7, 0.2, -0.1])
        h = 1e-6
        fd = (coupled.apply(MU, h, x) - coupled.apply(MU, -h, x)) / (2 * h)
        assert np.max(np.abs(fd - coupled.eps_derivative(MU, 0.0, x))) < 1e-8

    def test_step_range(self, coupled):
        with pytest.raises(ValueError):
            numeric_jacobian_check(coupled, MU, 0.0, np.zeros(4), 1e-2)

    def test_mu_derivative_constant(self, coupled, points):
        a = coupled.mu_derivative([0.0], 0.01, points)
        b = coupled.mu_derivative([5.0], 0.01, points)
        assert np.array_equal(a, b)


class TestConformalFactor:
    def test_value_at_zero(self):
        assert ConformalFactorModel(-1.0, 5).lambda_of_eps(0.0) == 1.0

    def test_leading_order(self):
        m = ConformalFactorModel(-1.0, 5)
        for e in (1e-2, 1e-3):
            assert abs(m.lambda_of_eps(e) - 1 - (-1.0) * e**5) <= 1e-15

    def test_family_with_factor_is_conformal(self):
        f = default_family({"alpha": -1.0, "a": 3, "eps": 0.2})
        pts = sample_points(f, 30, np.random.default_rng(2))
        assert verify_conformal(f, MU, 0.2, pts) <= 1e-11
        assert numeric_jacobian_check(f, MU, 0.2, pts[0]) <= 1e-8

    def test_invalid(self):
        with pytest.raises(ValueError):
            ConformalFactorModel(-1.0, 0)
        with pytest.raises(ValueError):
            ConformalFactorModel(0.0, 3)


coords = st.floats(-3, 3, allow_nan=False)


@given(coords, coords, coords, coords, st.floats(-0.1, 0.1))
def test_determinant_is_lambda_squared(x, y, p, q, eps):
    f = default_family({"eps_c": 0.05})
    assert np.linalg.det(f.jacobian(MU, eps, np.array([x, y, p, q]))) == pytest.approx(0.81, abs=1e-10)


@given(coords, coords, coords, coords, st.integers(-3, 3), st.integers(-3, 3))
def test_periodic_in_angles(x, y, p, q, m, n):
    f = default_family({"eps_c": 0.05, "eps": 0.01})
    pt = np.array([x, y, p, q])
    shift = np.array([m, n, 0, 0], dtype=float)
    assert np.allclose(f.apply(MU, 0.01, pt + shift), f.apply(MU, 0.01, pt) + shift, atol=1e-12)
