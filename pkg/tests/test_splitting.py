import numpy as np
import pytest

from conftest import K_MAX
from wkam.cohomology import GOLDEN_MEAN
from wkam.errors import NoContraction
from wkam.fourier import FourierSeries
from wkam.kam import seed_solution, torus_cocycle
from wkam.models import default_family
from wkam.splitting import (RateEstimate, Splitting, check_hypotheses, close_splitting, estimate_rates,
                            hyperbolic_multipliers, invariance_defect, product_splitting, splitting_distance)

A_S, A_U = hyperbolic_multipliers(1.5, 0.9)


def coupled_setup(eps):
    f = default_family({"eps": eps})
    seed = seed_solution(f.uncoupled(), GOLDEN_MEAN, K_MAX)
    return torus_cocycle(f, seed), product_splitting(f.uncoupled(), K_MAX, GOLDEN_MEAN)


@pytest.fixture(scope="module")
def exact():
    f = default_family()
    seed = seed_solution(f, GOLDEN_MEAN, K_MAX)
    return torus_cocycle(f, seed), product_splitting(f, K_MAX, GOLDEN_MEAN)


@pytest.fixture(scope="module")
def closed_1e3():
    cocycle, E0 = coupled_setup(1e-3)
    return cocycle, E0, close_splitting(cocycle, E0, tol=1e-12)


class TestProductSplitting:
    def test_unstable_direction(self, exact):
        _, E = exact
        v = E.bases["u"][0, :, 0]
        assert v[0] == 0 and v[2] == 0
        assert v[3] / v[1] == pytest.approx((3.1107 - 2.5) / 0.9, abs=2e-4)
        assert v[3] / v[1] == pytest.approx((A_U - 2.5) / 0.9, rel=1e-14)

    def test_center_is_x_p_plane(self, exact):
        _, E = exact
        C = E.bases["c"][0]
        assert np.allclose(C[[1, 3]], 0) and np.linalg.matrix_rank(C[[0, 2]]) == 2

    def test_projections_sum_to_identity(self, exact):
        _, E = exact
        assert E.projection_identity_defect() < 1e-14

    def test_exactly_invariant(self, exact):
        cocycle, E = exact
        assert invariance_defect(cocycle, E) < 1e-12

    def test_rejects_coupled_family(self):
        with pytest.raises(ValueError):
            product_splitting(default_family({"eps": 1e-3}), 8, GOLDEN_MEAN)

    def test_dimension_count(self, exact):
        _, E = exact
        assert E.dims == (1, 2, 1) and E.dim == 4


class TestCocycle:
    def test_cocycle_property(self, closed_1e3):
        cocycle = closed_1e3[0]
        for j in range(1, 4):
            for m in range(1, 7 - j):
                assert cocycle.property_defect(j, m) < 1e-10


class TestDefect:
    def test_linear_in_coupling(self):
        d1 = invariance_defect(*coupled_setup(1e-3))
        d2 = invariance_defect(*coupled_setup(2e-3))
        assert 1e-5 < d1 < 1e-1
        assert d2 / d1 == pytest.approx(2.0, abs=0.2)

    def test_mixed_direction_not_invariant(self, exact):
        # the "stable" line tilted halfway toward the unstable eigenline
        cocycle, E = exact
        Q = E.reference.eval_grid(real=True)[0].copy()
        Q[:, 0] = (Q[:, 0] + Q[:, 3]) / np.linalg.norm(Q[:, 0] + Q[:, 3])
        tilted = Splitting.from_reference(FourierSeries.constant(Q, K_MAX), E.dims, E.omega)
        assert invariance_defect(cocycle, tilted) >= 0.1

    def test_swapped_labels_fail_trichotomy(self, exact):
        cocycle, E = exact
        Q = E.reference.eval_grid(real=True)[0][:, [3, 1, 2, 0]]
        swapped = Splitting.from_reference(FourierSeries.constant(Q, K_MAX), E.dims, E.omega)
        rates = estimate_rates(cocycle, swapped)
        assert rates.lambda_plus < 1 < rates.lambda_minus
        assert not check_hypotheses(rates, 0.9).conditions["H3"]


class TestClosing:
    def test_exact_splitting_is_fixed_point(self, exact):
        cocycle, E = exact
        out = close_splitting(cocycle, E)
        assert out.info["sweeps"] == 0
        assert splitting_distance(out, E) == 0.0

    def test_closes_coupled_cocycle(self, closed_1e3):
        cocycle, E0, E = closed_1e3
        assert E.info["sweeps"] <= 30
        # independent recomputation of the defect
        assert invariance_defect(cocycle, E) <= 1e-12
        assert splitting_distance(E0, E) <= 10 * E.info["initial_defect"]

    def test_idempotent(self, closed_1e3):
        cocycle, _, E = closed_1e3
        again = close_splitting(cocycle, E, tol=1e-12)
        for name in E.graphs:
            assert np.max(np.abs(again.graphs[name].coeffs - E.graphs[name].coeffs)) <= 1e-12

    def test_local_uniqueness(self, closed_1e3):
        cocycle, E0, E = closed_1e3
        rng = np.random.default_rng(0)
        perturbed = {}
        for name, g in E.graphs.items():
            noise = 1e-4 * (rng.standard_normal(g.coeffs.shape) + 1j * rng.standard_normal(g.coeffs.shape))
            noise[K_MAX + 6:] = 0
            noise[:K_MAX - 5] = 0
            perturbed[name] = (g + FourierSeries(noise)).real_part()
        E1 = close_splitting(cocycle, E.with_graphs(perturbed), tol=1e-12)
        assert splitting_distance(E1, E) <= 1e-3

    def test_projections_identity(self, closed_1e3):
        E = closed_1e3[2]
        assert E.projection_identity_defect() <= 1e-11
        assert all(np.isfinite(v) for v in E.projection_norms.values())

    def test_invariant_bundles(self, closed_1e3):
        cocycle, _, E = closed_1e3
        P1 = E.projections_at(1)
        for s, base in E.bases.items():
            img = cocycle.grid @ base
            for t in P1:
                if t != s:
                    assert np.max(np.abs(P1[t] @ img)) <= 1e-11

    def test_no_contraction_on_large_defect(self):
        cocycle, E0 = coupled_setup(5.0)
        with pytest.raises(NoContraction):
            close_splitting(cocycle, E0)


class TestRates:
    def test_hyperbolic_rates(self, exact):
        r = estimate_rates(*exact)
        assert r.lambda_plus == pytest.approx(3.1107, rel=1e-2)
        assert r.lambda_minus == pytest.approx(0.2894, rel=1e-2)

    def test_center_bracket(self, exact):
        r = estimate_rates(*exact)
        assert 0.9 - 1e-9 <= r.lambda_c_minus <= 0.9 + 1e-9 <= r.lambda_c_plus + 1e-9
        assert r.lambda_c_plus <= 1.0 + 1e-9

    def test_pairing(self, exact):
        r = estimate_rates(*exact)
        assert r.lambda_minus * r.lambda_plus == pytest.approx(0.9, abs=1e-3)

    def test_rates_after_closing(self, closed_1e3):
        cocycle, _, E = closed_1e3
        r = estimate_rates(cocycle, E)
        assert r.lambda_plus == pytest.approx(A_U, rel=1e-2)
        assert r.lambda_minus == pytest.approx(A_S, rel=1e-2)
        assert r.C0 >= 1.0


class TestHypotheses:
    def test_uncoupled_defaults(self, exact):
        cocycle, E = exact
        r = estimate_rates(cocycle, E)
        rep = check_hypotheses(r, 0.9, defect=invariance_defect(cocycle, E), projections=E.projection_norms,
                               dims=E.dims)
        assert rep.conditions["H4"] and rep.conditions["center_bracket"] and rep.conditions["H3"]
        assert rep.conditions["H2"] and rep.conditions["bounded_projections"]
        assert rep.ok
        # both readings of the conformal rate inequality are reported
        assert "H3'(literal)" in rep.conditions and "H3'(separation)" in rep.conditions
        assert rep.conditions["H3'(separation)"]

    def test_injected_contracting_unstable_rate(self):
        r = RateEstimate(0.29, 0.9, 1.0, 0.95, 1.0, 20)
        assert not check_hypotheses(r, 0.9).conditions["H3"]

    def test_report_lines(self):
        r = RateEstimate(0.29, 0.9, 1.0, 3.1, 1.0, 20)
        lines = list(check_hypotheses(r, 0.9).lines())
        assert any(line.startswith("H3: true") for line in lines)
