import numpy as np
import pytest

from conftest import K_MAX
from wkam.cohomology import GOLDEN_MEAN, DiophantineData
from wkam.errors import KamError, NearSingularSystem, Stagnation
from wkam.fourier import FourierSeries
from wkam.kam import (build_frame, compute_error, image_distance, kam_step, linearize, linearized_solve, prepare,
                      seed_solution, solve_center, solve_stable, solve_torus, solve_unstable, torus_cocycle)
from wkam.models import default_family
from wkam.splitting import hyperbolic_multipliers

LAM = 0.9
MU0 = (1 - LAM) * GOLDEN_MEAN
A_S, A_U = hyperbolic_multipliers(1.5, LAM)


def family(eps_c=0.0, eps=0.0):
    return default_family({"eps_c": eps_c, "eps": eps})


@pytest.fixture(scope="module")
def seed():
    return seed_solution(family(), GOLDEN_MEAN, K_MAX)


@pytest.fixture(scope="module")
def coupled_1e3(seed):
    f = family(eps=1e-3)
    return f, prepare(f, seed)


def scalar_wave(K=K_MAX, seed=0):
    rng = np.random.default_rng(seed)
    c = np.zeros(2 * K + 1, dtype=complex)
    for k in range(-8, 9):
        c[K + k] = (rng.standard_normal() + 1j * rng.standard_normal()) * 0.5 ** abs(k)
    c = 0.5 * (c + c[::-1].conj())
    return FourierSeries(c)


class TestError:
    def test_exact_torus(self, seed):
        assert compute_error(family(), seed).norm() <= 1e-14

    def test_drift_offset(self, seed):
        e = compute_error(family(), seed.with_(mu=np.array([MU0 + 1e-3])))
        assert np.allclose(e.mean().real, [1e-3, 0, 1e-3, 0], atol=1e-15)
        assert np.max(np.abs(e.zero_mean().coeffs)) < 1e-15

    def test_kick_magnitude(self, seed):
        assert 1e-4 < compute_error(family(eps_c=1e-3), seed).norm() < 1e-2


class TestFrame:
    def test_uncoupled_exact_frame(self, seed):
        f = family()
        fr = build_frame(f, prepare(f, seed))
        assert np.allclose(fr.DK[..., 0], [1, 0, 0, 0], atol=1e-15)
        assert np.allclose(fr.N, 1.0)
        # S from the upper-right entry of [e_x | e_p]^-1 Df [e_x | e_p] with Df e_p = lam (e_x + e_p)
        assert np.allclose(fr.S, LAM, atol=1e-14)
        assert np.allclose(fr.S, fr.S_alt)
        assert fr.U_residual <= 1e-12
        assert fr.block_lower_left <= 1e-12 and fr.block_lower_right <= 1e-12
        assert fr.center_form_det > 0.5

    def test_reducibility_error_linear_in_residual(self, seed):
        ratios = []
        for ec in (1e-4, 1e-3):
            f = family(eps_c=ec)
            ratios.append(build_frame(f, seed).R_norm / compute_error(f, seed).norm())
        assert ratios[1] == pytest.approx(ratios[0], rel=0.3)

    def test_rank_deficient_embedding(self, seed):
        flat = seed.with_(lift=np.zeros((4, 1)))
        with pytest.raises(KamError, match="rank"):
            build_frame(family(), flat)


class TestCenter:
    def test_zero_error(self, seed):
        f = family()
        lin = linearize(f, prepare(f, seed))
        zero = FourierSeries.zeros((2,), K_MAX)
        A = FourierSeries.constant([[0.0], [1.0]], K_MAX)
        res = solve_center(lin.frame, zero, A, LAM, lin.dd)
        assert np.max(np.abs(res.W.coeffs)) == 0 and np.all(res.beta == 0)

    def test_system_lower_left(self, seed):
        f = family(eps_c=1e-3)
        lin = linearize(f, prepare(family(), seed))
        out = linearized_solve(lin, compute_error(f, seed), np.zeros(1))
        assert out.center.sys_matrix[1, 0] == pytest.approx(LAM - 1.0, abs=1e-15)

    def test_near_singular_system(self, seed):
        f = family()
        lin = linearize(f, prepare(f, seed))
        e = FourierSeries.zeros((2,), K_MAX)
        with pytest.raises(NearSingularSystem) as info:
            solve_center(lin.frame, e, FourierSeries.zeros((2, 1), K_MAX), LAM, lin.dd)
        assert info.value.step == "solve average system"

    def test_quadratic_drop(self, seed):
        f = family(eps_c=1e-3)
        sol = prepare(f, seed)
        e0 = sol.residual_norm
        assert kam_step(f, sol).residual_norm <= 10 * e0**2


class TestHyperbolicSeries:
    def test_stable_geometric_series(self, seed):
        f = family()
        sol = prepare(f, seed)
        cyc = torus_cocycle(f, sol)
        vs = sol.splitting.bases["s"][0, :, 0]
        phi = scalar_wave()
        e_s = FourierSeries(phi.coeffs[:, None] * vs[None, :])
        out = solve_stable(cyc, sol.splitting, e_s, None, None, L0=40)
        k = np.arange(-K_MAX, K_MAX + 1)
        closed = phi.coeffs / (np.exp(2j * np.pi * k * GOLDEN_MEAN) - A_S)
        assert np.max(np.abs(out.delta.coeffs - closed[:, None] * vs)) <= 1e-12

    def test_unstable_geometric_series(self, seed):
        f = family()
        sol = prepare(f, seed)
        cyc = torus_cocycle(f, sol)
        vu = sol.splitting.bases["u"][0, :, 0]
        phi = scalar_wave(seed=1)
        e_u = FourierSeries(phi.coeffs[:, None] * vu[None, :])
        out = solve_unstable(cyc, sol.splitting, e_u, None, None, L0=40)
        k = np.arange(-K_MAX, K_MAX + 1)
        closed = phi.coeffs / (np.exp(2j * np.pi * k * GOLDEN_MEAN) - A_U)
        assert np.max(np.abs(out.delta.coeffs - closed[:, None] * vu)) <= 1e-12

    def test_zero_rhs(self, seed):
        f = family()
        sol = prepare(f, seed)
        cyc = torus_cocycle(f, sol)
        z = FourierSeries.zeros((4,), K_MAX)
        assert np.all(solve_stable(cyc, sol.splitting, z, None, None).delta.coeffs == 0)
        assert np.all(solve_unstable(cyc, sol.splitting, z, None, None).delta.coeffs == 0)

    @pytest.mark.parametrize("sigma", ["s", "u"])
    def test_projected_equation_residual(self, coupled_1e3, sigma):
        f, sol = coupled_1e3
        E = sol.splitting
        cyc = torus_cocycle(f, sol)
        P1 = E.projections_at(1)[sigma]
        e = compute_error(f, sol).eval_grid(real=True)
        e_sig = FourierSeries.from_grid(np.einsum("...ij,...j->...i", P1, e), K_MAX)
        solver = solve_stable if sigma == "s" else solve_unstable
        out = solver(cyc, E, e_sig, None, None, L0=60, rates=sol.rates)
        D = out.delta
        lhs = D.shift(GOLDEN_MEAN).eval_grid(real=True) - np.einsum("...ij,...j->...i", cyc.grid, D.eval_grid(real=True))
        resid = np.einsum("...ij,...j->...i", P1, lhs - e_sig.eval_grid(real=True))
        assert np.max(np.abs(resid)) <= 1e-10
        assert out.tail_bound <= 1e-11 + 1e-10


class TestNewton:
    def test_exact_solution_is_fixed(self, seed):
        f = family()
        sol = prepare(f, seed)
        new = kam_step(f, sol)
        assert np.max(np.abs(new.periodic.coeffs - sol.periodic.coeffs)) <= 1e-13
        assert abs(new.mu[0] - sol.mu[0]) <= 1e-13

    def test_tolerance_above_seed_residual(self, seed):
        f = family(eps_c=1e-3)
        out = solve_torus(f, seed, tol=1.0)
        assert out.history == () and np.array_equal(out.periodic.coeffs, seed.periodic.coeffs)

    def test_quadratic_history(self, a1_run):
        sol = a1_run[0]
        e = [sol.history[0]["previous_residual"]] + [h["residual"] for h in sol.history]
        pairs = [(a, b) for a, b in zip(e, e[1:]) if b > 1e-14]
        x, y = np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs])
        slope, icpt = np.polyfit(x, y, 1)
        r2 = 1 - np.sum((y - slope * x - icpt) ** 2) / np.sum((y - y.mean()) ** 2)
        assert len(pairs) >= 3 and slope == pytest.approx(2.0, abs=0.3) and r2 >= 0.9

    def test_drift_continuity(self, seed):
        drift = {}
        for ec in (1e-3, 2e-3):
            drift[ec] = abs(solve_torus(family(eps_c=ec), seed).mu[0] - MU0)
        C = drift[1e-3] / 1e-3
        assert drift[2e-3] <= 2 * C * 2e-3 + 1e-12

    def test_isotropy_and_pairing(self, a1_run):
        v = a1_run[0].verification
        assert v["isotropy"] <= 10 * 1e-11
        assert v["pairing_defect"] <= 1e-3
        assert v["hypotheses"]["center_bracket"] and v["hypotheses"]["H3"]

    def test_residual_recomputed(self, a1_run, a1_family):
        sol = a1_run[0]
        assert compute_error(a1_family, sol).norm() == pytest.approx(sol.verification["residual"])
        assert sol.verification["residual"] <= 1e-11

    def test_gauge_covariance(self, a1_run, a1_family, uncoupled):
        shifted = seed_solution(uncoupled, GOLDEN_MEAN, K_MAX, phase=0.3)
        other = solve_torus(a1_family, shifted)
        assert image_distance(other, a1_run[0]) <= 1e-9
        assert abs(other.mu[0] - a1_run[0].mu[0]) <= 1e-10

    def test_breakdown_is_reported(self, seed):
        with pytest.raises(KamError) as info:
            solve_torus(family(eps_c=0.95), seed)
        assert isinstance(info.value, (Stagnation, NearSingularSystem)) or info.value.step

    def test_unreachable_tolerance(self, seed):
        with pytest.raises(Stagnation):
            solve_torus(family(eps_c=1e-3), seed, tol=1e-30)

    def test_history_entries(self, a1_run):
        h = a1_run[0].history[-1]
        for key in ("iter", "residual", "beta_norm", "defect", "lambda_minus", "lambda_plus", "sys_condition"):
            assert key in h

    def test_explicit_diophantine_data(self, seed):
        f = family(eps_c=1e-3)
        out = solve_torus(f, seed, dd=DiophantineData((GOLDEN_MEAN,), 1.0))
        assert out.residual_norm <= 1e-11
