"""Quasi-Newton iteration for whiskered invariant tori.

An embedding is ``K(theta) = lift @ theta + periodic(theta)`` with
``periodic`` a real Fourier series.  One step solves the linearized
invariance equation

    gamma(theta) Delta(theta) + D_mu f beta - Delta(theta + omega) = -e(theta)

by splitting it along an invariant stable/center/unstable decomposition: the
center part is reduced to constant-coefficient triangular form through the
frame ``M = [DK | J~ DK N]``, the hyperbolic parts are summed as Neumann
series forward (stable) and backward (unstable) along the rotation.
"""

import contextlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .cohomology import DiophantineData, solve_twisted
from .errors import (
    DivergentSeries,
    DomainViolation,
    KamError,
    MaxIterExceeded,
    NearSingularSystem,
    SingularMatrixError,
    Stagnation,
    WkamError,
)
from .fourier import FourierSeries, check_conditioning, grid_points, shift_grid
from .splitting import (
    Cocycle,
    check_hypotheses,
    close_splitting,
    estimate_rates,
    invariance_defect,
    product_splitting,
)

log = logging.getLogger(__name__)

RANK_TOL = 1e-8
SYS_COND_MAX = 1e8
FRAME_COND_MAX = 1e10


def _mv(A, x):
    return np.einsum("...ij,...j->...i", A, x)


def _T(A):
    return np.swapaxes(A, -1, -2)


@contextlib.contextmanager
def _step(name):
    """Tag errors raised inside the block with the algorithm step they came from."""
    try:
        yield
    except KamError as err:
        if err.step is None:
            err.step = name
            err.args = (f"[{name}] {err.args[0]}",) + err.args[1:]
        raise
    except WkamError as err:
        raise KamError(str(err), name) from err


@dataclass(frozen=True, eq=False)
class TorusSolution:
    """Embedding ``theta -> lift @ theta + periodic(theta)`` with drift ``mu`` and diagnostics."""

    periodic: FourierSeries
    mu: np.ndarray
    omega: tuple
    lift: np.ndarray
    eps: float = 0.0
    splitting: object = None
    rates: object = None
    residual_norm: float = float("nan")
    history: tuple = ()
    verification: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)).copy())
        object.__setattr__(self, "lift", np.asarray(self.lift, dtype=float).reshape(-1, len(self.omega)))
        if self.periodic.value_shape != (self.lift.shape[0],):
            raise ValueError("periodic part and lift disagree on the phase-space dimension")

    @property
    def d(self):
        return self.periodic.d

    @property
    def K_max(self):
        return self.periodic.K_max

    @property
    def grid_size(self):
        return self.periodic.grid_size

    def with_(self, **changes):
        return replace(self, **changes)

    def theta_grid(self):
        return grid_points(self.grid_size, self.d)

    def embedding_grid(self, shift_steps=0):
        """``K(theta + shift_steps*omega)`` on the grid, on the lift."""
        theta = self.theta_grid() + shift_steps * np.asarray(self.omega)
        per = self.periodic if shift_steps == 0 else self.periodic.shift(shift_steps * np.asarray(self.omega))
        return theta @ self.lift.T + per.eval_grid(real=True)

    def tangent_grid(self):
        """``DK`` on the grid, shape ``(N,)*d + (2n, d)``."""
        cols = [self.periodic.derivative(j).eval_grid(real=True) for j in range(self.d)]
        return np.stack(cols, axis=-1) + self.lift

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 1 and self.d == 1:
            theta = theta[:, None]
        return theta @ self.lift.T + self.periodic.evaluate(theta, real=True)

    def torus_average(self):
        """Average of the torus-angle components of the periodic part."""
        return np.real(self.periodic.mean()[: self.d])


def seed_solution(f, omega, K_max, grid_size=None, phase=0.0):
    """Exact torus ``(theta + phase, 0, omega, 0)`` of the uncoupled default family.

    ``mu = (1 - lam) omega`` with ``lam`` the conformal factor at ``eps = 0``;
    the splitting is the closed-form product splitting.
    """
    if not hasattr(f, "uncoupled"):
        raise TypeError("built-in seed is available for the default family only")
    base = f.uncoupled()
    omega = float(np.atleast_1d(omega)[0])
    lam = float(np.real(base.lam(0.0)))
    per = FourierSeries.constant(np.array([phase, 0.0, omega, 0.0]), K_max, 1, grid_size)
    lift = np.array([[1.0], [0.0], [0.0], [0.0]])
    E = product_splitting(base, K_max, omega, grid_size)
    sol = TorusSolution(per, [(1.0 - lam) * omega], (omega,), lift, eps=0.0, splitting=E)
    return sol.with_(residual_norm=compute_error(base, sol).norm(0.0))


def compute_error(f, sol):
    """``e = f_mu o K - K o T_omega`` as a series truncated to the solution's ``K_max``."""
    with _step("compute error"):
        X = sol.embedding_grid()
        ok = f.in_domain(X)
        if not np.all(ok):
            bad = np.argwhere(~np.asarray(ok))[0]
            raise DomainViolation(tuple(int(i) for i in bad))
        e = f.apply(sol.mu, f.eps, X) - sol.embedding_grid(1)
        if not np.all(np.isfinite(e)):
            raise DomainViolation(tuple(int(i) for i in np.argwhere(~np.isfinite(e))[0][:-1]))
        return FourierSeries.from_grid(e, sol.K_max, sol.d)


def torus_cocycle(f, sol):
    X = sol.embedding_grid()
    return Cocycle.from_grid(f.jacobian(sol.mu, f.eps, X), sol.omega, sol.K_max, sol.d)


@dataclass(frozen=True, eq=False)
class ReducibilityFrame:
    """Grid values of the frame quantities; ``M_next_inv`` is the pseudo-inverse of ``M(theta + omega)``."""

    lam: float
    DK: np.ndarray
    N: np.ndarray
    P: np.ndarray
    chi: np.ndarray
    v: np.ndarray
    M: np.ndarray
    M_next_inv: np.ndarray
    S: np.ndarray
    S_alt: np.ndarray
    U: np.ndarray
    R: np.ndarray
    U_residual: float
    R_norm: float
    M_condition: float
    block_lower_left: float
    block_lower_right: float
    center_form_det: float

    @property
    def d(self):
        return self.DK.shape[-1]


def build_frame(f, sol, cocycle=None, splitting=None):
    """Automatic-reducibility frame along ``K``.

    ``J~ = Pi^c J^{-1}`` maps the tangent directions into the center bundle, so
    ``M = [DK | J~ DK N]`` spans ``E^c``.  ``S`` uses
    ``(P o T)^T gamma J~ P - (N o T)^T (chi o T)^T (N o T) lam``; ``S_alt`` keeps the
    untransposed ``chi`` variant for comparison.
    """
    with _step("build frame"):
        cocycle = cocycle or torus_cocycle(f, sol)
        E = splitting or sol.splitting
        omega = np.asarray(sol.omega)
        d = sol.d
        lam = float(np.real(f.lam(f.eps)))
        X = sol.embedding_grid()
        X1 = sol.embedding_grid(1)
        DK = sol.tangent_grid()
        sv = np.linalg.svd(DK, compute_uv=False)
        rel = np.divide(sv[..., -1], sv[..., 0], out=np.zeros(sv.shape[:-1]), where=sv[..., 0] > 0)
        if np.min(rel) < RANK_TOL:
            node = np.unravel_index(np.argmin(rel), rel.shape)
            raise KamError(f"DK loses rank at grid node {tuple(int(i) for i in node)}", "build frame")
        Jinv = np.linalg.inv(f.J(X))
        Jt = E.projections["c"] @ Jinv
        N = np.linalg.inv(_T(DK) @ DK)
        P = DK @ N
        chi = _T(DK) @ Jt @ DK
        v = Jt @ DK @ N
        M = np.concatenate([DK, v], axis=-1)

        def nxt(a):
            return shift_grid(a, omega, d)

        DK1, N1, P1, chi1, M1, v1 = map(nxt, (DK, N, P, chi, M, v))
        sM = np.linalg.svd(M, compute_uv=False)
        M_cond = float(np.max(sM[..., 0] / sM[..., -1]))
        if not M_cond < FRAME_COND_MAX:
            raise KamError(f"frame M is ill-conditioned (condition number {M_cond:.3e})", "build frame")
        M_next_inv = np.linalg.pinv(M1)
        gam = cocycle.grid
        first = _T(P1) @ gam @ Jt @ P
        S = first - _T(N1) @ _T(chi1) @ N1 * lam
        S_alt = first - _T(N1) @ chi1 @ N1 * lam
        U = _T(DK1) @ f.J(X1) @ gam @ v
        eye = np.eye(d)
        B = np.zeros(S.shape[:-2] + (2 * d, 2 * d))
        B[..., :d, :d] = eye
        B[..., :d, d:] = S
        B[..., d:, d:] = lam * eye
        R = gam @ M - M1 @ B
        reduced = M_next_inv @ gam @ M
        omega_c = _T(M) @ f.J(X) @ M
        return ReducibilityFrame(
            lam=lam,
            DK=DK,
            N=N,
            P=P,
            chi=chi,
            v=v,
            M=M,
            M_next_inv=M_next_inv,
            S=S,
            S_alt=S_alt,
            U=U,
            R=R,
            U_residual=float(np.max(np.abs(U - lam * eye))),
            R_norm=FourierSeries.from_grid(R, sol.K_max, d).norm(0.0),
            M_condition=M_cond,
            block_lower_left=float(np.max(np.abs(reduced[..., d:, :d]))),
            block_lower_right=float(np.max(np.abs(reduced[..., d:, d:] - lam * eye))),
            center_form_det=float(np.min(np.abs(np.linalg.det(omega_c)))),
        )


@dataclass(frozen=True, eq=False)
class CenterSolveResult:
    W1c: FourierSeries
    W2c: FourierSeries
    beta: np.ndarray
    sys_matrix: np.ndarray
    sys_condition: float

    @property
    def W(self):
        return FourierSeries(np.concatenate([self.W1c.coeffs, self.W2c.coeffs], axis=-1), self.W1c.d,
                             self.W1c.grid_size)


def _series_matvec(A, x):
    return FourierSeries.from_grid(_mv(A.eval_grid(), x.eval_grid()), A.K_max, A.d)


def solve_center(frame, e_c, A_c, lam, dd, cond_max=SYS_COND_MAX):
    """Solve the reduced center equations for ``W^c`` and the drift correction ``beta``.

    ``e_c`` (shape ``(2d,)``) and ``A_c`` (shape ``(2d, d)``) are the center
    error and drift derivative already expressed in the frame coordinates.
    The averages are fixed by a ``2d x 2d`` linear system; ``W_1`` is returned
    with zero average (its average is the gauge freedom).
    """
    d = dd.d
    e1, e2 = e_c[:d], e_c[d:]
    A1, A2 = A_c[:d], A_c[d:]
    with _step("solve twisted equations"):
        Wa = solve_twisted(lam, dd, -e2.zero_mean(), zero_avg_normalization=True)
        Wb = solve_twisted(lam, dd, -A2.zero_mean(), zero_avg_normalization=True)
    S = FourierSeries.from_grid(frame.S, e_c.K_max, d)
    SWa = _series_matvec(S, Wa)
    SWb = S @ Wb
    sys = np.zeros((2 * d, 2 * d))
    sys[:d, :d] = np.real(S.mean())
    sys[:d, d:] = np.real(SWb.mean() + A1.mean())
    sys[d:, :d] = (lam - 1.0) * np.eye(d)
    sys[d:, d:] = np.real(A2.mean())
    rhs = np.concatenate([-np.real(SWa.mean() + e1.mean()), -np.real(e2.mean())])
    cond = float(np.linalg.cond(sys))
    if not cond < cond_max:
        raise NearSingularSystem(cond)
    sol = np.linalg.solve(sys, rhs)
    W2_avg, beta = sol[:d], sol[d:]
    W2 = Wa + FourierSeries(Wb.coeffs @ beta, d, Wb.grid_size) + W2_avg
    rhs1 = -(_series_matvec(S, W2) + e1 + FourierSeries(A1.coeffs @ beta, d, A1.grid_size)).zero_mean()
    with _step("solve twisted equations"):
        W1 = solve_twisted(1.0, dd, rhs1, zero_avg_normalization=True)
    return CenterSolveResult(W1.real_part(), W2.real_part(), beta, sys, cond)


@dataclass(frozen=True, eq=False)
class NeumannSolution:
    delta: FourierSeries
    terms: int
    tail_bound: float
    rhs_norm: float
    increments: tuple


def _neumann(update, shape, terms, growth_name):
    delta = np.zeros(shape)
    incs = []
    for _ in range(terms):
        new = update(delta)
        incs.append(float(np.max(np.abs(new - delta))))
        delta = new
        if not np.all(np.isfinite(delta)):
            raise DivergentSeries(f"{growth_name} partial sums are not finite")
    if len(incs) >= 4 and incs[0] > 0 and incs[-1] > incs[0] and incs[-1] > incs[-2]:
        raise DivergentSeries(
            f"{growth_name} partial sums grow (last term {incs[-1]:.3e} > first {incs[0]:.3e}); mislabeled bundle?"
        )
    return delta, tuple(incs)


def _tail(rates, ratio, terms, rhs_norm):
    if rates is None:
        return float("nan")
    if ratio >= 1.0:
        return float("inf")
    return float(rates.C0 * ratio ** terms / (1.0 - ratio) * rhs_norm)


def _hyperbolic_rhs(E, sigma, e_sigma, beta, mu_deriv):
    g = e_sigma.eval_grid(real=True)
    if beta is not None and np.any(beta):
        P1 = E.projections_at(1)[sigma]
        g = g + _mv(P1, mu_deriv.eval_grid(real=True) @ np.asarray(beta, dtype=float))
    return g


def solve_stable(cocycle, E, e_s, beta, mu_deriv, L0=60, rates=None):
    """``Delta^s(theta+omega) = gamma Delta^s(theta) + g^s(theta)`` summed forward along the orbit.

    ``e_s`` is ``Pi^s(theta+omega) e(theta)``; ``g^s`` adds the projected drift
    term.  ``L0 + 1`` terms are summed (``k = 0 .. L0``).
    """
    with _step("stable series"):
        omega = np.asarray(E.omega)
        d = cocycle.gamma.d
        g = _hyperbolic_rhs(E, "s", e_s, beta, mu_deriv)
        gam = cocycle.grid
        Ps = E.projections["s"]

        def update(delta):
            return _mv(Ps, shift_grid(_mv(gam, delta) + g, -omega, d))

        delta, incs = _neumann(update, g.shape, L0 + 1, "stable")
        rhs_norm = float(np.max(np.linalg.norm(g, axis=-1)))
        rate = rates.lambda_minus if rates is not None else None
        tail = _tail(rates, rate if rate is not None else 0.0, L0 + 1, rhs_norm)
        return NeumannSolution(FourierSeries.from_grid(delta, e_s.K_max, d), L0 + 1, tail, rhs_norm, incs)


def solve_unstable(cocycle, E, e_u, beta, mu_deriv, L0=60, rates=None):
    """``Delta^u(theta) = gamma^{-1}(theta) [Delta^u(theta+omega) - g^u(theta)]`` summed backward."""
    with _step("unstable series"):
        omega = np.asarray(E.omega)
        d = cocycle.gamma.d
        g = _hyperbolic_rhs(E, "u", e_u, beta, mu_deriv)
        gam = cocycle.grid
        check_conditioning(gam, 1e14)
        gin = np.linalg.inv(gam)
        Pu = E.projections["u"]

        def update(delta):
            return _mv(Pu, _mv(gin, shift_grid(delta, omega, d) - g))

        delta, incs = _neumann(update, g.shape, L0 + 1, "unstable")
        rhs_norm = float(np.max(np.linalg.norm(g, axis=-1)))
        ratio = 1.0 / rates.lambda_plus if rates is not None else 0.0
        tail = _tail(rates, ratio, L0 + 1, rhs_norm)
        return NeumannSolution(FourierSeries.from_grid(delta, e_u.K_max, d), L0 + 1, tail, rhs_norm, incs)


@dataclass(frozen=True, eq=False)
class Linearization:
    """Everything the linearized equation at ``(K, mu)`` needs, computed once."""

    f: object
    sol: TorusSolution
    cocycle: Cocycle
    splitting: object
    frame: ReducibilityFrame
    mu_deriv: FourierSeries
    rates: object
    dd: DiophantineData


def linearize(f, sol, dd=None, cocycle=None, rates=None):
    dd = dd or DiophantineData(sol.omega)
    cocycle = cocycle or torus_cocycle(f, sol)
    rates = rates or sol.rates
    frame = build_frame(f, sol, cocycle, sol.splitting)
    mu_deriv = FourierSeries.from_grid(f.mu_derivative(sol.mu, f.eps, sol.embedding_grid()), sol.K_max, sol.d)
    return Linearization(f, sol, cocycle, sol.splitting, frame, mu_deriv, rates, dd)


@dataclass(frozen=True, eq=False)
class LinearizedSolution:
    delta: FourierSeries
    beta: np.ndarray
    center: CenterSolveResult
    stable: NeumannSolution
    unstable: NeumannSolution
    gauge: np.ndarray


def linearized_solve(lin, e, torus_average_target, L0=60, residual=None, max_terms=2000):
    """Solve ``gamma Delta + D_mu f beta - Delta o T_omega = -e`` in the invariant splitting.

    ``torus_average_target`` fixes the average of the torus-angle components
    of ``Delta`` (the rotation gauge).  ``L0`` grows until the reported tail
    bounds drop below ``0.1 * residual``.
    """
    sol, E, frame = lin.sol, lin.splitting, lin.frame
    d, K = sol.d, sol.K_max
    P1 = E.projections_at(1)
    eg = e.eval_grid(real=True)
    e_sig = {s: FourierSeries.from_grid(_mv(P1[s], eg), K, d) for s in ("s", "c", "u")}
    with _step("project center equation"):
        e_red = FourierSeries.from_grid(_mv(frame.M_next_inv, e_sig["c"].eval_grid(real=True)), K, d)
        A_red = FourierSeries.from_grid(
            frame.M_next_inv @ P1["c"] @ lin.mu_deriv.eval_grid(real=True), K, d
        )
    center = solve_center(frame, e_red, A_red, frame.lam, lin.dd)
    beta = center.beta
    delta_c = _mv(frame.M, center.W.eval_grid(real=True))

    residual = e.norm(0.0) if residual is None else residual
    terms = L0
    while True:
        st = solve_stable(lin.cocycle, E, e_sig["s"], beta, lin.mu_deriv, terms, lin.rates)
        un = solve_unstable(lin.cocycle, E, e_sig["u"], beta, lin.mu_deriv, terms, lin.rates)
        worst = max(st.tail_bound, un.tail_bound)
        if not (worst >= 0.1 * residual and residual > 0) or 2 * terms > max_terms:
            break
        terms *= 2
        log.info("raising Neumann truncation to %d terms (tail bound %.2e)", terms, worst)

    delta = delta_c + st.delta.eval_grid(real=True) + un.delta.eval_grid(real=True)
    with _step("normalize gauge"):
        DK = frame.DK
        avg_DK = DK[..., :d, :].reshape(-1, d, d).mean(axis=0)
        avg_delta = delta[..., :d].reshape(-1, d).mean(axis=0)
        shift = np.linalg.solve(avg_DK, np.asarray(torus_average_target) - avg_delta)
        delta = delta + DK @ shift
    return LinearizedSolution(FourierSeries.from_grid(delta, K, d).real_part(), beta, center, st, un, shift)


def _norm_beta(beta):
    return float(np.linalg.norm(beta))


def prepare(f, sol, split_tol=1e-12, J_max=20):
    """Close the splitting for the current embedding and refresh rates and residual."""
    with _step("close splitting"):
        cyc = torus_cocycle(f, sol)
        E = close_splitting(cyc, sol.splitting, tol=split_tol)
        rates = estimate_rates(cyc, E, J_max)
    e = compute_error(f, sol)
    return sol.with_(splitting=E, rates=rates, residual_norm=e.norm(0.0), eps=float(np.real(f.eps)))


def kam_step(f, sol, L0=60, dd=None, split_tol=1e-12):
    """One quasi-Newton step: correct ``(K, mu)``, then re-close the splitting around ``K'``."""
    e = compute_error(f, sol)
    residual = e.norm(0.0)
    lin = linearize(f, sol, dd)
    target = -sol.torus_average()
    step = linearized_solve(lin, e, target, L0, residual)
    new = sol.with_(periodic=(sol.periodic + step.delta).real_part(), mu=sol.mu + step.beta)
    with _step("close splitting"):
        cyc = torus_cocycle(f, new)
        initial_defect = invariance_defect(cyc, sol.splitting)
        E = close_splitting(cyc, sol.splitting, tol=split_tol)
        rates = estimate_rates(cyc, E)
    e_new = compute_error(f, new)
    entry = {
        "iter": len(sol.history) + 1,
        "residual": e_new.norm(0.0),
        "beta_norm": _norm_beta(step.beta),
        "defect": initial_defect,
        "lambda_minus": rates.lambda_minus,
        "lambda_c_minus": rates.lambda_c_minus,
        "lambda_c_plus": rates.lambda_c_plus,
        "lambda_plus": rates.lambda_plus,
        "sys_condition": step.center.sys_condition,
        "terms": step.stable.terms,
        "tail_stable": step.stable.tail_bound,
        "tail_unstable": step.unstable.tail_bound,
        "U_residual": lin.frame.U_residual,
        "R_norm": lin.frame.R_norm,
        "previous_residual": residual,
        "rate_overlap": bool(abs(rates.lambda_c_plus - rates.lambda_plus) < 1e-2 * rates.lambda_plus),
    }
    return new.with_(splitting=E, rates=rates, residual_norm=entry["residual"], history=sol.history + (entry,))


def solve_torus(f, seed, tol=1e-11, max_iter=20, L0=60, dd=None, split_tol=1e-12, stall_steps=3,
                callback=None):
    """Iterate :func:`kam_step` until the invariance residual is at most ``tol``.

    Raises :class:`Stagnation` when the residual fails to halve for
    ``stall_steps`` consecutive steps.  The returned solution carries a
    ``verification`` dict recomputed from scratch.
    """
    if not np.isfinite(seed.residual_norm) and not np.isnan(seed.residual_norm):
        raise KamError("seed residual is not finite", "start")
    sol = prepare(f, seed, split_tol)
    if not np.isfinite(sol.residual_norm):
        raise KamError("seed residual is not finite", "start")
    stalls = 0
    steps = 0
    while sol.residual_norm > tol:
        if steps >= max_iter:
            raise MaxIterExceeded(f"residual {sol.residual_norm:.3e} > {tol:.1e} after {max_iter} steps", "solve")
        prev = sol.residual_norm
        sol = kam_step(f, sol, L0, dd, split_tol)
        steps += 1
        if callback is not None:
            callback(sol)
        cur = sol.residual_norm
        if not np.isfinite(cur):
            raise Stagnation("residual became non-finite", "solve")
        stalls = stalls + 1 if cur > 0.5 * prev else 0
        if stalls >= stall_steps:
            raise Stagnation(
                f"residual reduction below 2x for {stall_steps} steps (residual {cur:.3e}, tol {tol:.1e})", "solve"
            )
    return sol.with_(verification=verify_solution(f, sol, dd))


def verify_solution(f, sol, dd=None):
    """A-posteriori checks recomputed from scratch at ``sol``."""
    e = compute_error(f, sol)
    cyc = torus_cocycle(f, sol)
    frame = build_frame(f, sol, cyc, sol.splitting)
    rates = sol.rates or estimate_rates(cyc, sol.splitting)
    lam = frame.lam
    DK = sol.tangent_grid()
    iso = _T(DK) @ f.J(sol.embedding_grid()) @ DK
    hyp = check_hypotheses(rates, lam, invariance_defect(cyc, sol.splitting), sol.splitting.projection_norms,
                           sol.splitting.dims, sol.d)
    sys_cond = sol.history[-1]["sys_condition"] if sol.history else float("nan")
    return {
        "residual": e.norm(0.0),
        "splitting_defect": hyp.measured.get("defect"),
        "pairing_defect": abs(rates.lambda_minus * rates.lambda_plus - lam),
        "isotropy": float(np.max(np.abs(iso))),
        "U_residual": frame.U_residual,
        "R_norm": frame.R_norm,
        "center_form_det": frame.center_form_det,
        "S_variant_gap": float(np.max(np.abs(frame.S - frame.S_alt))),
        "sys_condition": sys_cond,
        "hypotheses": dict(hyp.conditions),
    }


def image_distance(sol1, sol2, n_points=512, newton_steps=12):
    """Symmetric Hausdorff-type distance between the images of two circle embeddings (d = 1).

    Each sample point of one image is matched to the point of the other with the
    same (lifted) torus angle, found by Newton's method on the angle component.
    """
    if sol1.d != 1 or sol2.d != 1:
        raise NotImplementedError("image distance is implemented for d = 1")

    def one_way(a, b):
        theta = np.arange(n_points) / n_points
        target = a.evaluate(theta)
        phi = theta.copy()
        db = b.periodic.derivative(0)
        for _ in range(newton_steps):
            val = b.evaluate(phi)[:, 0] - target[:, 0]
            slope = b.lift[0, 0] + db.evaluate(phi, real=True)[:, 0]
            phi = phi - val / slope
        return float(np.max(np.linalg.norm(b.evaluate(phi) - target, axis=-1)))

    return max(one_way(sol1, sol2), one_way(sol2, sol1))
