"""Lindstedt series in the coupling parameter, their asymptotic check, domain scans and continuation.

Order ``j`` of ``(K_eps, mu_eps)`` solves the linearized invariance equation
at the exact ``eps = 0`` torus with right-hand side the order-``j`` Taylor
coefficient of ``f(K^{<j}, mu^{<j}, eps) - K^{<j} o T_omega``, computed by
truncated power-series arithmetic on the grid.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cohomology import GOLDEN_MEAN, DiophantineData, nu_estimate_many
from .errors import KamError, WkamError
from .fourier import FourierSeries
from .kam import compute_error, linearize, linearized_solve, prepare, solve_torus
from .models import ConformalFactorModel
from .taylor import Taylor

log = logging.getLogger(__name__)

BASE_TOL = 1e-12
ORDER_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LindstedtExpansion:
    """``K^{[<=N]}(eps) = sum_j eps^j K_j`` and ``mu^{[<=N]}(eps) = sum_j eps^j mu_j``.

    ``K_0`` is the base periodic part; the lift is carried by ``base``.
    """

    family: object
    base: object
    K: tuple
    mu: tuple
    order_residuals: tuple = ()

    @property
    def order(self):
        return len(self.K) - 1

    def truncated(self, N):
        return LindstedtExpansion(self.family, self.base, self.K[: N + 1], self.mu[: N + 1],
                                  self.order_residuals[: N + 1])

    def mu_at(self, eps):
        return sum(m * eps**j for j, m in enumerate(self.mu))

    def evaluate(self, eps):
        """Predicted torus at ``eps`` (carrying the base splitting and rates)."""
        per = self.K[0]
        for j in range(1, len(self.K)):
            per = per + self.K[j] * eps**j
        return self.base.with_(periodic=per.real_part(), mu=self.mu_at(eps), eps=float(eps), history=(),
                               verification={})

    def residual(self, eps):
        f = self.family.at(eps)
        return compute_error(f, self.evaluate(eps)).norm(0.0)


def _taylor_embedding(base, K_list, order):
    """Taylor coefficients in eps of ``K^{<=len-1}`` on the grid, padded to ``order``."""
    X0 = base.embedding_grid()
    c = np.zeros((order + 1,) + X0.shape)
    c[0] = X0
    for j in range(1, min(len(K_list), order + 1)):
        c[j] = K_list[j].eval_grid(real=True)
    return Taylor(c)


def _taylor_mu(mu_list, order):
    c = np.zeros((order + 1, len(mu_list[0])))
    for j in range(min(len(mu_list), order + 1)):
        c[j] = mu_list[j]
    return Taylor(c)


def taylor_remainder(f, base, K_list, mu_list, order):
    """Order-``order`` coefficient of ``f(K, mu, eps) - K o T_omega`` for the given truncations."""
    X = _taylor_embedding(base, K_list, order)
    mu = _taylor_mu(mu_list, order)
    eps = Taylor.variable(0.0, order)
    F = f.apply_taylor(mu, eps, X)
    shifted = np.zeros(F.c.shape[1:])
    if order < len(K_list):
        shifted = K_list[order].shift(base.omega).eval_grid(real=True) if order > 0 else base.embedding_grid(1)
    return F.c[order] - shifted


def expand(f, base, N, dd=None, L0=60):
    """Lindstedt coefficients ``(K_j, mu_j)`` for ``j = 0..N`` around the exact torus ``base``.

    ``base`` must solve the invariance equation of ``f.at(0)``; its splitting is
    closed first if necessary.
    """
    f0 = f.at(0.0)
    base = prepare(f0, base)
    if not base.residual_norm <= BASE_TOL:
        raise ValueError(f"base residual {base.residual_norm:.3e} exceeds {BASE_TOL:.0e}")
    K_list = [base.periodic]
    mu_list = [base.mu.copy()]
    residuals = [base.residual_norm]
    if N == 0:
        return LindstedtExpansion(f, base, tuple(K_list), tuple(mu_list), tuple(residuals))
    lin = linearize(f0, base, dd)
    zero = np.zeros(base.d)
    for j in range(1, N + 1):
        R = FourierSeries.from_grid(taylor_remainder(f, base, K_list, mu_list, j), base.K_max, base.d)
        step = linearized_solve(lin, R, zero, L0, residual=max(R.norm(0.0), 1e-300))
        K_list.append(step.delta)
        mu_list.append(np.real(step.beta))
        check = FourierSeries.from_grid(taylor_remainder(f, base, K_list, mu_list, j), base.K_max, base.d)
        residuals.append(check.norm(0.0))
        if residuals[-1] > ORDER_TOL * max(1.0, R.norm(0.0)):
            log.warning("order %d residual %.3e above %.0e", j, residuals[-1], ORDER_TOL)
    return LindstedtExpansion(f, base, tuple(K_list), tuple(mu_list), tuple(residuals))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    eps: tuple
    residuals: tuple
    underflow: bool = False
    message: str = ""


def residual_slope(expansion, eps_samples, floor=1e-300):
    """Least-squares slope of ``log residual`` against ``log |eps|``.

    Samples at ``eps = 0`` or with residual below ``floor`` are reported as
    underflow and left out of the fit.
    """
    eps_samples = [float(e) for e in eps_samples]
    if len(eps_samples) < 2:
        raise ValueError("need at least two eps samples")
    res = [expansion.residual(e) if e != 0 else 0.0 for e in eps_samples]
    good = [(abs(e), r) for e, r in zip(eps_samples, res) if e != 0 and r > floor]
    underflow = len(good) < len(eps_samples)
    if len(good) < 2:
        return SlopeFit(float("nan"), tuple(eps_samples), tuple(res), True,
                        "residual underflow: fewer than two samples with a measurable residual")
    x = np.log([g[0] for g in good])
    y = np.log([g[1] for g in good])
    slope = float(np.polyfit(x, y, 1)[0])
    msg = "some samples underflowed and were skipped" if underflow else ""
    return SlopeFit(slope, tuple(eps_samples), tuple(res), underflow, msg)


@dataclass(frozen=True)
class DomainScanSpec:
    """Square raster ``[-r0, r0]^2`` of complex ``eps``; membership needs ``|eps| <= r0``."""

    A: float = 0.5
    N: int = 0
    r0: float = 0.9
    omega: tuple = (GOLDEN_MEAN,)
    tau: float = 1.0
    alpha: float = -1.0
    a: int = 5
    resolution: int = 256
    K_probe: int = 10000

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        if self.A <= 0:
            raise ValueError("A must be positive")
        if self.N < 0:
            raise ValueError("order N must be nonnegative")
        if self.r0 < 0:
            raise ValueError("r0 must be nonnegative")
        if self.r0 > 0 and self.resolution < 64:
            raise ValueError("scan resolution must be at least 64")

    @property
    def factor(self):
        return ConformalFactorModel(self.alpha, self.a)

    def as_dict(self):
        return {
            "A": self.A, "N": self.N, "r0": self.r0, "omega": list(self.omega), "tau": self.tau,
            "alpha": self.alpha, "a": self.a, "resolution": self.resolution, "K_probe": self.K_probe,
        }


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Rows run over ``Im eps``, columns over ``Re eps`` (real part fastest)."""

    spec: DomainScanSpec
    re: np.ndarray
    im: np.ndarray
    member: np.ndarray
    log_margin: np.ndarray

    @property
    def eps(self):
        return self.re[None, :] + 1j * self.im[:, None]


def domain_scan(spec, jobs=1, chunk_rows=16):
    """Membership mask and ``log10(nu |lam - 1|^{N+1} / A)`` over the raster."""
    if spec.r0 == 0:
        empty = np.zeros((0, 0))
        return ScanResult(spec, np.zeros(0), np.zeros(0), empty.astype(bool), empty)
    axis = np.linspace(-spec.r0, spec.r0, spec.resolution)
    eps = axis[None, :] + 1j * axis[:, None]
    lam = spec.factor.lambda_of_eps(eps)
    dd = DiophantineData(spec.omega, spec.tau, spec.K_probe)

    def rows(start):
        block = lam[start:start + chunk_rows]
        nu = nu_estimate_many(dd, block)
        with np.errstate(divide="ignore"):
            return np.log10(nu) + (spec.N + 1) * np.log10(np.abs(block - 1.0)) - np.log10(spec.A)

    starts = list(range(0, spec.resolution, chunk_rows))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(rows, starts))
    else:
        parts = [rows(s) for s in starts]
    margin = np.concatenate(parts, axis=0)
    # nu = inf at an exact resonance dominates even |lam - 1| = 0
    margin = np.where(np.isnan(margin), np.inf, margin)
    # cells outside the disk are excluded by definition
    margin = np.where(np.abs(eps) <= spec.r0, margin, np.inf)
    member = margin <= 0
    return ScanResult(spec, axis, axis.copy(), member, margin)


def resonance_centers(spec, k_max=50):
    """Points with ``lam(eps) = exp(2 pi i k omega)`` for ``1 <= |k| <= k_max`` inside the scan disk."""
    out = []
    w = spec.omega[0]
    for k in range(-k_max, k_max + 1):
        if k == 0:
            continue
        target = (np.exp(2j * np.pi * k * w) - 1.0) / spec.alpha
        r = abs(target) ** (1.0 / spec.a)
        base = np.angle(target) / spec.a
        for m in range(spec.a):
            z = r * np.exp(1j * (base + 2 * np.pi * m / spec.a))
            if abs(z) <= spec.r0:
                out.append((k, z))
    return out


@dataclass(frozen=True, eq=False)
class ContinuationResult:
    solutions: list
    eps: list
    failed_eps: float = None
    error: str = None
    newton_steps: list = field(default_factory=list)

    @property
    def ok(self):
        return self.failed_eps is None

    @property
    def last_good_eps(self):
        return self.eps[-1] if self.eps else None


def continuation_run(f, base, eps_path, tol=1e-11, order=2, expansion=None, max_iter=20, L0=60, callback=None):
    """Solve along ``eps_path`` with Lindstedt predictors and the Newton corrector.

    Stops at the first failing leg; the legs before it are kept.
    """
    eps_path = [float(e) for e in eps_path]
    if not eps_path or eps_path[0] != 0.0:
        raise ValueError("continuation path must start at eps = 0")
    f0 = f.at(0.0)
    base = prepare(f0, base)
    sols, done, steps = [base], [0.0], [0]
    if callback is not None:
        callback(0.0, base)
    if len(eps_path) == 1:
        return ContinuationResult(sols, done, newton_steps=steps)
    expansion = expansion or expand(f, base, order)
    for eps in eps_path[1:]:
        try:
            pred = expansion.evaluate(eps).with_(splitting=sols[-1].splitting, rates=sols[-1].rates)
            sol = solve_torus(f.at(eps), pred, tol=tol, max_iter=max_iter, L0=L0)
        except (KamError, WkamError) as err:
            log.warning("continuation leg eps=%r failed: %s", eps, err)
            return ContinuationResult(sols, done, eps, str(err), steps)
        sols.append(sol)
        done.append(eps)
        steps.append(len(sol.history))
        if callback is not None:
            callback(eps, sol)
    return ContinuationResult(sols, done, newton_steps=steps)
