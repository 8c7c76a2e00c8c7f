"""Conformally symplectic map families.

Phase space is ``T^n x R^n`` with coordinates ``(angles, actions)``; the
angles are handled on the lift (no reduction mod 1) so that embeddings of
rotational tori can be written as ``theta -> theta + periodic``.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import taylor
from .errors import ConfigError, TaylorDepthError
from .taylor import Taylor

TWO_PI = 2.0 * np.pi


def standard_J(n):
    """Matrix of ``sum_i dx_i ^ dp_i`` in coordinates ``(x_1..x_n, p_1..p_n)``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class ConformalFactorModel:
    """``lambda(eps) = 1 + alpha * eps**a``."""

    alpha: complex = -1.0
    a: int = 3

    def __post_init__(self):
        if int(self.a) != self.a or self.a < 1:
            raise ValueError("leading order a must be a positive integer")
        if self.alpha == 0:
            raise ValueError("alpha must be nonzero")

    @property
    def coefficients(self):
        c = [0.0] * (self.a + 1)
        c[0] = 1.0
        c[self.a] = self.alpha
        return c

    def lambda_of_eps(self, eps):
        return 1.0 + self.alpha * np.asarray(eps) ** self.a


class ConformalMapFamily:
    """Interface for families ``f_{mu, eps}`` with ``f^* Omega = lambda(eps) Omega``.

    Subclasses supply :meth:`apply`, :meth:`jacobian`, :meth:`mu_derivative`
    and :meth:`lam`; :meth:`apply_taylor` is needed only for Lindstedt
    expansions.  Points are arrays whose last axis has length ``2n``.
    """

    n = 1
    d = 1

    def lam(self, eps):
        raise NotImplementedError

    def lam_coefficients(self):
        """Power-series coefficients of ``lambda(eps)`` around ``eps = 0``."""
        raise NotImplementedError

    def apply(self, mu, eps, x):
        raise NotImplementedError

    def jacobian(self, mu, eps, x):
        raise NotImplementedError

    def mu_derivative(self, mu, eps, x):
        raise NotImplementedError

    def eps_derivative(self, mu, eps, x):
        raise NotImplementedError

    def at(self, eps):
        """The same family with the coupling parameter set to ``eps``."""
        raise NotImplementedError

    def apply_taylor(self, mu, eps, x):
        raise TaylorDepthError(f"{type(self).__name__} does not provide Taylor-mode evaluation")

    def J(self, x):
        x = np.asarray(x)
        return np.broadcast_to(standard_J(self.n), x.shape[:-1] + (2 * self.n, 2 * self.n))

    def in_domain(self, x):
        return np.all(np.isfinite(x), axis=-1)


@dataclass(frozen=True)
class DissipativeStandardFamily(ConformalMapFamily):
    """Two coupled dissipative standard maps on ``T^2 x R^2``, coordinates ``(x, y, p, q)``.

    ``p' = lam p + mu + eps_c/2pi sin 2pi x + eps/2pi sin 2pi(x+y)``,
    ``q' = lam q + c/2pi sin 2pi y + eps/2pi sin 2pi(x+y)``,
    ``x' = x + p'``, ``y' = y + q'``.

    The kick is a gradient, so the map is conformally symplectic with factor
    ``lam`` for ``Omega = dx^dp + dy^dq``.  When ``factor`` is set the
    conformal factor follows ``factor.lambda_of_eps(eps)`` instead of ``lam``.
    """

    lam0: float = 0.9
    c: float = 1.5
    eps_c: float = 0.0
    eps: float = 0.0
    factor: ConformalFactorModel = None

    n = 2
    d = 1

    def lam(self, eps=None):
        eps = self.eps if eps is None else eps
        if self.factor is not None:
            return self.factor.lambda_of_eps(eps)
        return self.lam0

    def lam_coefficients(self):
        return self.factor.coefficients if self.factor is not None else [self.lam0]

    def uncoupled(self):
        return replace(self, eps_c=0.0, eps=0.0)

    def at(self, eps):
        return replace(self, eps=float(eps))

    def _kernel(self, mu, eps, lam, x, y, p, q, sin):
        s_xy = sin(TWO_PI * (x + y)) * (1.0 / TWO_PI)
        p1 = lam * p + mu + (self.eps_c / TWO_PI) * sin(TWO_PI * x) + eps * s_xy
        q1 = lam * q + (self.c / TWO_PI) * sin(TWO_PI * y) + eps * s_xy
        return x + p1, y + q1, p1, q1

    def apply(self, mu, eps, x):
        x = np.asarray(x, dtype=float)
        mu = float(np.atleast_1d(mu)[0])
        out = self._kernel(mu, eps, self.lam(eps), x[..., 0], x[..., 1], x[..., 2], x[..., 3], np.sin)
        return np.stack(out, axis=-1)

    def _hessian(self, eps, x):
        cxy = eps * np.cos(TWO_PI * (x[..., 0] + x[..., 1]))
        hxx = self.eps_c * np.cos(TWO_PI * x[..., 0]) + cxy
        hyy = self.c * np.cos(TWO_PI * x[..., 1]) + cxy
        return hxx, cxy, hyy

    def jacobian(self, mu, eps, x):
        x = np.asarray(x, dtype=float)
        lam = self.lam(eps)
        hxx, hxy, hyy = self._hessian(eps, x)
        out = np.zeros(x.shape[:-1] + (4, 4))
        # p', q' rows
        out[..., 2, 0], out[..., 2, 1], out[..., 2, 2] = hxx, hxy, lam
        out[..., 3, 0], out[..., 3, 1], out[..., 3, 3] = hxy, hyy, lam
        out[..., 0, :] = out[..., 2, :]
        out[..., 1, :] = out[..., 3, :]
        out[..., 0, 0] += 1.0
        out[..., 1, 1] += 1.0
        return out

    def mu_derivative(self, mu, eps, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 1))
        out[..., 0, 0] = 1.0
        out[..., 2, 0] = 1.0
        return out

    def eps_derivative(self, mu, eps, x):
        x = np.asarray(x, dtype=float)
        s_xy = np.sin(TWO_PI * (x[..., 0] + x[..., 1])) / TWO_PI
        dlam = 0.0
        if self.factor is not None:
            a = self.factor.a
            dlam = a * self.factor.alpha * eps ** (a - 1)
        dp = dlam * x[..., 2] + s_xy
        dq = dlam * x[..., 3] + s_xy
        return np.stack([dp, dq, dp, dq], axis=-1)

    def apply_taylor(self, mu, eps, x):
        """Evaluate on Taylor-expanded arguments.

        ``mu`` has coefficients of shape ``(order+1, d)``, ``eps`` is a scalar
        :class:`~wkam.taylor.Taylor` and ``x`` has coefficients of shape
        ``(order+1, ..., 4)``.
        """
        pad = (1,) * (x.c.ndim - 2)
        mu_t = Taylor(mu.c[:, 0].reshape((-1,) + pad))
        eps_t = Taylor(eps.c.reshape((-1,) + pad))
        lam_t = taylor.polyval(self.lam_coefficients(), eps_t)
        out = self._kernel(mu_t, eps_t, lam_t, x[..., 0], x[..., 1], x[..., 2], x[..., 3], taylor.sin)
        return taylor.stack(out)


def default_family(params=None):
    """Build the default coupled family from ``{lam, c, eps_c, eps[, alpha, a]}``."""
    params = dict(params or {})
    lam = float(params.get("lam", 0.9))
    c = float(params.get("c", 1.5))
    eps_c = float(params.get("eps_c", 0.0))
    eps = float(params.get("eps", 0.0))
    alpha, a = params.get("alpha"), params.get("a")
    factor = None
    if alpha is not None or a is not None:
        if alpha is None or a is None:
            raise ConfigError("conformal factor model needs both 'alpha' and 'a'")
        factor = ConformalFactorModel(alpha=float(alpha), a=int(a))
    elif not 0.0 < lam < 1.0:
        raise ConfigError(f"lam must lie in (0, 1), got {lam}")
    if not c > 0:
        raise ConfigError(f"c must be positive, got {c}")
    return DissipativeStandardFamily(lam0=lam, c=c, eps_c=eps_c, eps=eps, factor=factor)


def conformal_residuals(f, mu, eps, samples, lam=None):
    """Per-sample spectral norms of ``Df^T J(f(x)) Df - lam J(x)``."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("need at least one sample point")
    lam = f.lam(eps) if lam is None else lam
    Df = f.jacobian(mu, eps, samples)
    Jf = f.J(f.apply(mu, eps, samples))
    res = np.swapaxes(Df, -1, -2) @ Jf @ Df - lam * f.J(samples)
    return np.linalg.norm(res, ord=2, axis=(-2, -1))


def verify_conformal(f, mu, eps, samples, lam=None):
    """Max over ``samples`` of ``|Df^T J(f(x)) Df - lam J(x)|_2``."""
    return float(np.max(conformal_residuals(f, mu, eps, samples, lam)))


def numeric_jacobian_check(f, mu, eps, point, h=1e-6):
    """Largest relative deviation between central differences and the coded derivatives.

    Covers the Jacobian, the ``mu``-derivative and the ``eps``-derivative.
    """
    if not 1e-8 <= h <= 1e-4:
        raise ValueError("h must lie in [1e-8, 1e-4]")
    point = np.asarray(point, dtype=float)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    dim = point.shape[-1]
    fd = np.empty((dim, dim))
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        fd[:, i] = (f.apply(mu, eps, point + e) - f.apply(mu, eps, point - e)) / (2 * h)
    fd_mu = np.empty((dim, len(mu)))
    for i in range(len(mu)):
        e = np.zeros(len(mu))
        e[i] = h
        fd_mu[:, i] = (f.apply(mu + e, eps, point) - f.apply(mu - e, eps, point)) / (2 * h)
    fd_eps = (f.apply(mu, eps + h, point) - f.apply(mu, eps - h, point)) / (2 * h)

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))

    return max(
        rel(fd, f.jacobian(mu, eps, point)),
        rel(fd_mu, f.mu_derivative(mu, eps, point)),
        rel(fd_eps, f.eps_derivative(mu, eps, point)),
    )


def sample_points(f, count, rng, action_scale=1.0):
    """Random phase-space points: angles uniform in [0, 1), actions normal."""
    x = rng.uniform(0.0, 1.0, size=(count, f.n))
    p = action_scale * rng.standard_normal(size=(count, f.n))
    return np.concatenate([x, p], axis=1)
