"""Twisted cohomological equations ``lam * w - w o T_omega = eta`` and Diophantine constants."""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .errors import NonZeroAverage, ResonanceError, SmallDivisorOverflow
from .fourier import FourierSeries, mode_indices

log = logging.getLogger(__name__)

RESONANCE_TOL = 1e-10
DIVISOR_FLOOR = 1e-14
NEAR_RESONANCE_FLAG = 1e-6

GOLDEN_MEAN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DiophantineData:
    omega: tuple
    tau: float = 1.0
    K_probe: int = 100

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        if self.tau <= 0:
            raise ValueError("Diophantine exponent tau must be positive")
        if self.K_probe < 1:
            raise ValueError("K_probe must be at least 1")

    @property
    def d(self):
        return len(self.omega)


def _probe_modes(d, K_probe):
    """Nonzero multi-indices with ``|k|_inf <= K_probe``, shape ``(m, d)``."""
    if d == 1:
        k = np.arange(1, K_probe + 1)
        return np.concatenate([-k[::-1], k])[:, None]
    ks = np.array([k for k in itertools.product(range(-K_probe, K_probe + 1), repeat=d) if any(k)])
    return ks


def nu_estimate(dd, lam, raise_on_resonance=True):
    """Truncated ``sup_k |exp(2 pi i k.omega) - lam|^-1 |k|^-tau`` over ``0 < |k|_inf <= K_probe``.

    ``|k|`` is the l1 norm.  An exact hit of the unit-circle point returns ``inf``
    or raises :class:`ResonanceError` naming the offending ``k``.
    """
    ks = _probe_modes(dd.d, dd.K_probe)
    z = np.exp(2j * np.pi * (ks @ np.asarray(dd.omega)))
    dist = np.abs(z - complex(lam))
    weight = np.abs(ks).sum(axis=1).astype(float) ** dd.tau
    hit = dist < DIVISOR_FLOOR
    if np.any(hit):
        if raise_on_resonance:
            i = int(np.argmin(np.where(hit, np.abs(ks).sum(axis=1), np.inf)))
            raise ResonanceError(ks[i], float(dist[i]))
        return np.inf
    return float(np.max(1.0 / (dist * weight)))


def nu_estimate_many(dd, lams, chunk=256):
    """Vectorized :func:`nu_estimate` over an array of ``lam`` values; resonances give ``inf``."""
    lams = np.asarray(lams, dtype=complex)
    flat = lams.ravel()
    ks = _probe_modes(dd.d, dd.K_probe)
    z = np.exp(2j * np.pi * (ks @ np.asarray(dd.omega)))
    weight = np.abs(ks).sum(axis=1).astype(float) ** dd.tau
    out = np.empty(flat.shape, dtype=float)
    for start in range(0, flat.size, chunk):
        block = flat[start:start + chunk]
        scaled = np.abs(z[None, :] - block[:, None]) * weight[None, :]
        m = scaled.min(axis=1)
        with np.errstate(divide="ignore"):
            out[start:start + chunk] = np.where(m < DIVISOR_FLOOR, np.inf, 1.0 / m)
    return out.reshape(lams.shape)


def divisors(lam, omega, K_max, d=1):
    """The array ``lam - exp(2 pi i k.omega)`` laid out like series coefficients."""
    ks = mode_indices(K_max, d)
    return complex(lam) - np.exp(2j * np.pi * (ks @ np.atleast_1d(np.asarray(omega, dtype=float))))


def solve_twisted(lam, dd, eta, zero_avg_normalization=False, resonance_tol=RESONANCE_TOL,
                  avg_tol=1e-10, divisor_floor=DIVISOR_FLOOR):
    """Solve ``lam * w(theta) - w(theta + omega) = eta(theta)`` coefficient-wise.

    With ``zero_avg_normalization`` the returned ``w`` has zero average and only
    the zero-average part of ``eta`` is solved for.  ``lam`` within
    ``resonance_tol`` of 1 requires the flag and an (almost) zero-average ``eta``.
    """
    if not isinstance(eta, FourierSeries):
        raise TypeError("eta must be a FourierSeries")
    if eta.d != dd.d:
        raise ValueError("torus dimension of eta does not match the frequency vector")
    lam = complex(lam)
    near_one = abs(lam - 1.0) < resonance_tol
    if near_one:
        if not zero_avg_normalization:
            raise ValueError("lam = 1 requires zero_avg_normalization=True")
        avg = float(np.max(np.abs(eta.mean()), initial=0.0))
        if avg >= avg_tol:
            raise NonZeroAverage(avg)

    div = divisors(lam, dd.omega, eta.K_max, eta.d)
    center = (eta.K_max,) * eta.d
    coeffs = eta.coeffs
    active = np.abs(coeffs).reshape(div.shape + (-1,)).max(axis=-1) > 0
    if zero_avg_normalization:
        active[center] = False
    small = active & (np.abs(div) < divisor_floor)
    if np.any(small):
        pos = np.argwhere(small)[0]
        raise SmallDivisorOverflow(pos - eta.K_max, float(np.abs(div[tuple(pos)])))
    div_active = np.where(active, np.abs(div), np.inf)
    if div_active.min() < NEAR_RESONANCE_FLAG:
        log.warning("near-resonant divisor %.3e in twisted cohomological equation", div_active.min())

    safe = np.where(active, div, 1.0)
    w = np.where(active.reshape(active.shape + (1,) * len(eta.value_shape)),
                 coeffs / safe.reshape(safe.shape + (1,) * len(eta.value_shape)), 0.0)
    return FourierSeries(w, eta.d, eta.grid_size)


def twisted_residual(lam, omega, w, eta):
    """``lam * w - w o T_omega - eta``."""
    return w * complex(lam) - w.shift(omega) - eta
