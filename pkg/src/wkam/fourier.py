"""Truncated Fourier series on the d-torus with vector or matrix values.

A :class:`FourierSeries` holds the coefficients ``c_k`` for ``|k|_inf <= K_max``
of a function ``f(theta) = sum_k c_k exp(2 pi i k.theta)`` with
``theta in R^d / Z^d``.  Coefficients are stored densely, axis ``j`` of the
coefficient array running over ``k_j = -K_max .. K_max``, followed by the value
axes.  Nonlinear operations are carried out on a uniform grid with ``N_g``
nodes per dimension and transformed back, keeping only ``|k|_inf <= K_max``.
"""

import json
import struct

import numpy as np
import scipy.fft as sfft

from .errors import SingularMatrixError

_MAGIC = b"WKFS"
_VERSION = 1


def default_grid_size(K_max):
    return sfft.next_fast_len(2 * K_max + 2)


def grid_points(N, d=1):
    """Nodes ``j / N`` of the uniform grid, shape ``(N,)*d + (d,)``."""
    axes = [np.arange(N) / N] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def mode_indices(K_max, d=1):
    """Multi-indices ``k`` laid out like the coefficient array, shape ``(2K+1,)*d + (d,)``."""
    axes = [np.arange(-K_max, K_max + 1)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


class FourierSeries:
    """Immutable truncated Fourier series.

    Parameters
    ----------
    coeffs : array_like
        Complex coefficients of shape ``(2K+1,)*d + value_shape``.
    d : int
        Torus dimension.
    grid_size : int, optional
        Number of grid nodes per dimension used for transforms.  Defaults to
        the next efficient FFT length at or above ``2 K_max + 2``.
    """

    __array_priority__ = 100

    def __init__(self, coeffs, d=1, grid_size=None):
        coeffs = np.array(coeffs, dtype=complex)
        if d < 1 or coeffs.ndim < d:
            raise ValueError("coefficient array has fewer axes than the torus dimension")
        n_modes = coeffs.shape[0]
        if n_modes % 2 != 1 or any(s != n_modes for s in coeffs.shape[:d]):
            raise ValueError(f"coefficient axes must all have odd length 2K+1, got {coeffs.shape[:d]}")
        self.d = d
        self.K_max = (n_modes - 1) // 2
        self.value_shape = coeffs.shape[d:]
        self.grid_size = default_grid_size(self.K_max) if grid_size is None else int(grid_size)
        if self.grid_size < 2 * self.K_max + 1:
            raise ValueError(f"grid size {self.grid_size} < 2*K_max+1 = {2 * self.K_max + 1}")
        coeffs.setflags(write=False)
        self.coeffs = coeffs

    # construction

    @classmethod
    def zeros(cls, value_shape=(), K_max=0, d=1, grid_size=None):
        shape = (2 * K_max + 1,) * d + tuple(value_shape)
        return cls(np.zeros(shape, dtype=complex), d, grid_size)

    @classmethod
    def constant(cls, value, K_max=0, d=1, grid_size=None):
        value = np.asarray(value, dtype=complex)
        out = np.zeros((2 * K_max + 1,) * d + value.shape, dtype=complex)
        out[(K_max,) * d] = value
        return cls(out, d, grid_size)

    @classmethod
    def from_modes(cls, modes, K_max, d=1, value_shape=(), grid_size=None):
        """Build a series from a ``{k: value}`` mapping (``k`` an int or a d-tuple)."""
        out = np.zeros((2 * K_max + 1,) * d + tuple(value_shape), dtype=complex)
        for k, v in modes.items():
            k = (k,) if np.isscalar(k) else tuple(k)
            if len(k) != d or max(abs(int(c)) for c in k) > K_max:
                raise ValueError(f"mode {k} outside the truncation |k| <= {K_max}")
            out[tuple(int(c) + K_max for c in k)] = v
        return cls(out, d, grid_size)

    @classmethod
    def from_grid(cls, values, K_max, d=1):
        """Transform grid samples to coefficients, discarding modes above ``K_max``."""
        values = np.asarray(values)
        if values.ndim < d:
            raise ValueError("grid array has fewer axes than the torus dimension")
        N = values.shape[0]
        if any(s != N for s in values.shape[:d]):
            raise ValueError(f"non-uniform grid shape {values.shape[:d]}")
        if N < 2 * K_max + 1:
            raise ValueError(f"grid with {N} nodes cannot resolve K_max={K_max}")
        axes = tuple(range(d))
        spec = sfft.fftn(values, axes=axes, norm="forward")
        idx = np.arange(-K_max, K_max + 1) % N
        return cls(spec[np.ix_(*[idx] * d)], d, N)

    # basic queries

    @property
    def shape(self):
        return self.value_shape

    def _compatible(self, other):
        if self.d != other.d or self.K_max != other.K_max or self.grid_size != other.grid_size:
            raise ValueError(
                f"incompatible series: (d, K_max, N_g) = {(self.d, self.K_max, self.grid_size)} "
                f"vs {(other.d, other.K_max, other.grid_size)}"
            )

    def _new(self, coeffs):
        return FourierSeries(coeffs, self.d, self.grid_size)

    def mean(self):
        return self.coeffs[(self.K_max,) * self.d]

    def zero_mean(self):
        out = self.coeffs.copy()
        out[(self.K_max,) * self.d] = 0.0
        return self._new(out)

    def coefficient(self, k):
        k = (k,) if np.isscalar(k) else tuple(k)
        return self.coeffs[tuple(int(c) + self.K_max for c in k)]

    def _flipped(self):
        return self.coeffs[(slice(None, None, -1),) * self.d]

    def conjugate_symmetry_defect(self):
        """Largest ``|c_{-k} - conj(c_k)|``; zero for real-valued series."""
        if self.coeffs.size == 0:
            return 0.0
        return float(np.max(np.abs(self._flipped() - self.coeffs.conj())))

    def is_real(self, tol=1e-12):
        return self.conjugate_symmetry_defect() <= tol

    def real_part(self):
        return self._new(0.5 * (self.coeffs + self._flipped().conj()))

    def resized(self, K_max, grid_size=None):
        """Pad with zeros or truncate to a new ``K_max``."""
        out = np.zeros((2 * K_max + 1,) * self.d + self.value_shape, dtype=complex)
        m = min(K_max, self.K_max)
        dst = tuple(slice(K_max - m, K_max + m + 1) for _ in range(self.d))
        src = tuple(slice(self.K_max - m, self.K_max + m + 1) for _ in range(self.d))
        out[dst] = self.coeffs[src]
        return FourierSeries(out, self.d, grid_size)

    # transforms

    def eval_grid(self, real=False):
        """Values on the uniform grid ``j / N_g``, shape ``(N_g,)*d + value_shape``."""
        N, K = self.grid_size, self.K_max
        buf = np.zeros((N,) * self.d + self.value_shape, dtype=complex)
        idx = np.arange(-K, K + 1) % N
        buf[np.ix_(*[idx] * self.d)] = self.coeffs
        values = sfft.ifftn(buf, axes=tuple(range(self.d)), norm="forward")
        return values.real if real else values

    def evaluate(self, theta, real=False):
        """Direct summation at arbitrary points ``theta`` of shape ``(m, d)`` (or ``(m,)`` for d=1)."""
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 1 and self.d == 1:
            theta = theta[:, None]
        ks = mode_indices(self.K_max, self.d).reshape(-1, self.d)
        phase = np.exp(2j * np.pi * theta @ ks.T)
        flat = self.coeffs.reshape(len(ks), -1)
        values = (phase @ flat).reshape((theta.shape[0],) + self.value_shape)
        return values.real if real else values

    def shift(self, omega):
        """Composition with the rotation ``theta -> theta + omega``."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        ks = mode_indices(self.K_max, self.d)
        phase = np.exp(2j * np.pi * (ks @ omega))
        return self._new(self.coeffs * phase.reshape(phase.shape + (1,) * len(self.value_shape)))

    def derivative(self, j=0):
        if not 0 <= j < self.d:
            raise ValueError(f"coordinate index {j} out of range for d={self.d}")
        k = mode_indices(self.K_max, self.d)[..., j]
        factor = 2j * np.pi * k
        return self._new(self.coeffs * factor.reshape(factor.shape + (1,) * len(self.value_shape)))

    def norm(self, rho=0.0):
        return norm_rho(self, rho)

    # arithmetic

    def __add__(self, other):
        if isinstance(other, FourierSeries):
            self._compatible(other)
            return self._new(self.coeffs + other.coeffs)
        return self + FourierSeries.constant(np.broadcast_to(other, self.value_shape), self.K_max, self.d, self.grid_size)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierSeries):
            return pointwise_apply(np.multiply, self, other)
        if np.ndim(other) == 0:
            return self._new(self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._new(self.coeffs / scalar)

    def __matmul__(self, other):
        return pointwise_apply(np.matmul, self, other)

    def __getitem__(self, index):
        """Index into the value axes, e.g. ``s[0]`` or ``s[:, 1:3]``."""
        index = index if isinstance(index, tuple) else (index,)
        return self._new(self.coeffs[(slice(None),) * self.d + index])

    def __repr__(self):
        return f"FourierSeries(d={self.d}, K_max={self.K_max}, N_g={self.grid_size}, value_shape={self.value_shape})"

    # serialization

    def to_json_dict(self):
        ks = mode_indices(self.K_max, self.d).reshape(-1, self.d)
        flat = self.coeffs.reshape(len(ks), -1)
        rows = []
        for k, block in zip(ks, flat):
            if not np.any(block):
                continue
            if self.value_shape == ():
                rows.append([*map(int, k), float(block[0].real), float(block[0].imag)])
            else:
                rows.append([*map(int, k), block.real.tolist(), block.imag.tolist()])
        return {
            "d": self.d,
            "value_shape": list(self.value_shape),
            "K_max": self.K_max,
            "N_g": self.grid_size,
            "coeffs": rows,
        }

    @classmethod
    def from_json_dict(cls, obj):
        d, K = int(obj["d"]), int(obj["K_max"])
        value_shape = tuple(obj["value_shape"])
        out = np.zeros((2 * K + 1,) * d + value_shape, dtype=complex)
        for row in obj["coeffs"]:
            k, re, im = row[:d], row[d], row[d + 1]
            block = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
            out[tuple(int(c) + K for c in k)] = block.reshape(value_shape)
        return cls(out, d, obj.get("N_g"))

    def to_json(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_json_dict(json.loads(text))

    def to_bytes(self):
        """Little-endian binary form.

        Layout: ``b"WKFS"``, version (u8), d (u8), number of value axes (u8),
        value dims (u32 each), K_max (u32), N_g (u32), then the dense
        coefficient array as complex128 in C order.
        """
        head = _MAGIC + struct.pack("<BBB", _VERSION, self.d, len(self.value_shape))
        head += struct.pack(f"<{len(self.value_shape)}I", *self.value_shape)
        head += struct.pack("<II", self.K_max, self.grid_size)
        return head + self.coeffs.astype("<c16").tobytes()

    @classmethod
    def from_bytes(cls, data, offset=0):
        """Inverse of :meth:`to_bytes`.  Returns ``(series, bytes_consumed)`` when ``offset`` is given."""
        start = offset
        if data[offset:offset + 4] != _MAGIC:
            raise ValueError("not a WKFS series (bad magic)")
        version, d, nv = struct.unpack_from("<BBB", data, offset + 4)
        if version != _VERSION:
            raise ValueError(f"unsupported WKFS version {version}")
        offset += 7
        value_shape = struct.unpack_from(f"<{nv}I", data, offset)
        offset += 4 * nv
        K, N = struct.unpack_from("<II", data, offset)
        offset += 8
        count = (2 * K + 1) ** d * int(np.prod(value_shape, dtype=int))
        coeffs = np.frombuffer(data, dtype="<c16", count=count, offset=offset)
        offset += 16 * count
        series = cls(coeffs.reshape((2 * K + 1,) * d + tuple(value_shape)).astype(complex), d, N)
        return series, offset - start


def eval_grid(s, real=False):
    return s.eval_grid(real=real)


def from_grid(values, K_max, d=1):
    return FourierSeries.from_grid(values, K_max, d)


def shift(s, omega):
    return s.shift(omega)


def derivative(s, j=0):
    return s.derivative(j)


def shift_grid(values, omega, d=1):
    """Grid samples of ``g(theta + omega)`` from samples of ``g``, by trigonometric interpolation.

    Uses every resolvable mode of the grid (the Nyquist mode of an even grid
    is dropped), so no truncation to a series ``K_max`` takes place.
    """
    values = np.asarray(values)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    N = values.shape[0]
    axes = tuple(range(d))
    spec = sfft.fftn(values, axes=axes, norm="forward")
    k = np.rint(sfft.fftfreq(N, 1.0 / N)).astype(int)
    if N % 2 == 0:
        keep = np.abs(k) < N // 2
    else:
        keep = np.ones(N, dtype=bool)
    phase = np.ones((N,) * d, dtype=complex)
    for j in range(d):
        shape = [1] * d
        shape[j] = N
        phase = phase * np.where(keep, np.exp(2j * np.pi * k * omega[j]), 0.0).reshape(shape)
    out = sfft.ifftn(spec * phase.reshape(phase.shape + (1,) * (values.ndim - d)), axes=axes, norm="forward")
    return out.real if np.isrealobj(values) else out


def norm_rho(s, rho=0.0):
    """Weighted l1 majorant ``sum_k |c_k| exp(2 pi |k|_1 rho)`` of the sup norm on the complex strip.

    Vector values combine component norms in the Euclidean way; matrix values
    use the largest singular value of the matrix of entry norms.  Returns
    ``inf`` when a weighted term overflows.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    ks = mode_indices(s.K_max, s.d)
    k1 = np.abs(ks).sum(axis=-1).astype(float)
    mag = np.abs(s.coeffs)
    with np.errstate(divide="ignore"):
        log_terms = np.log(mag) + (2 * np.pi * rho * k1).reshape(k1.shape + (1,) * len(s.value_shape))
    if np.any(log_terms > np.log(np.finfo(float).max)):
        return np.inf
    entry = np.exp(log_terms).sum(axis=tuple(range(s.d)))
    if not np.all(np.isfinite(entry)):
        return np.inf
    if entry.ndim == 0:
        return float(entry)
    if entry.ndim == 1:
        return float(np.sqrt(np.sum(entry**2)))
    if entry.ndim == 2:
        return float(np.linalg.norm(entry, 2))
    raise ValueError(f"norm undefined for value shape {s.value_shape}")


def pointwise_apply(op, *args, K_max=None):
    """Apply a grid-level function to the samples of ``args`` and transform back.

    Non-series arguments are passed through unchanged.  The result is exact at
    the grid nodes; truncation to ``K_max`` (default: that of the first
    series) is the only approximation.
    """
    series = [a for a in args if isinstance(a, FourierSeries)]
    if not series:
        raise ValueError("pointwise_apply needs at least one FourierSeries argument")
    ref = series[0]
    for s in series[1:]:
        if s.d != ref.d or s.grid_size != ref.grid_size:
            raise ValueError("pointwise operands must share torus dimension and grid size")
    grids = [a.eval_grid() if isinstance(a, FourierSeries) else a for a in args]
    out = op(*grids)
    res = FourierSeries.from_grid(out, ref.K_max if K_max is None else K_max, ref.d)
    return res


def check_conditioning(matrices, cond_max):
    """Raise :class:`SingularMatrixError` if any stacked matrix exceeds ``cond_max``."""
    flat = matrices.reshape((-1,) + matrices.shape[-2:])
    cond = np.linalg.cond(flat)
    bad = np.flatnonzero(~(cond < cond_max))
    if bad.size:
        node = np.unravel_index(bad[0], matrices.shape[:-2])
        raise SingularMatrixError(tuple(int(i) for i in node), float(cond[bad[0]]))
    return float(np.max(cond)) if cond.size else 1.0


def inverse(s, cond_max=1e12):
    """Pointwise matrix inverse of a square-matrix-valued series."""
    vals = s.eval_grid()
    check_conditioning(vals, cond_max)
    return FourierSeries.from_grid(np.linalg.inv(vals), s.K_max, s.d)
