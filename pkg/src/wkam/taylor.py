"""Truncated power series in one scalar variable, vectorized over trailing array axes.

``Taylor(c)`` represents ``sum_j c[j] t^j`` with ``c`` of shape ``(order+1, ...)``.
Only the operations needed to push a map family through ``t``-expansions are
provided: ring arithmetic, ``sin``/``cos`` and component indexing.
"""

import numpy as np


class Taylor:
    __array_priority__ = 200

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def constant(cls, value, order):
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, value, order):
        """The expansion variable itself around ``value``: ``value + t``."""
        c = np.zeros(order + 1)
        c[0] = value
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self):
        return self.c.shape[0] - 1

    def _lift(self, other):
        if isinstance(other, Taylor):
            return other
        other = np.asarray(other, dtype=float)
        c = np.zeros((self.order + 1,) + other.shape)
        c[0] = other
        return Taylor(c)

    def __add__(self, other):
        other = self._lift(other)
        a, b = _aligned(self.c, other.c)
        n = min(a.shape[0], b.shape[0])
        return Taylor(a[:n] + b[:n])

    __radd__ = __add__

    def __neg__(self):
        return Taylor(-self.c)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            other = np.asarray(other, dtype=float)
            a, b = _aligned(self.c, other[None])
            return Taylor(a * b)
        n = min(self.order, other.order)
        a, b = self.c[: n + 1], other.c[: n + 1]
        shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
        out = np.zeros((n + 1,) + shape)
        for j in range(n + 1):
            for i in range(j + 1):
                out[j] += a[i] * b[j - i]
        return Taylor(out)

    __rmul__ = __mul__

    def __getitem__(self, index):
        index = index if isinstance(index, tuple) else (index,)
        return Taylor(self.c[(slice(None),) + index])

    def sincos(self):
        u = self.c
        s = np.zeros_like(u)
        co = np.zeros_like(u)
        s[0], co[0] = np.sin(u[0]), np.cos(u[0])
        for n in range(1, self.order + 1):
            for k in range(1, n + 1):
                s[n] += k * u[k] * co[n - k]
                co[n] -= k * u[k] * s[n - k]
            s[n] /= n
            co[n] /= n
        return Taylor(s), Taylor(co)


def _aligned(a, b):
    """Insert axes after the order axis so value shapes broadcast from the right."""
    na, nb = a.ndim, b.ndim
    if na < nb:
        a = a.reshape(a.shape[:1] + (1,) * (nb - na) + a.shape[1:])
    elif nb < na:
        b = b.reshape(b.shape[:1] + (1,) * (na - nb) + b.shape[1:])
    return a, b


def stack(parts, axis=-1):
    """Stack Taylor components along a new trailing axis."""
    return Taylor(np.stack([p.c for p in parts], axis=axis))


def sin(x):
    if isinstance(x, Taylor):
        return x.sincos()[0]
    return np.sin(x)


def cos(x):
    if isinstance(x, Taylor):
        return x.sincos()[1]
    return np.cos(x)


def polyval(coeffs, t):
    """Evaluate ``sum_j coeffs[j] t^j`` for floats, complex arrays or :class:`Taylor` ``t``."""
    out = 0.0
    for a in reversed(list(coeffs)):
        out = out * t + a
    return out
