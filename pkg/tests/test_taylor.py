import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wkam.models import default_family
from wkam.taylor import Taylor, cos, polyval, sin, stack


def test_product_matches_polynomial_product():
    a = Taylor(np.array([1.0, 2.0, 3.0]))
    b = Taylor(np.array([0.5, -1.0, 4.0]))
    assert np.allclose((a * b).c, np.polynomial.polynomial.polymul([1, 2, 3], [0.5, -1, 4])[:3])


def test_sin_cos_of_variable():
    t = Taylor.variable(0.3, 5)
    s, c = sin(t).c, cos(t).c
    # derivatives of sin at 0.3 divided by j!
    fact = np.array([1, 1, 2, 6, 24, 120], dtype=float)
    ders_s = np.array([np.sin(0.3), np.cos(0.3), -np.sin(0.3), -np.cos(0.3), np.sin(0.3), np.cos(0.3)])
    ders_c = np.array([np.cos(0.3), -np.sin(0.3), -np.cos(0.3), np.sin(0.3), np.cos(0.3), -np.sin(0.3)])
    assert np.allclose(s, ders_s / fact, atol=1e-15)
    assert np.allclose(c, ders_c / fact, atol=1e-15)


def test_broadcast_from_the_right():
    a = Taylor(np.ones((3, 1)))
    b = Taylor(np.ones(3))
    assert (a + b).c.shape == (3, 1)


def test_polyval_and_stack():
    t = Taylor.variable(0.0, 4)
    p = polyval([1.0, 0.0, 0.0, -1.0], t)
    assert np.allclose(p.c, [1, 0, 0, -1, 0])
    assert stack([t, p]).c.shape == (5, 2)


def test_family_taylor_matches_derivatives():
    f = default_family({"eps_c": 0.05})
    rng = np.random.default_rng(0)
    x0 = rng.uniform(size=(7, 4))
    x1 = rng.standard_normal((7, 4))
    order = 3
    xc = np.zeros((order + 1, 7, 4))
    xc[0], xc[1] = x0, x1
    mu = Taylor(np.array([[0.1], [0.02], [0.0], [0.0]]))
    F = f.apply_taylor(mu, Taylor.variable(0.0, order), Taylor(xc))

    def path(e):
        return f.apply([0.1 + 0.02 * e], e, x0 + e * x1)

    h = 1e-4
    assert np.allclose(F.c[0], path(0.0), atol=1e-15)
    assert np.allclose(F.c[1], (path(h) - path(-h)) / (2 * h), atol=1e-7)
    assert np.allclose(F.c[2], (path(h) - 2 * path(0.0) + path(-h)) / (2 * h * h), atol=1e-5)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_product_commutes(a, b):
    x, y = Taylor(np.array(a)), Taylor(np.array(b))
    assert np.allclose((x * y).c, (y * x).c)


@given(st.floats(-3, 3))
def test_pythagoras(v):
    t = Taylor.variable(v, 6)
    one = sin(t) * sin(t) + cos(t) * cos(t)
    assert one.c[0] == pytest.approx(1.0) and np.max(np.abs(one.c[1:])) < 1e-13
