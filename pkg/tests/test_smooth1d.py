import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qewarp import smooth1d as S
from qewarp.errors import DivisionByZero, DomainError

s = S.s


def fd_derivatives(fn, x, h=1e-3):
    """Derivatives 1..4 by differencing each jet channel against the one below it.

    Channel ``k+1`` is compared with a Richardson-extrapolated central difference of
    channel ``k``, so every check only ever needs a first-derivative stencil.
    """

    def slope(k, step):
        v = lambda j: float(np.asarray(fn.eval_jet(x + j * step))[k])  # noqa: E731
        return (-v(2) + 8 * v(1) - 8 * v(-1) + v(-2)) / (12 * step)

    return np.array([(16 * slope(k, h / 2) - slope(k, h)) / 15 for k in range(4)])


LIBRARY = [
    ("sin", S.sin(s), (-3.0, 3.0), 1e-3),
    ("cos", S.cos(1.3 * s + 0.2), (-3.0, 3.0), 1e-3),
    ("sinh", S.sinh(s), (-2.0, 2.0), 1e-3),
    ("cosh", S.cosh(0.7 * s), (-2.0, 2.0), 1e-3),
    ("tanh", S.tanh(s), (-2.0, 2.0), 1e-3),
    ("coth", S.coth(s), (0.5, 2.5), 1e-3),
    ("exp", S.exp(-0.5 * s), (-2.0, 2.0), 1e-3),
    ("log", S.log(s), (0.5, 3.0), 1e-3),
    ("power", S.power(s, 2.5), (0.5, 3.0), 1e-3),
    ("quotient", S.sin(s) / (2 + S.cos(s)), (-3.0, 3.0), 1e-3),
    ("composition", S.compose(S.exp(s), S.sin(s)), (-3.0, 3.0), 1e-3),
    ("log_cos", -2 * S.log(S.cos(s)), (-1.0, 1.0), 1e-3),
    ("product", S.sinh(s) * S.log(1 + s * s), (-2.0, 2.0), 1e-3),
]


class TestEvalJet:
    def test_sine_maclaurin(self):
        assert S.eval_jet(S.sin(s), 0.0) == pytest.approx((0, 1, 0, -1, 0), abs=1e-15)

    def test_exponential(self):
        assert S.eval_jet(S.exp(2 * s), 0.0) == pytest.approx((1, 2, 4, 8, 16), abs=1e-14)

    def test_log_cos_against_fd(self):
        fn = -2 * S.log(S.cos(s))
        jet = S.eval_jet(fn, 0.3)
        fd = fd_derivatives(fn, 0.3)
        assert np.allclose(jet[1:], fd, atol=1e-6)

    @pytest.mark.parametrize("name,fn,box,h", LIBRARY, ids=[x[0] for x in LIBRARY])
    def test_library_matches_fd_at_random_points(self, name, fn, box, h):
        rng = np.random.default_rng(7)
        for x in rng.uniform(*box, size=100):
            jet = fn.eval_jet(float(x))
            fd = fd_derivatives(fn, float(x), h)
            assert np.all(np.abs(np.array(jet[1:]) - fd) <= 1e-6 * (1 + abs(jet.value))), (name, x)

    def test_vectorized_matches_scalar(self):
        fn = S.sin(s) * S.exp(s)
        xs = np.linspace(-1, 1, 7)
        vec = fn.eval_jet(xs)
        for i, x in enumerate(xs):
            assert np.allclose([c[i] for c in vec], fn.eval_jet(float(x)))

    @pytest.mark.parametrize(
        "fn,x",
        [(S.log(s), 0.0), (S.log(s), -1.0), (S.coth(s), 0.0), (S.power(s, 0.5), -1.0),
         (S.sin(s).on(0.0, 1.0), 1.5), (1 / S.sin(s), 0.0)],
    )
    def test_singularities_raise(self, fn, x):
        with pytest.raises(DomainError):
            fn.eval_jet(x)

    def test_integer_power_of_negative_base(self):
        assert S.eval_jet(S.power(s, 2), -2.0) == pytest.approx((4, -4, 2, 0, 0))


class TestDLog:
    @pytest.mark.parametrize("c,x", [(1.0, 0.0), (-2.5, 1.3), (0.3, -4.0)])
    def test_exponential(self, c, x):
        assert S.d_log(S.exp(c * s), x) == pytest.approx(c, abs=1e-14)

    @pytest.mark.parametrize("Lam,x", [(1.0, 0.7), (2.0, 0.4), (0.5, 1.9)])
    def test_sine_gives_cot(self, Lam, x):
        a = math.sqrt(Lam)
        assert S.d_log(S.sin(a * s), x) == pytest.approx(a / math.tan(a * x), rel=1e-14)

    def test_cosh_at_one(self):
        # frozen from mpmath tanh(1) and a finite-difference cross-check
        val = S.d_log(S.cosh(s), 1.0)
        assert val == pytest.approx(0.761594155955764888, abs=1e-15)
        fd = fd_derivatives(S.log(S.cosh(s)), 1.0)[0]
        assert val == pytest.approx(fd, abs=1e-9)

    def test_zero_value_raises(self):
        with pytest.raises(DivisionByZero):
            S.d_log(S.sin(s), 0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-1.2, 1.2), st.floats(0.2, 3.0), st.floats(-2.0, 2.0))
    def test_product_additivity(self, x, a, b):
        f = S.cosh(a * s) + 0.5
        g = S.exp(b * s) * (2 + S.sin(s))
        lhs = S.d_log(f * g, x)
        assert lhs == pytest.approx(S.d_log(f, x) + S.d_log(g, x), abs=1e-12 * (1 + abs(lhs)))


class TestLogJet:
    def test_sinh_xi_derivatives(self):
        # xi = coth; xi' = -csch^2
        x = 0.8
        j = S.log_jet(S.sinh(s), x)
        assert j.d1 == pytest.approx(1 / math.tanh(x))
        assert j.d2 == pytest.approx(-1 / math.sinh(x) ** 2)


class TestParse:
    @pytest.mark.parametrize(
        "text,x,expected",
        [("sin(s)", 0.5, math.sin(0.5)), ("s**-2", 2.0, 0.25), ("-2*log(cosh(s))", 0.3, -2 * math.log(math.cosh(0.3))),
         ("exp(2*s) + pi", 0.0, 1 + math.pi), ("sqrt(1+s**2)", 1.0, math.sqrt(2)), ("e**s", 1.0, math.e)],
    )
    def test_values(self, text, x, expected):
        assert S.parse(text)(x) == pytest.approx(expected)

    @pytest.mark.parametrize("text", ["__import__('os')", "s.real", "foo(s)", "[s]", "lambda: 1", "s if 1 else 2"])
    def test_rejects_unsafe(self, text):
        with pytest.raises((ValueError, SyntaxError)):
            S.parse(text)


class TestHermiteSpline:
    def test_reproduces_knot_data_and_interpolates(self):
        k = np.linspace(0.0, 1.0, 21)
        sp = S.HermiteSpline(k, np.sin(k), np.cos(k), -np.sin(k))
        jet = sp.eval_jet(k)
        assert np.allclose(jet.value, np.sin(k), atol=1e-14)
        assert np.allclose(jet.d1, np.cos(k), atol=1e-12)
        assert np.allclose(jet.d2, -np.sin(k), atol=1e-10)
        mid = 0.5 * (k[1:] + k[:-1])
        assert np.max(np.abs(sp(mid) - np.sin(mid))) < 1e-9
