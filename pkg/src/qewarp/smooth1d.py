"""Closed-form scalar functions of one variable with exact derivative jets.

A :class:`SmoothFn` is an immutable expression tree.  ``eval_jet(s)`` returns
the value and the first four derivatives, propagated through the tree with the
Leibniz and Faa di Bruno rules.  Evaluation is vectorised over numpy arrays of
sample points.

Singular points (``log`` of a non-positive argument, ``coth(0)``, a zero
denominator, a non-positive base under a fractional power) raise
:class:`~qewarp.errors.DomainError` instead of producing ``nan``.
"""

from __future__ import annotations

import ast
import math
from typing import NamedTuple

import numpy as np

from .errors import DivisionByZero, DomainError

ORDER = 4


class Jet(NamedTuple):
    value: np.ndarray | float
    d1: np.ndarray | float
    d2: np.ndarray | float
    d3: np.ndarray | float
    d4: np.ndarray | float


def _leibniz(f, g):
    return [
        f[0] * g[0],
        f[1] * g[0] + f[0] * g[1],
        f[2] * g[0] + 2 * f[1] * g[1] + f[0] * g[2],
        f[3] * g[0] + 3 * f[2] * g[1] + 3 * f[1] * g[2] + f[0] * g[3],
        f[4] * g[0] + 4 * f[3] * g[1] + 6 * f[2] * g[2] + 4 * f[1] * g[3] + f[0] * g[4],
    ]


def _faa_di_bruno(g, u):
    """Derivatives of ``outer(inner(s))``.

    ``g`` holds the outer derivatives evaluated at ``inner(s)``, ``u`` the
    inner jet.
    """
    u1, u2, u3, u4 = u[1], u[2], u[3], u[4]
    return [
        g[0],
        g[1] * u1,
        g[2] * u1**2 + g[1] * u2,
        g[3] * u1**3 + 3 * g[2] * u1 * u2 + g[1] * u3,
        g[4] * u1**4 + 6 * g[3] * u1**2 * u2 + g[2] * (3 * u2**2 + 4 * u1 * u3) + g[1] * u4,
    ]


def _tanh_like(t):
    q = 1.0 - t * t
    return [t, q, -2.0 * t * q, q * (6.0 * t * t - 2.0), q * (16.0 * t - 24.0 * t**3)]


def _outer_sin(u):
    sn, cs = np.sin(u), np.cos(u)
    return [sn, cs, -sn, -cs, sn]


def _outer_cos(u):
    sn, cs = np.sin(u), np.cos(u)
    return [cs, -sn, -cs, sn, cs]


def _outer_sinh(u):
    sh, ch = np.sinh(u), np.cosh(u)
    return [sh, ch, sh, ch, sh]


def _outer_cosh(u):
    sh, ch = np.sinh(u), np.cosh(u)
    return [ch, sh, ch, sh, ch]


def _outer_exp(u):
    e = np.exp(u)
    return [e, e, e, e, e]


def _outer_tanh(u):
    return _tanh_like(np.tanh(u))


def _outer_coth(u):
    if np.any(u == 0.0):
        raise DomainError("coth is singular at 0")
    return _tanh_like(1.0 / np.tanh(u))


def _outer_log(u):
    if np.any(u <= 0.0):
        raise DomainError("log of a non-positive argument")
    inv = 1.0 / u
    return [np.log(u), inv, -(inv**2), 2.0 * inv**3, -6.0 * inv**4]


def _outer_power(u, p):
    is_int = float(p).is_integer()
    if is_int and p >= 0:
        pass
    elif is_int:
        if np.any(u == 0.0):
            raise DomainError(f"zero base under negative power {p}")
    elif np.any(u <= 0.0):
        raise DomainError(f"non-positive base under fractional power {p}")
    out = []
    coef = 1.0
    for k in range(ORDER + 1):
        e = p - k
        if coef == 0.0:
            out.append(np.zeros_like(u))
        else:
            out.append(coef * np.power(u, e))
        coef *= e
    return out


_OUTER = {
    "sin": _outer_sin,
    "cos": _outer_cos,
    "sinh": _outer_sinh,
    "cosh": _outer_cosh,
    "tanh": _outer_tanh,
    "coth": _outer_coth,
    "exp": _outer_exp,
    "log": _outer_log,
}


def _lift(x) -> "SmoothFn":
    if isinstance(x, SmoothFn):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} as a SmoothFn")


class SmoothFn:
    """Base node.  Subclasses implement ``_jet`` over a numpy array."""

    domain: tuple[float, float] = (-math.inf, math.inf)

    def _jet(self, s: np.ndarray) -> list:
        raise NotImplementedError

    def on(self, lo: float, hi: float) -> "SmoothFn":
        """Copy of this function restricted to the open interval ``(lo, hi)``."""
        return Restricted(self, lo, hi)

    def eval_jet(self, s) -> Jet:
        arr = np.asarray(s, dtype=float)
        lo, hi = self.domain
        if np.any(arr <= lo) or np.any(arr >= hi):
            raise DomainError(f"s outside the open domain ({lo}, {hi})")
        parts = self._jet(arr)
        for p in parts:
            if not np.all(np.isfinite(p)):
                raise DomainError("non-finite jet entry")
        if arr.ndim == 0:
            return Jet(*(float(p) for p in parts))
        return Jet(*(np.broadcast_to(p, arr.shape).astype(float) for p in parts))

    def __call__(self, s):
        return self.eval_jet(s).value

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return Sum(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum(self, -_lift(other))

    def __rsub__(self, other):
        return Sum(_lift(other), -self)

    def __neg__(self):
        return Product(Const(-1.0), self)

    def __mul__(self, other):
        return Product(self, _lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Quotient(self, _lift(other))

    def __rtruediv__(self, other):
        return Quotient(_lift(other), self)

    def __pow__(self, p):
        if isinstance(p, SmoothFn):
            return exp(p * log(self))
        return Power(self, float(p))


def _intersect(*fns) -> tuple[float, float]:
    lo = max(f.domain[0] for f in fns)
    hi = min(f.domain[1] for f in fns)
    return lo, hi


class Const(SmoothFn):
    def __init__(self, c: float):
        self.c = float(c)

    def _jet(self, s):
        z = np.zeros_like(s)
        return [z + self.c, z, z, z, z]

    def __neg__(self):
        return Const(-self.c)

    def __repr__(self):
        return f"{self.c!r}"


class Affine(SmoothFn):
    """``a*s + b``."""

    def __init__(self, a: float = 1.0, b: float = 0.0):
        self.a = float(a)
        self.b = float(b)

    def _jet(self, s):
        z = np.zeros_like(s)
        return [self.a * s + self.b, z + self.a, z, z, z]

    def __repr__(self):
        if self.a == 1.0 and self.b == 0.0:
            return "s"
        return f"({self.a!r}*s + {self.b!r})"


class Apply(SmoothFn):
    """A library function applied to an inner expression."""

    def __init__(self, name: str, inner: SmoothFn):
        if name not in _OUTER:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.inner = inner
        self.domain = inner.domain

    def _jet(self, s):
        u = self.inner._jet(s)
        return _faa_di_bruno(_OUTER[self.name](u[0]), u)

    def __repr__(self):
        return f"{self.name}({self.inner!r})"


class Power(SmoothFn):
    def __init__(self, base: SmoothFn, p: float):
        self.base = base
        self.p = float(p)
        self.domain = base.domain

    def _jet(self, s):
        u = self.base._jet(s)
        return _faa_di_bruno(_outer_power(u[0], self.p), u)

    def __repr__(self):
        return f"({self.base!r})**{self.p!r}"


class Sum(SmoothFn):
    def __init__(self, a: SmoothFn, b: SmoothFn):
        self.a, self.b = a, b
        self.domain = _intersect(a, b)

    def _jet(self, s):
        return [x + y for x, y in zip(self.a._jet(s), self.b._jet(s))]

    def __repr__(self):
        return f"({self.a!r} + {self.b!r})"


class Product(SmoothFn):
    def __init__(self, a: SmoothFn, b: SmoothFn):
        self.a, self.b = a, b
        self.domain = _intersect(a, b)

    def _jet(self, s):
        return _leibniz(self.a._jet(s), self.b._jet(s))

    def __repr__(self):
        return f"{self.a!r}*{self.b!r}"


class Quotient(SmoothFn):
    def __init__(self, a: SmoothFn, b: SmoothFn):
        self.a, self.b = a, b
        self.domain = _intersect(a, b)

    def _jet(self, s):
        den = self.b._jet(s)
        if np.any(den[0] == 0.0):
            raise DomainError("zero denominator")
        recip = _faa_di_bruno(_outer_power(den[0], -1.0), den)
        return _leibniz(self.a._jet(s), recip)

    def __repr__(self):
        return f"({self.a!r})/({self.b!r})"


class Compose(SmoothFn):
    """``outer(inner(s))`` for two arbitrary SmoothFn trees."""

    def __init__(self, outer: SmoothFn, inner: SmoothFn):
        self.outer, self.inner = outer, inner
        self.domain = inner.domain

    def _jet(self, s):
        u = self.inner._jet(s)
        lo, hi = self.outer.domain
        if np.any(u[0] <= lo) or np.any(u[0] >= hi):
            raise DomainError("inner values leave the outer domain")
        return _faa_di_bruno(self.outer._jet(u[0]), u)

    def __repr__(self):
        return f"({self.outer!r})o({self.inner!r})"


class Restricted(SmoothFn):
    def __init__(self, fn: SmoothFn, lo: float, hi: float):
        if not lo < hi:
            raise ValueError("empty interval")
        self.fn = fn
        flo, fhi = fn.domain
        self.domain = (max(lo, flo), min(hi, fhi))

    def _jet(self, s):
        return self.fn._jet(s)

    def __repr__(self):
        return repr(self.fn)


class HermiteSpline(SmoothFn):
    """Piecewise quintic matching value, first and second derivative at knots.

    Used to rebuild warping functions from integrated trajectories; at the
    knots the jet reproduces the supplied data up to second order.
    """

    def __init__(self, knots, values, d1, d2):
        self.knots = np.asarray(knots, dtype=float)
        if self.knots.ndim != 1 or len(self.knots) < 2 or np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing, at least two")
        self.y0 = np.asarray(values, dtype=float)
        self.y1 = np.asarray(d1, dtype=float)
        self.y2 = np.asarray(d2, dtype=float)
        # closed at the ends so knot evaluation works
        span = self.knots[-1] - self.knots[0]
        self.domain = (self.knots[0] - 1e-9 * span, self.knots[-1] + 1e-9 * span)
        self._coef = self._build()

    def _build(self):
        k = self.knots
        h = np.diff(k)
        p0, p1 = self.y0[:-1], self.y0[1:]
        v0, v1 = self.y1[:-1] * h, self.y1[1:] * h
        a0, a1 = self.y2[:-1] * h * h, self.y2[1:] * h * h
        # quintic in t = (s - k_i)/h_i; coefficients c0..c5
        c0 = p0
        c1 = v0
        c2 = a0 / 2
        c3 = 10 * (p1 - p0) - 6 * v0 - 4 * v1 - 1.5 * a0 + 0.5 * a1
        c4 = -15 * (p1 - p0) + 8 * v0 + 7 * v1 + 1.5 * a0 - a1
        c5 = 6 * (p1 - p0) - 3 * v0 - 3 * v1 - 0.5 * a0 + 0.5 * a1
        return np.stack([c0, c1, c2, c3, c4, c5], axis=1), h

    def _jet(self, s):
        coef, h = self._coef
        idx = np.clip(np.searchsorted(self.knots, s, side="right") - 1, 0, len(h) - 1)
        c = coef[idx]
        hh = h[idx]
        t = (s - self.knots[idx]) / hh
        out = []
        poly = [c[..., j] for j in range(6)]
        for order in range(ORDER + 1):
            val = np.zeros_like(t)
            for j in range(len(poly) - 1, -1, -1):
                val = val * t + poly[j]
            out.append(val / hh**order)
            poly = [poly[j] * j for j in range(1, len(poly))] or [np.zeros_like(t)]
        return out

    def __repr__(self):
        return f"HermiteSpline({len(self.knots)} knots)"


# constructors ---------------------------------------------------------------

s = Affine(1.0, 0.0)


def const(c: float) -> SmoothFn:
    return Const(c)


def affine(a: float, b: float = 0.0) -> SmoothFn:
    return Affine(a, b)


def _unary(name):
    def build(u):
        u = _lift(u)
        if isinstance(u, Const):
            jet = _OUTER[name](np.asarray(u.c))
            return Const(float(jet[0]))
        return Apply(name, u)

    build.__name__ = name
    build.__doc__ = f"``{name}`` of an expression."
    return build


sin = _unary("sin")
cos = _unary("cos")
sinh = _unary("sinh")
cosh = _unary("cosh")
tanh = _unary("tanh")
coth = _unary("coth")
exp = _unary("exp")
log = _unary("log")


def power(u, p: float) -> SmoothFn:
    return Power(_lift(u), p)


def sqrt(u) -> SmoothFn:
    return Power(_lift(u), 0.5)


def compose(outer: SmoothFn, inner: SmoothFn) -> SmoothFn:
    return Compose(outer, inner)


def eval_jet(fn: SmoothFn, s) -> Jet:
    return fn.eval_jet(s)


def d_log(fn: SmoothFn, s):
    """Logarithmic derivative ``fn'(s)/fn(s)``."""
    jet = fn.eval_jet(s)
    if np.any(np.asarray(jet.value) == 0.0):
        raise DivisionByZero("d_log of a function that vanishes at s")
    return jet.d1 / jet.value


def log_jet(fn: SmoothFn, s) -> Jet:
    """Jet of ``log(fn)``; entries 1..4 are xi, xi', xi'', xi''' for xi = fn'/fn.

    Requires ``fn > 0``.
    """
    arr = np.asarray(s, dtype=float)
    jet = fn.eval_jet(arr)
    u = [np.asarray(x, dtype=float) for x in jet]
    parts = _faa_di_bruno(_outer_log(u[0]), u)
    if arr.ndim == 0:
        return Jet(*(float(p) for p in parts))
    return Jet(*parts)


# restricted parser ------------------------------------------------------------

_PARSE_FUNCS = {
    "sin": sin, "cos": cos, "sinh": sinh, "cosh": cosh, "tanh": tanh,
    "coth": coth, "exp": exp, "log": log, "sqrt": sqrt,
}
_PARSE_CONSTS = {"pi": math.pi, "e": math.e}


def parse(text: str) -> SmoothFn:
    """Build a SmoothFn from an expression in ``s`` over the constructor set.

    >>> parse("-2*log(cos(s))")(0.0)
    -0.0
    """
    tree = ast.parse(text, mode="eval")

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return Const(float(node.value))
        if isinstance(node, ast.Name):
            if node.id == "s":
                return s
            if node.id in _PARSE_CONSTS:
                return Const(_PARSE_CONSTS[node.id])
            raise ValueError(f"unknown name {node.id!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = walk(node.operand)
            return -inner if isinstance(node.op, ast.USub) else inner
        if isinstance(node, ast.BinOp):
            a, b = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                return a / b
            if isinstance(node.op, ast.Pow):
                return a ** (b.c if isinstance(b, Const) else b)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            fn = _PARSE_FUNCS.get(node.func.id)
            if fn is None or len(node.args) != 1 or node.keywords:
                raise ValueError(f"unsupported call {ast.unparse(node)!r}")
            return fn(walk(node.args[0]))
        raise ValueError(f"unsupported syntax {ast.unparse(node)!r}")

    return walk(tree)
