"""Constructors for the classified quasi-Einstein families with harmonic Weyl curvature.

Each constructor returns ``(metric, potential)``; the derived constants are kept
in ``metric.meta`` so reports can embed them.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import smooth1d as S
from .analysis import Potential, qe_residual
from .errors import DegenerateRoot, DomainEmpty, NoRealRoot, ParamError
from .geometry import FiberBlock, FiberModel, MultiWarpedMetric, WarpedBlock

TWO1_CASES = ("i", "ii", "iii", "iv")
_EPS = 1e-12


def _check_m(m: float, n: int | None = None, need_gt1: bool = False):
    if not math.isfinite(m) or m in (0.0, 1.0, -1.0) or (n is not None and m == 2 - n):
        raise ParamError(f"m = {m} is excluded")
    if need_gt1 and not m > 1:
        raise ParamError(f"this family needs m > 1, got {m}")


# ----------------------------------------------------------------- two-eigenvalue, Y = 0


def two1_fiber1(case: str, r: int, Lambda: float, model: str | None = None) -> FiberBlock:
    """First fiber of a ``Y = 0`` family; its curvature parameter is fixed by the case."""
    if r == 1:
        return FiberBlock(1, 0.0, FiberModel.LINE)
    k1 = {"i": Lambda, "ii": Lambda, "iii": 0.0, "iv": -Lambda}[case]
    default = {"i": FiberModel.SPHERE, "ii": FiberModel.HYPERBOLIC,
               "iii": FiberModel.FLAT, "iv": FiberModel.SPHERE}[case]
    return FiberBlock(r, k1, FiberModel(model) if model else default)


def einstein_fiber(r: int, einstein_constant: float, model: str | None = None) -> FiberBlock:
    """A model fiber of dimension ``r >= 2`` with the given Einstein constant."""
    if r < 2:
        raise ParamError("an Einstein fiber with nonzero constant needs r >= 2")
    k = einstein_constant / (r - 1)
    if model is None:
        model = FiberModel.SPHERE if k > 0 else (FiberModel.HYPERBOLIC if k < 0 else FiberModel.FLAT)
    return FiberBlock(r, k, model)


def make_two1(case: str, m: float, r: int, Lambda: float, fiber2: FiberBlock,
              fiber1_model: str | None = None, check_fiber2: bool = True):
    """Two-eigenvalue family with ``Y = 0``: ``ds^2 + h1^2 g1 + g2`` and ``f(s)``.

    ``lambda = (m+r) Lambda``; the second fiber must carry Einstein constant
    ``lambda`` (skip the check with ``check_fiber2=False`` to build a deliberately
    broken instance).
    """
    if case not in TWO1_CASES:
        raise ParamError(f"unknown case {case!r}")
    _check_m(m, need_gt1=True)
    if int(r) != r or r < 1:
        raise ParamError("r must be a positive integer")
    if case == "i" and not Lambda > 0:
        raise ParamError("case (i) needs Lambda > 0")
    if case != "i" and not Lambda < 0:
        raise ParamError(f"case ({case}) needs Lambda < 0")
    lam = (m + r) * Lambda
    if fiber2.r < 2:
        raise ParamError("second fiber must have dimension >= 2")
    if check_fiber2 and abs(fiber2.einstein_constant - lam) > _EPS * max(1.0, abs(lam)):
        raise ParamError(
            f"second fiber Einstein constant {fiber2.einstein_constant} must equal lambda = {lam}")
    a = math.sqrt(abs(Lambda))
    s = S.s
    if case == "i":
        h1, f = S.sin(a * s), -m * S.log(S.cos(a * s))
        domain, samp = (0.0, math.pi / (2 * a)), (0.1 / a, 1.4 / a)
    elif case == "ii":
        h1, f = S.cosh(a * s), -m * S.log(S.sinh(a * s))
        domain, samp = (0.0, math.inf), (0.1 / a, 3.0 / a)
    elif case == "iii":
        h1, f = S.exp(a * s), -m * a * s
        domain, samp = (-math.inf, math.inf), (-2.0 / a, 2.0 / a)
    else:
        h1, f = S.sinh(a * s), -m * S.log(S.cosh(a * s))
        domain, samp = (0.0, math.inf), (0.1 / a, 3.0 / a)
    fiber1 = two1_fiber1(case, r, Lambda, fiber1_model)
    meta = {"kind": "Two1", "case": case, "m": m, "r": r, "Lambda": Lambda, "lambda": lam,
            "rho": r * Lambda, "k1": fiber1.k if r > 1 else None, "r2": fiber2.r, "k2": fiber2.k}
    g = MultiWarpedMetric((WarpedBlock(h1, fiber1), WarpedBlock(S.const(1.0), fiber2)),
                          domain=domain, sample_range=samp, label=f"Two1({case})", meta=meta)
    return g, Potential(f, m, lam)


def w_factor(g: MultiWarpedMetric, p: Potential):
    """The ``ds^2 + h1^2 g1`` factor of a ``Y = 0`` family, with the same potential.

    It is itself quasi-Einstein with the same ``m`` and ``lambda``, and Einstein
    with constant ``rho = r Lambda``.
    """
    first = g.blocks[0]
    meta = dict(g.meta, kind="W-factor")
    return MultiWarpedMetric((first,), domain=g.domain, sample_range=g.sample_range,
                             label=f"W-factor of {g.label}", meta=meta, min_dim=3), p


def k1_law(g: MultiWarpedMetric, s) -> np.ndarray:
    """``(X^2 + Lambda) h1^2`` for a ``Y = 0`` family."""
    h = g.blocks[0].h
    X = S.d_log(h, s)
    return (np.asarray(X) ** 2 + g.meta["Lambda"]) * np.asarray(h(s)) ** 2


# ----------------------------------------------------------------- two-eigenvalue, lambda = 0


def ratio_quadratic(m: float, n: int, r1: int):
    """Coefficients ``(a, 2b, c)`` of the quadratic for ``t = X/Y``."""
    r2 = n - 1 - r1
    a = (r1 - 1) * (m + r1) / (m + 1)
    b2 = 2 * ((r1 - 1) * (r2 - 1) / (m + 1) - (m + n - 2) / (m - 1))
    c = (r2 - 1) * (m + r2) / (m + 1)
    return a, b2, c


def ratio_discriminant(m: float, n: int, r1: int) -> float:
    r2 = n - 1 - r1
    return 4 * (m + n - 2) / (m - 1) ** 2 * (m * (n - 1) - (m - 1) * r1 * r2)


def derive_ratio_roots(m: float, n: int, r1: int):
    """Real roots ``(t_plus, t_minus, discriminant)`` of the ratio quadratic.

    For ``r1 = 1`` the quadratic is linear and both entries hold its single root.
    """
    _check_m(m, n)
    if not (1 <= r1 <= n - 2):
        raise ParamError(f"need 1 <= r1 <= n-2, got r1 = {r1}, n = {n}")
    a, b2, c = ratio_quadratic(m, n, r1)
    disc = ratio_discriminant(m, n, r1)
    if disc <= 0:
        raise NoRealRoot(f"discriminant {disc} <= 0 for m={m}, n={n}, r1={r1}")
    if a == 0.0:
        if b2 == 0.0:
            raise NoRealRoot("ratio relation degenerates to a constant")
        tp = tm = -c / b2
    else:
        sq = math.sqrt(disc)
        # stable pairing of the two roots
        q = -0.5 * (b2 + math.copysign(sq, b2))
        r_a, r_b = q / a, (c / q if q != 0 else -b2 / a)
        tp, tm = max(r_a, r_b), min(r_a, r_b)
    for t in (tp, tm):
        if abs(t) < _EPS or abs(t - 1) < _EPS:
            raise DegenerateRoot(f"root t = {t} is degenerate (X = 0 or X = Y)")
    return tp, tm, disc


def two2_constants(m: float, n: int, r1: int, t: float, c1: float) -> dict:
    r2 = n - 1 - r1
    b1 = 1 + 1 / t + ((r1 - 1) + (r2 - 1) / t) / (m + 1)
    if b1 == 0:
        raise ParamError("b1 = 0: use the constant-X branch")
    return {"b1": b1, "b2": t * b1, "b3": m * ((r1 - 1) + (r2 - 1) / t) / ((m + 1) * b1),
            "c1": c1, "c2": t * c1, "t": t, "r2": r2}


def _resolve_root(m, n, r1, root):
    if isinstance(root, str):
        tp, tm, _ = derive_ratio_roots(m, n, r1)
        if root not in ("plus", "minus"):
            raise ParamError("root must be 'plus', 'minus' or a number")
        return tp if root == "plus" else tm
    t = float(root)
    if abs(t) < _EPS or abs(t - 1) < _EPS:
        raise DegenerateRoot(f"root t = {t} is degenerate (X = 0 or X = Y)")
    a, b2, c = ratio_quadratic(m, n, r1)
    if abs(a * t * t + b2 * t + c) > 1e-9 * max(1.0, abs(a) * t * t + abs(b2 * t) + abs(c)):
        raise ParamError(f"t = {t} does not solve the ratio quadratic")
    return t


def _flat_fiber(r: int) -> FiberBlock:
    return FiberBlock(r, 0.0, FiberModel.LINE if r == 1 else FiberModel.FLAT)


def make_two2_i(m: float, n: int, r1: int, c1: float = 1.0, root="plus", domain=None):
    """Power-law family with ``lambda = 0`` and Ricci-flat fibers.

    ``X = 1/(b1 s + c1)``, ``Y = X / t``, ``f = b3 log(b1 s + c1)``.
    """
    _check_m(m, n)
    if n < 4:
        raise ParamError("n must be >= 4")
    t = _resolve_root(m, n, r1, root)
    k = two2_constants(m, n, r1, t, c1)
    b1, b2, b3 = k["b1"], k["b2"], k["b3"]
    lo_u = -c1 / b1  # the affine argument vanishes here
    natural = (lo_u, math.inf) if b1 > 0 else (-math.inf, lo_u)
    if domain is None:
        domain = natural
    else:
        lo, hi = map(float, domain)
        if not (lo < hi) or lo < natural[0] or hi > natural[1]:
            raise DomainEmpty(f"b1 s + c1 must stay positive on ({lo}, {hi}); allowed {natural}")
        domain = (lo, hi)
    u = S.affine(b1, c1).on(*natural)
    h1 = S.power(u, 1 / b1)
    h2 = S.power(abs(t) * u, 1 / b2)
    f = b3 * S.log(u)
    sigma = max(1.0, 1.0 / abs(t))  # keeps both X and Y = X/t of order one
    ends = sorted(((0.5 * sigma - c1) / b1, (3.0 * sigma - c1) / b1))
    samp = (max(ends[0], domain[0]), min(ends[1], domain[1]))
    if not samp[0] < samp[1]:
        a_, b_ = domain
        a_ = a_ if math.isfinite(a_) else b_ - 1.0
        b_ = b_ if math.isfinite(b_) else a_ + 1.0
        pad = 0.02 * (b_ - a_)
        samp = (a_ + pad, b_ - pad)
    r2 = n - 1 - r1
    meta = {"kind": "Two2_i", "m": m, "n": n, "r1": r1, "lambda": 0.0, **k}
    g = MultiWarpedMetric((WarpedBlock(h1, _flat_fiber(r1)), WarpedBlock(h2, _flat_fiber(r2))),
                          domain=domain, sample_range=samp, label="Two2(i)", meta=meta)
    return g, Potential(f, m, 0.0)


def two2_ii_f_slope(m: float, r1: int, r2: int, b4: float, c3: float = 1.0) -> float:
    """Slope of the linear potential attached to exponential warps ``e^{c3 s}``, ``e^{b4 c3 s}``."""
    return m * c3 * ((r1 - 1) + (r2 - 1) * b4) / (m + 1)


def two2_ii_branch(m: float, n: int, r1: int) -> dict:
    """The ratio forced by ``b1 = 0`` and its residual in the ratio quadratic."""
    r2 = n - 1 - r1
    if m + r1 == 0:
        raise ParamError(f"m = -r1 = {m} leaves the constant-X ratio undefined")
    t = -(m + r2) / (m + r1)
    if t == 0:
        raise DegenerateRoot(f"m = -r2 = {m} forces t = 0, so the first block has X = 0")
    a, b2, c = ratio_quadratic(m, n, r1)
    resid = a * t * t + b2 * t + c
    scale = abs(a) * t * t + abs(b2 * t) + abs(c)
    return {"t": t, "b4": 1 / t, "residual": resid, "scale": scale}


def make_two2_ii(m: float, n: int, r1: int, c3: float = 1.0, root=None):
    """Exponential family ``ds^2 + e^{2 c3 s} g1 + e^{2 b4 c3 s} g2`` with linear ``f``.

    The constant-X branch forces ``t = -(m+r2)/(m+r1)``.  At that ratio the
    quadratic evaluates to ``(m+r2)(m+1)(n-1)/((m+r1)(m-1))``, which vanishes only
    for ``m = -r2``, where ``t = 0``.  The branch is therefore inconsistent for every
    admissible ``(m, n, r1)`` and this constructor raises ``ParamError``.
    """
    _check_m(m, n)
    if c3 == 0:
        raise ParamError("c3 must be nonzero")
    if not 2 <= r1 <= n - 3:
        raise ParamError("need 2 <= r1 <= n-3")
    br = two2_ii_branch(m, n, r1)
    if root is not None and not isinstance(root, str) and abs(float(root) - br["t"]) > 1e-12:
        raise ParamError(f"root {root} is not the constant-X ratio {br['t']}")
    if abs(br["residual"]) > 1e-10 * max(1.0, br["scale"]):
        raise ParamError(
            f"constant-X branch is inconsistent for m={m}, n={n}, r1={r1}: t = {br['t']:.6g} leaves "
            f"ratio-quadratic residual {br['residual']:.6g}")
    r2 = n - 1 - r1
    b4 = br["b4"]
    s = S.s
    f = two2_ii_f_slope(m, r1, r2, b4, c3) * s
    meta = {"kind": "Two2_ii", "m": m, "n": n, "r1": r1, "c3": c3, "b4": b4, "lambda": 0.0}
    g = MultiWarpedMetric((WarpedBlock(S.exp(c3 * s), _flat_fiber(r1)),
                           WarpedBlock(S.exp(b4 * c3 * s), _flat_fiber(r2))),
                          sample_range=(-2.0, 2.0), label="Two2(ii)", meta=meta)
    return g, Potential(f, m, 0.0)


# ----------------------------------------------------------------- single warped and global


def make_type_a(h, fiber: FiberBlock, f, m: float, lam: float, domain=(-math.inf, math.inf),
                sample_range=None, validate: bool = True, tol: float = 1e-8, count: int = 100):
    """Single warped product ``ds^2 + h^2 g_N`` with user ``h`` and ``f``.

    Accepted only when the quasi-Einstein residual stays below ``tol``.
    """
    if isinstance(h, str):
        h = S.parse(h)
    if isinstance(f, str):
        f = S.parse(f)
    meta = {"kind": "TypeA", "m": m, "lambda": lam, "r": fiber.r, "k": fiber.k}
    g = MultiWarpedMetric((WarpedBlock(h, fiber),), domain=tuple(domain), sample_range=sample_range,
                          label="TypeA", meta=meta)
    p = Potential(f, m, lam)
    if validate:
        ss = g.samples(count)
        rad, blk = qe_residual(g, p, ss)
        worst = float(max(np.max(np.abs(rad)), np.max(np.abs(blk))))
        if not worst <= tol:
            raise ParamError(f"not quasi-Einstein: max residual {worst:.3g} > {tol}")
        g.meta["validated_residual"] = worst
    return g, p


def make_global(type_: int, m: float | None = None, k: int | None = None, lam: float | None = None,
                n: int | None = None, fiber2_model: str | None = None, **type1):
    """Complete families: 1 single warped (validated), 2 exponential factor, 3 hyperbolic factor.

    For types 2 and 3, ``k`` is the dimension of the warped factor and the
    second factor has dimension ``n - k`` and Einstein constant ``lam < 0``.
    """
    if type_ == 1:
        return make_type_a(m=m, lam=lam, **type1)
    if type_ not in (2, 3):
        raise ParamError(f"unknown global type {type_}")
    if m is None or k is None or lam is None or n is None:
        raise ParamError("global types 2 and 3 need m, k, lam and n")
    _check_m(m, need_gt1=True)
    if not lam < 0:
        raise ParamError("global types 2 and 3 need lambda < 0")
    if not 2 <= k <= n - 2:
        raise ParamError("need 2 <= k <= n-2")
    if type_ == 2 and k < 3:
        raise ParamError("type 2 needs a Ricci-flat fiber of dimension k-1 >= 2")
    Lambda = lam / (m + k - 1)
    fiber2 = einstein_fiber(n - k, lam, fiber2_model)
    g, p = make_two1("iii" if type_ == 2 else "iv", m, k - 1, Lambda, fiber2)
    g.meta.update({"kind": "Global", "type": type_, "k": k, "n": n,
                   "rho": (k - 1) * lam / (m + k - 1)})
    object.__setattr__(g, "label", f"Global({type_})")
    return g, p


# ----------------------------------------------------------------- specs and config documents

KINDS = ("TypeA", "Two1", "Two2_i", "Two2_ii", "Global")

SCHEMAS = {
    "TypeA": {"anchor": "single warped ds^2 + h^2 g_N over an Einstein fiber, user h and f",
              "keys": ["h", "f", "m", "lambda", "fiber_r", "fiber_k", "fiber_model", "domain_lo", "domain_hi"]},
    "Two1": {"anchor": "Y = 0 families: h1 = sin, cosh, exp, sinh of sqrt|Lambda| s with lambda = (m+r) Lambda",
             "keys": ["case", "m", "r", "Lambda", "fiber2_r", "fiber2_model", "fiber2_k", "fiber1_model"]},
    "Two2_i": {"anchor": "lambda = 0 power-law family, f = b3 log(b1 s + c1), Ricci-flat fibers",
               "keys": ["m", "n", "r1", "c1", "root"]},
    "Two2_ii": {"anchor": "lambda = 0 exponential family from b1 = 0 (inconsistent, always rejected)",
                "keys": ["m", "n", "r1", "c3", "root"]},
    "Global": {"anchor": "complete families: 1 single warped, 2 exponential Einstein factor, 3 hyperbolic factor",
               "keys": ["type", "m", "k", "lambda", "n", "fiber2_model"]},
}

_INT_KEYS = {"r", "n", "r1", "k", "type", "fiber_r", "fiber2_r"}
_STR_KEYS = {"kind", "case", "h", "f", "fiber_model", "fiber2_model", "fiber1_model", "root"}


def _coerce(key: str, text: str):
    text = text.strip()
    if key in _STR_KEYS:
        if key == "root":
            try:
                return float(text)
            except ValueError:
                return text
        return text
    if key in _INT_KEYS:
        return int(text)
    return float(text)


@dataclass
class FamilySpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParamError(f"unknown family kind {self.kind!r}")

    def build(self, check_fiber2: bool = True):
        p = self.params
        try:
            if self.kind == "Two1":
                lam = (p["m"] + p["r"]) * p["Lambda"]
                r2 = p["fiber2_r"]
                if "fiber2_k" in p:
                    fiber2 = FiberBlock(r2, p["fiber2_k"], p.get("fiber2_model", "Einstein"))
                else:
                    fiber2 = einstein_fiber(r2, lam, p.get("fiber2_model"))
                return make_two1(p["case"], p["m"], p["r"], p["Lambda"], fiber2,
                                 fiber1_model=p.get("fiber1_model"), check_fiber2=check_fiber2)
            if self.kind == "Two2_i":
                return make_two2_i(p["m"], p["n"], p["r1"], p.get("c1", 1.0), p.get("root", "plus"))
            if self.kind == "Two2_ii":
                return make_two2_ii(p["m"], p["n"], p["r1"], p.get("c3", 1.0), p.get("root"))
            if self.kind == "Global" and p["type"] in (2, 3):
                return make_global(p["type"], p["m"], p["k"], p["lambda"], p["n"], p.get("fiber2_model"))
            # TypeA or Global type 1
            fiber = FiberBlock(p["fiber_r"], p.get("fiber_k", 0.0), p.get("fiber_model", "Einstein"))
            dom = (p.get("domain_lo", -math.inf), p.get("domain_hi", math.inf))
            return make_type_a(p["h"], fiber, p["f"], p["m"], p["lambda"], domain=dom)
        except KeyError as exc:
            raise ParamError(f"missing parameter {exc.args[0]!r} for {self.kind}") from None

    def to_config(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["family"] = {"kind": self.kind}
        for key, val in self.params.items():
            cp["family"][key] = repr(val) if isinstance(val, float) else str(val)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_config(cls, text: str) -> "FamilySpec":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        if not text.lstrip().startswith("["):
            text = "[family]\n" + text
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ParamError(f"malformed config: {exc}") from None
        if "family" not in cp:
            raise ParamError("config needs a [family] section")
        sec = cp["family"]
        if "kind" not in sec:
            raise ParamError("config needs a 'kind' key")
        try:
            params = {k: _coerce(k, v) for k, v in sec.items() if k != "kind"}
        except ValueError as exc:
            raise ParamError(f"bad config value: {exc}") from None
        return cls(sec["kind"].strip(), params)


def listing(kind_filter: str | None = None) -> list[dict]:
    out = []
    for kind in KINDS:
        if kind_filter and kind_filter != kind:
            continue
        variants = {"Two1": list(TWO1_CASES), "Global": [1, 2, 3]}.get(kind, [])
        out.append({"kind": kind, "variants": variants, **SCHEMAS[kind]})
    return out


def standard_corpus() -> list[tuple[str, MultiWarpedMetric, Potential]]:
    """Every constructible family over the standard parameter grid."""
    out = []
    for case in TWO1_CASES:
        L = 1.0 if case == "i" else -1.0
        for m in (1.5, 2.0, 3.0):
            for r in (1, 2, 3):
                lam = (m + r) * L
                g, p = make_two1(case, m, r, L, einstein_fiber(2, lam))
                out.append((f"Two1({case}) m={m} r={r}", g, p))
    for m in (1.5, 2.0, 3.0):
        for n in (5, 6, 7):
            for r1 in range(1, n - 1):
                try:
                    tp, tm, _ = derive_ratio_roots(m, n, r1)
                except ParamError:
                    continue
                for name, t in (("plus", tp), ("minus", tm)) if tp != tm else (("plus", tp),):
                    g, p = make_two2_i(m, n, r1, 1.0, t)
                    out.append((f"Two2(i) m={m} n={n} r1={r1} {name}", g, p))
    out.append(("Global(1) hyperbolic cross-check", *_global1_example()))
    out.append(("Global(2) m=2 k=3 lam=-4 n=6", *make_global(2, 2.0, 3, -4.0, 6)))
    out.append(("Global(3) m=2 k=2 lam=-3 n=5", *make_global(3, 2.0, 2, -3.0, 5)))
    out.append(("Global(3) m=3 k=4 lam=-6 n=7", *make_global(3, 3.0, 4, -6.0, 7)))
    return out


def _global1_example():
    """Single warped instance: the Einstein factor of a hyperbolic product with its potential."""
    return make_type_a("sinh(s)", FiberBlock(3, 1.0, FiberModel.SPHERE), "-2*log(cosh(s))", 2.0, -5.0,
                       domain=(0.0, math.inf), sample_range=(0.1, 3.0))
