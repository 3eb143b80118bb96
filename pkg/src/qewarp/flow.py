"""Integrability ODE systems for warped quasi-Einstein metrics.

Two closed systems are integrated with a fixed-step classical Runge-Kutta
scheme:

* the two-eigenvalue flow in ``(f, f', X, Y, h1, h2)`` where ``X, Y`` are the
  logarithmic warp derivatives of the two blocks;
* the single-eigenvalue (single warped) flow in ``(f, f', X, h)``.

The potential ``f`` itself is carried along so ``mu`` can be evaluated on
reconstructed metrics.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BlowUp, ParamError, StepTooLarge
from .smooth1d import HermiteSpline

BLOWUP_NORM = 1e12


@dataclass(frozen=True)
class FlowParams:
    m: float
    lam: float
    r1: int
    r2: int
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.m) or self.m in (0.0, 1.0, -1.0):
            raise ParamError(f"m = {self.m} is excluded")
        if self.r1 < 1 or self.r2 < 0:
            raise ParamError("need r1 >= 1 and r2 >= 0")

    @property
    def n(self) -> int:
        return 1 + self.r1 + self.r2


@dataclass(frozen=True)
class ODEState:
    s: float
    fp: float
    X: float
    Y: float
    h1: float
    h2: float
    params: FlowParams
    f: float = 0.0

    def __post_init__(self):
        if self.params.r2 == 0 and self.Y != 0.0:
            raise ParamError("single-block state must have Y = 0")

    @property
    def n(self) -> int:
        return self.params.n

    def vector(self) -> np.ndarray:
        return np.array([self.f, self.fp, self.X, self.Y, self.h1, self.h2])

    def with_vector(self, s: float, y: np.ndarray) -> "ODEState":
        return replace(self, s=float(s), f=float(y[0]), fp=float(y[1]), X=float(y[2]),
                       Y=float(y[3]), h1=float(y[4]), h2=float(y[5]))


def _k_terms(st: ODEState):
    p = st.params
    K1 = (p.r1 - 1) * p.k1 / st.h1**2
    K2 = (p.r2 - 1) * p.k2 / st.h2**2 if p.r2 > 0 else 0.0
    return K1, K2


def two_eig_rhs(st: ODEState) -> dict:
    """Derivatives of ``(fp, X, Y, h1, h2)`` on the two-eigenvalue flow (plus ``f``)."""
    p = st.params
    m, n = p.m, p.n
    X, Y, fp = st.X, st.Y, st.fp
    return {
        "f": fp,
        "fp": fp * (X + Y) - 2 * m * (n - 1) / (m - 1) * X * Y + fp**2 / m,
        "X": -X * X - fp * X / m - X * Y,
        "Y": -Y * Y - fp * Y / m - X * Y,
        "h1": X * st.h1,
        "h2": Y * st.h2,
    }


def one_eig_rhs(st: ODEState) -> dict:
    """Single warped flow: ``ds^2 + h^2 g_N`` with ``dim N = n - 1``."""
    p = st.params
    if p.r2 != 0:
        raise ParamError("single-eigenvalue flow needs r2 = 0")
    m, n, lam = p.m, p.n, p.lam
    X, fp = st.X, st.fp
    kterm = (n - 2) * p.k1 / st.h1**2
    dX = fp * X - lam - (n - 1) * X * X + kterm
    return {
        "f": fp,
        "fp": fp**2 / m + lam + (n - 1) * (dX + X * X),
        "X": dX,
        "Y": 0.0,
        "h1": X * st.h1,
        "h2": 0.0,
    }


_ORDER = ("f", "fp", "X", "Y", "h1", "h2")


def _rhs_vec(rhs, st: ODEState) -> np.ndarray:
    d = rhs(st)
    return np.array([d[k] for k in _ORDER])


# ---------------------------------------------------------------- monitors


def monitor_first_integrals(st: ODEState) -> dict:
    """Residuals of the algebraic identities of the two-eigenvalue system.

    The ``k_*`` and ``trace_relation`` entries use ``Q = X' + X^2 + f'X/m``, taken
    from the flow (so ``Q = -XY``), together with the state's ``(r-1)k/h^2`` data.
    """
    p = st.params
    m, n, lam, r1, r2 = p.m, p.n, p.lam, p.r1, p.r2
    X, Y, fp = st.X, st.Y, st.fp
    K1, K2 = _k_terms(st)
    sig = r1 * X + r2 * Y
    sig2 = r1 * X * X + r2 * Y * Y
    Q = -X * Y
    L = (r1 - 1) * X + (r2 - 1) * Y - (m + 1) * fp / m
    rest = sig - (X + Y)
    out = {
        "first_integral": (m + 1) * X * Y - (m - 1) / (m * (n - 1)) * fp * ((r1 - 1) * X + (r2 - 1) * Y)
        - (m * m - 1) / (m * (n - 1)) * fp * (X + Y) + (m - 1) / (n - 1) * lam,
        "xy_product": X * Y * L,
        "linear_relation": L,
        "xy_relation": fp * (X + Y + fp / m) - m * (n - 1) / (m - 1) * X * Y,
        "ratio_quadratic": (r1 - 1) * (m + r1) / (m + 1) * X * X + (r2 - 1) * (m + r2) / (m + 1) * Y * Y
        + 2 * ((r1 - 1) * (r2 - 1) / (m + 1) - (m + n - 2) / (m - 1)) * X * Y,
        "k_difference": K1 - K2 - (X - Y) * (rest - (m + 1) / m * fp),
        "k_sum": K1 + K2 - ((2 * m + n - 1) / m * Q + (m + 1) / m * lam + (sig2 - X * X - Y * Y)
                            - (m + 1) / m**2 * fp * sig + 2 / m * fp * rest),
        "k_weighted": K1 * X - K2 * Y - ((X - Y) * (Q + lam) + (X - Y) * (X + Y) * rest
                                         + (X - Y) * (X * Y - (m + 1) / m * fp * (X + Y))),
        "k_cross": -K1 * Y + K2 * X - (X - Y) * (Q + lam + X * Y),
        "k_weighted_scaled": (m - 1) / m * (K1 * X - K2 * Y) - (
            (X - Y) * ((m + n - 2) / m * Q + (sig2 - X * X - Y * Y) - (m + 1) / m * X * Y)
            + (X - Y) * (fp / m * rest - (X + Y + fp / m) * rest / m)),
        "trace_relation": (n - 1) / m * Q - (m - 1) / m * lam + sig2 + (m - 1) / m**2 * fp * sig
        - (X + Y) * (sig - (m - 1) / m * fp),
    }
    return out


MONITORS = tuple(monitor_first_integrals(ODEState(1.0, 1.0, 1.0, 0.5, 1.0, 1.0, FlowParams(2.0, 0.0, 2, 2))))


def _one_eig_monitors(st: ODEState) -> dict:
    """Single warped flow: trace identity of the quasi-Einstein equation."""
    p = st.params
    m, n, lam = p.m, p.n, p.lam
    d = one_eig_rhs(st)
    X, fp = st.X, st.fp
    lam1 = -(n - 1) * (d["X"] + X * X)
    lam_a = -d["X"] - (n - 1) * X * X + (n - 2) * p.k1 / st.h1**2
    R = lam1 + (n - 1) * lam_a
    lap = d["fp"] + fp * (n - 1) * X
    return {"trace": R + lap - fp * fp / m - n * lam}


def on_shell_monitors(st: ODEState, system: str = "two", tol: float = 1e-8) -> list[str]:
    """Names of the monitors that hold at ``st`` within ``tol``."""
    first = (monitor_first_integrals if system == "two" else _one_eig_monitors)(st)
    return [k for k, v in first.items() if abs(v) <= tol]


# ---------------------------------------------------------------- trajectories


@dataclass
class Trajectory:
    s: np.ndarray
    states: np.ndarray  # columns: f, fp, X, Y, h1, h2
    residuals: dict = field(default_factory=dict)
    params: FlowParams | None = None
    system: str = "two"
    off_shell: bool = False

    def __len__(self):
        return len(self.s)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, _ORDER.index(name)]

    def state(self, i: int) -> ODEState:
        y = self.states[i]
        return ODEState(float(self.s[i]), y[1], y[2], y[3], y[4], y[5], self.params, f=y[0])

    def max_residual(self, name: str) -> float:
        return float(np.max(np.abs(self.residuals[name])))

    def drift(self, name: str) -> float:
        r = self.residuals[name]
        return float(np.max(np.abs(r - r[0])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.residuals)
        w.writerow(["s", "fp", "X", "Y", "h1", "h2", "f"] + names)
        for i in range(len(self.s)):
            y = self.states[i]
            row = [self.s[i], y[1], y[2], y[3], y[4], y[5], y[0]] + [self.residuals[k][i] for k in names]
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def integrate(st0: ODEState, s_end: float, step: float, monitors=None, system: str = "two",
              drift_tol: float = 1e-3, record_every: int = 1, shell_tol: float = 1e-8) -> Trajectory:
    """Fixed-step RK4 from ``st0`` to ``s_end``.

    The step is shrunk slightly so the grid lands on ``s_end``.  ``monitors`` is
    a list of names from ``monitor_first_integrals`` (or ``"trace"`` for the
    single warped flow); by default every monitor that holds at ``st0`` within
    ``shell_tol`` is recorded, since the others are not conserved.
    """
    if not step > 0:
        raise ParamError("step must be positive")
    if s_end == st0.s:
        raise ParamError("s_end must differ from the initial s")
    if not np.all(np.isfinite(st0.vector())):
        raise ParamError("initial state must be finite")
    if system == "two":
        rhs, mon_fn = two_eig_rhs, monitor_first_integrals
    elif system == "one":
        rhs, mon_fn = one_eig_rhs, _one_eig_monitors
    else:
        raise ParamError(f"unknown system {system!r}")
    first = mon_fn(st0)
    names = list(monitors) if monitors is not None else on_shell_monitors(st0, system, shell_tol)
    unknown = set(names) - set(first)
    if unknown:
        raise ParamError(f"unknown monitors {sorted(unknown)}")
    nsteps = max(1, int(math.ceil(abs(s_end - st0.s) / step - 1e-9)))
    hstep = (s_end - st0.s) / nsteps

    st = st0
    y = st0.vector()
    s_list, y_list = [st0.s], [y.copy()]
    res = {k: [first[k]] for k in names}
    off_shell = system == "two" and abs(first["first_integral"]) > shell_tol
    prev = {k: first[k] for k in names}
    for i in range(1, nsteps + 1):
        s0 = st0.s + (i - 1) * hstep
        k1 = _rhs_vec(rhs, st.with_vector(s0, y))
        k2 = _rhs_vec(rhs, st.with_vector(s0 + hstep / 2, y + hstep / 2 * k1))
        k3 = _rhs_vec(rhs, st.with_vector(s0 + hstep / 2, y + hstep / 2 * k2))
        k4 = _rhs_vec(rhs, st.with_vector(s0 + hstep, y + hstep * k3))
        y_new = y + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s_new = st0.s + i * hstep
        if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new)) > BLOWUP_NORM:
            raise BlowUp(s_new, st.with_vector(s0, y), "state norm exceeded")
        if y_new[4] <= 0 or (st0.params.r2 > 0 and y_new[5] <= 0):
            raise BlowUp(s_new, st.with_vector(s0, y), "warping function reached zero")
        y = y_new
        cur = st.with_vector(s_new, y)
        vals = mon_fn(cur)
        for k in names:
            if abs(vals[k] - prev[k]) > drift_tol:
                raise StepTooLarge(s_new, abs(vals[k] - prev[k]), k)
            prev[k] = vals[k]
        if i % record_every == 0 or i == nsteps:
            s_list.append(s_new)
            y_list.append(y.copy())
            for k in names:
                res[k].append(vals[k])
        st = cur
    return Trajectory(np.array(s_list), np.array(y_list), {k: np.array(v) for k, v in res.items()},
                      params=st0.params, system=system, off_shell=off_shell)


# ---------------------------------------------------------------- states from metrics


def state_from_family(g, p, s0: float) -> ODEState:
    """Exact initial state of a one- or two-block warped family at ``s0``."""
    from . import smooth1d as S

    blocks = g.blocks
    if len(blocks) not in (1, 2):
        raise ParamError("flows need one or two blocks")
    fj = p.f.eval_jet(s0)
    b1 = blocks[0]
    X = S.d_log(b1.h, s0)
    if len(blocks) == 2:
        b2 = blocks[1]
        Y = S.d_log(b2.h, s0)
        fp_ = FlowParams(p.m, p.lam, b1.fiber.r, b2.fiber.r, b1.fiber.k, b2.fiber.k)
        h2 = float(b2.h(s0))
    else:
        Y, h2 = 0.0, 1.0
        fp_ = FlowParams(p.m, p.lam, b1.fiber.r, 0, b1.fiber.k, 0.0)
    return ODEState(float(s0), fj.d1, float(X), float(Y), float(b1.h(s0)), h2, fp_, f=fj.value)


def three_eig_obstruction(m: float, fp: float, xis, mults=None, require_distinct: bool = True) -> float:
    """``sum_i xi_i^2 + ((m-1)/m^2) f'^2`` with multiplicities.

    It must vanish if three distinct eigenvalue blocks coexisted, and it is a sum
    of nonnegative terms for ``m > 1``.
    """
    if not m > 1:
        raise ParamError(f"obstruction needs m > 1, got {m}")
    xi = np.asarray(xis, dtype=float)
    mu = np.ones_like(xi) if mults is None else np.asarray(mults, dtype=float)
    if xi.shape != mu.shape:
        raise ParamError("xis and mults must align")
    if require_distinct and len(np.unique(xi)) < 3:
        raise ParamError("need at least three distinct xi values")
    return float(np.sum(mu * xi * xi) + (m - 1) / m**2 * fp * fp)


def random_obstruction_states(count: int, m: float, rng: np.random.Generator, nblocks: int = 3):
    """Random three-distinct-xi states, ``count`` samples of ``(fp, xis, mults)``."""
    fp = rng.normal(size=count) * 2.0
    xis = rng.normal(size=(count, nblocks)) * 2.0
    mults = rng.integers(1, 4, size=(count, nblocks))
    return fp, xis, mults


# ---------------------------------------------------------------- reconstruction


def trajectory_to_metric(traj: Trajectory, fiber1, fiber2=None):
    """Warped metric and potential interpolating a trajectory.

    Warping functions and ``f`` are piecewise quintic Hermite interpolants
    matching value, first and second derivative at every knot.
    """
    from .analysis import Potential
    from .geometry import MultiWarpedMetric, WarpedBlock

    rhs = two_eig_rhs if traj.system == "two" else one_eig_rhs
    order = np.argsort(traj.s)
    s = traj.s[order]
    derivs = np.array([_rhs_vec(rhs, traj.state(i)) for i in order])
    f, fp, X, Y, h1, h2 = traj.states[order].T
    dX, dY, fpp = derivs[:, 2], derivs[:, 3], derivs[:, 1]
    h1_fn = HermiteSpline(s, h1, X * h1, (dX + X * X) * h1)
    f_fn = HermiteSpline(s, f, fp, fpp)
    blocks = [WarpedBlock(h1_fn, fiber1)]
    if traj.params.r2 > 0:
        if fiber2 is None:
            raise ParamError("two-block trajectory needs a second fiber")
        blocks.append(WarpedBlock(HermiteSpline(s, h2, Y * h2, (dY + Y * Y) * h2), fiber2))
    lo, hi = min(s[0], s[-1]), max(s[0], s[-1])
    pad = 1e-9 * (hi - lo)
    g = MultiWarpedMetric(tuple(blocks), domain=(lo - pad, hi + pad), sample_range=(lo, hi),
                          label="reconstructed", min_dim=3)
    return g, Potential(f_fn, traj.params.m, traj.params.lam)
