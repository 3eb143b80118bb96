"""Quasi-Einstein residuals and identity checks on warped metrics.

The quasi-Einstein equation is ``Ric + Hess f - (1/m) df (x) df = lambda g``.
For a warped metric with potential ``f(s)`` it is diagonal in the adapted frame,
so residuals are reported per frame slot.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .errors import DomainError, ParamError, UnsupportedFiber
from .geometry import (
    AdaptedCurvature,
    MultiWarpedMetric,
    adapted_curvature,
    d_tensor_frame,
    weyl_frame,
)
from .smooth1d import SmoothFn


@dataclass(frozen=True)
class Potential:
    f: SmoothFn
    m: float
    lam: float

    def __post_init__(self):
        m = self.m
        if not math.isfinite(m) or m == 0 or abs(m) == 1:
            raise ParamError(f"m = {m} is excluded (need finite m not in {{0, 1, -1}})")
        if not math.isfinite(self.lam):
            raise ParamError("lambda must be finite")

    def check_dimension(self, n: int):
        if self.m == 2 - n:
            raise ParamError(f"m = 2 - n = {self.m} is excluded")

    def jet(self, s):
        return self.f.eval_jet(s)

    def w(self, s):
        """``w = exp(-f/m)``, with its first two derivatives."""
        j = self.f.eval_jet(s)
        w = np.exp(-np.asarray(j.value) / self.m)
        w1 = -j.d1 * w / self.m
        w2 = (j.d1**2 / self.m**2 - j.d2 / self.m) * w
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("w = exp(-f/m) is not positive and finite")
        return w, w1, w2


def _prepare(g: MultiWarpedMetric, p: Potential, s):
    p.check_dimension(g.n)
    s = g.check_point(s)
    lo, hi = p.f.domain
    if np.any(s <= lo) or np.any(s >= hi):
        raise DomainError("s outside the potential's domain")
    return s, adapted_curvature(g, s), p.f.eval_jet(s)


def qe_residual(g: MultiWarpedMetric, p: Potential, s):
    """Adapted-frame slots of ``Ric + Hess f - df df / m - lambda g``."""
    s, c, j = _prepare(g, p, s)
    radial = c.lambda1 + j.d2 - j.d1**2 / p.m - p.lam
    blocks = c.lambda_blocks + j.d1 * c.xi_blocks - p.lam
    return radial, blocks


def laplacian_f(c: AdaptedCurvature, j) -> np.ndarray:
    return j.d2 + j.d1 * c.sum_xi


def lemma21_residuals(g: MultiWarpedMetric, p: Potential, s):
    """Trace, scalar-gradient and potential-gradient identities for quasi-Einstein metrics."""
    s, c, j = _prepare(g, p, s)
    m, lam, n = p.m, p.lam, g.n
    fp, fpp = j.d1, j.d2
    lap = laplacian_f(c, j)
    trace = c.R + lap - fp**2 / m - n * lam
    grad_r = c.dR - (2 * (m - 1) / m) * c.lambda1 * fp - (2 / m) * (c.R - (n - 1) * lam) * fp
    pot = c.dR + (2 * (m - 1) / m) * fp * fpp - 2 * lam * fp - (2 / m) * (fp**2 - lap) * fp
    return trace, grad_r, pot


def mu_constant(g: MultiWarpedMetric, p: Potential, s):
    """``w Lap w + (m-1)|grad w|^2 + lambda w^2`` with ``w = exp(-f/m)``."""
    s, c, _ = _prepare(g, p, s)
    w, w1, w2 = p.w(s)
    lap_w = w2 + w1 * c.sum_xi
    return w * lap_w + (p.m - 1) * w1**2 + p.lam * w**2


def scalar_curvature_identity(g: MultiWarpedMetric, p: Potential, s):
    """Residual of ``R = -((m-1)/m) f'^2``, which holds on the lambda = 0 power-law families."""
    s, c, j = _prepare(g, p, s)
    return c.R + (p.m - 1) / p.m * j.d1**2


# ------------------------------------------------------------- chart checks


def _chart_setup(g, p, s, step):
    field_ = oracle.realize_chart(g, step=step, s0=float(s))
    phi = oracle.realize_potential(p)
    x = field_.point(float(s))
    return field_, phi, x


def qe_tensor_chart(g: MultiWarpedMetric, p: Potential, s, step: float = 1e-2):
    """Chart-oracle quasi-Einstein tensor eigenvalues at ``s`` (ascending)."""
    field_, phi, x = _chart_setup(g, p, s, step)
    b = oracle.curvature_at(field_, x)
    grad, hess, _ = oracle.hessian_and_gradient(field_, phi, x)
    Q = b.Ricci + hess - np.outer(grad, grad) / p.m - p.lam * b.g
    return np.sort(np.linalg.eigvals(b.ginv @ Q).real)


@dataclass
class DCheck:
    """Norms of the two candidate relations between D, Cotton and curvature.

    With ``k = (m+n-2)/m``, ``resA`` tests ``k D = C + Rm(grad f)`` and ``resB``
    tests ``k D = C - W(grad f)``, where ``Rm(grad f)_ijk = R_ijkl grad^l f``.
    The primary residuals use ``D_hat_ijk = D_kij``: the defining formula makes
    ``D`` antisymmetric in its last two slots while ``C`` and ``Rm(grad f)`` are
    antisymmetric in the first two, so a slotwise comparison needs the rotated
    tensor.  The unrotated residuals are kept as ``*_literal``.
    """

    resA: float
    resB: float
    resA_literal: float
    resB_literal: float
    d_norm: float
    cotton_norm: float
    weyl_grad_norm: float

    def surviving(self, tol: float = 1e-4) -> str | None:
        a, b = self.resA <= tol, self.resB <= tol
        if a and not b:
            return "A"
        if b and not a:
            return "B"
        if a and b:
            return "both"
        return None


def d_cotton_weyl_check(g: MultiWarpedMetric, p: Potential, s, step: float = 1e-2,
                        richardson: bool = True) -> DCheck:
    field_, phi, x = _chart_setup(g, p, s, step)
    b = oracle.curvature_at(field_, x, richardson=richardson)
    grad, _, _ = oracle.hessian_and_gradient(field_, phi, x)
    up = b.ginv @ grad
    n, m = g.n, p.m
    D = oracle.d_tensor_from(b, grad)
    d_hat = np.transpose(D, (1, 2, 0))
    k = (m + n - 2) / m
    rm_f = np.einsum("ijkl,l->ijk", b.Riemann, up)
    w_f = np.einsum("ijkl,l->ijk", b.Weyl, up)
    return DCheck(
        resA=b.norm(k * d_hat - b.Cotton - rm_f),
        resB=b.norm(k * d_hat - b.Cotton + w_f),
        resA_literal=b.norm(k * D - b.Cotton - rm_f),
        resB_literal=b.norm(k * D - b.Cotton + w_f),
        d_norm=b.norm(D),
        cotton_norm=b.norm(b.Cotton),
        weyl_grad_norm=b.norm(w_f),
    )


def lemma23_chain(g: MultiWarpedMetric, p: Potential, s, step: float = 1e-2) -> dict:
    """Residual norms of the successive equalities expressing ``Rm(grad f)``.

    Each expression is a 3-tensor ``T_ijk``; the keys name what each step uses:
    the Ricci identity, the quasi-Einstein substitution, the Codazzi property of
    the Schouten tensor, and the scalar-curvature gradient identity.
    """
    field_, phi, x = _chart_setup(g, p, s, step)
    b = oracle.curvature_at(field_, x)
    grad, _, _ = oracle.hessian_and_gradient(field_, phi, x)
    T3 = oracle.third_derivative(field_, phi, x)
    n, m, lam = g.n, p.m, p.lam
    gm, Ric, up = b.g, b.Ricci, b.ginv @ grad
    e0 = np.einsum("ijkl,l->ijk", b.Riemann, up)
    e1 = T3 - np.swapaxes(T3, 0, 1)
    tail = (np.einsum("jk,i->ijk", Ric, grad) - np.einsum("ik,j->ijk", Ric, grad)) / m
    lam_term = -(lam / m) * (np.einsum("jk,i->ijk", gm, grad) - np.einsum("ik,j->ijk", gm, grad))
    e2 = -b.nabla_ricci + np.swapaxes(b.nabla_ricci, 0, 1) + tail + lam_term
    e3 = (np.einsum("ik,j->ijk", gm, b.dR) - np.einsum("jk,i->ijk", gm, b.dR)) / (2 * (n - 1)) + tail + lam_term
    ricf = Ric @ up
    e4 = (
        (m - 1) / (m * (n - 1)) * (np.einsum("j,ik->ijk", ricf, gm) - np.einsum("i,jk->ijk", ricf, gm))
        + tail
        + b.R / (m * (n - 1)) * (np.einsum("ik,j->ijk", gm, grad) - np.einsum("jk,i->ijk", gm, grad))
    )
    return {
        "ricci_identity": b.norm(e0 - e1),
        "qe_substitution": b.norm(e1 - e2),
        "codazzi": b.norm(e2 - e3),
        "gradR": b.norm(e3 - e4),
    }


def _rel_err(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def oracle_compare(g, p, s: float, step: float = 1e-2) -> dict:
    """Relative differences between chart-oracle and closed-form curvature at ``s``.

    Differences are scaled by ``max(1, |closed form|)``.  ``weyl`` compares the
    squared norms and is ``None`` for fibers without a curvature model.
    """
    c = adapted_curvature(g, s)
    field_ = oracle.realize_chart(g, step=step, s0=float(s))
    b = oracle.curvature_at(field_, field_.point(float(s)), richardson=True)
    closed = np.sort(np.concatenate([[c.lambda1], np.repeat(c.lambda_blocks, g.dims)]))
    out = {
        "s": float(s),
        "ricci": _rel_err(b.ricci_eigenvalues(), closed),
        "scalar": _rel_err(b.R, c.R),
        "cotton": _rel_err(b.norm(b.Cotton), c.cotton_norm),
    }
    try:
        out["weyl"] = _rel_err(b.norm(b.Weyl) ** 2, weyl_frame(g, s).weyl_norm)
    except UnsupportedFiber:
        out["weyl"] = None
    if p is not None:
        grad, _, _ = oracle.hessian_and_gradient(field_, oracle.realize_potential(p), field_.point(float(s)))
        _, dn = d_tensor_frame(g, p.f.eval_jet(float(s)).d1, float(s))
        out["d_norm"] = _rel_err(b.norm(oracle.d_tensor_from(b, grad)), dn)
    return out


# ------------------------------------------------------------------ reports


@dataclass
class QEReport:
    s: np.ndarray
    res_radial: np.ndarray
    res_blocks: np.ndarray  # (nblocks, N)
    trace: np.ndarray
    gradR: np.ndarray
    mu: np.ndarray
    cotton: np.ndarray
    d_norm: np.ndarray
    weyl_norm: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return (["s", "res_radial"] + [f"res_block_{j + 1}" for j in range(self.res_blocks.shape[0])]
                + ["trace", "gradR", "mu", "cotton", "d_norm", "weyl_norm"])

    def table(self) -> np.ndarray:
        cols = [self.s, self.res_radial, *self.res_blocks, self.trace, self.gradR, self.mu,
                self.cotton, self.d_norm, self.weyl_norm]
        return np.column_stack(cols)

    @property
    def summary(self) -> dict:
        """Per-column maxima of the absolute values; ``mu_spread`` is max - min of mu."""
        tab = self.table()
        out = {c: float(np.max(np.abs(tab[:, i]))) for i, c in enumerate(self.columns) if c != "s"}
        out["mu_spread"] = float(np.ptp(self.mu))
        return out

    def to_json(self) -> str:
        doc = {
            "params": self.params,
            "columns": self.columns,
            "samples": [[float(v) for v in row] for row in self.table()],
            "summary": self.summary,
        }
        return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.table():
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def build_report(g: MultiWarpedMetric, p: Potential, samples=None, count: int = 100,
                 params: dict | None = None) -> QEReport:
    s = np.asarray(samples if samples is not None else g.samples(count), dtype=float)
    radial, blocks = qe_residual(g, p, s)
    trace, grad_r, _ = lemma21_residuals(g, p, s)
    c = adapted_curvature(g, s)
    _, dn = d_tensor_frame(g, p.f.eval_jet(s).d1, s, c)
    try:
        wn = np.sqrt(weyl_frame(g, s).weyl_norm)
    except UnsupportedFiber:
        wn = np.full_like(s, np.nan)
    return QEReport(
        s=s, res_radial=np.asarray(radial), res_blocks=np.asarray(blocks), trace=np.asarray(trace),
        gradR=np.asarray(grad_r), mu=np.asarray(mu_constant(g, p, s)), cotton=c.cotton_norm,
        d_norm=dn, weyl_norm=wn, params=dict(params or {}),
    )
