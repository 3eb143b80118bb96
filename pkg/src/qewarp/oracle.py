"""Brute-force curvature of an arbitrary coordinate metric by finite differences.

Every derivative is a 4th-order central difference, applied by nesting: the
Christoffel symbols differentiate ``g``, the Riemann tensor differentiates the
Christoffel symbols, and the Cotton tensor differentiates the Schouten tensor.
All levels evaluate their stencils as one batched numpy call.

Index convention: ``R_{ijkl} = <R(d_i, d_j) d_l, d_k>``, so that the unit sphere
has ``R_{ijij} = +1`` on orthonormal pairs, ``Ric_{jl} = g^{ik} R_{ijkl}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonPositiveDefinite, ParamError, StencilOutOfRange, UnsupportedFiber
from .geometry import FiberModel, MultiWarpedMetric

MAX_DIM = 8
_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

MetricFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ChartMetricField:
    """A metric ``g(x)`` on a coordinate box, vectorized over leading axes.

    ``g`` maps an array of shape ``(..., n)`` to shape ``(..., n, n)``.
    """

    n: int
    g: MetricFn
    lower: np.ndarray
    upper: np.ndarray
    fd_step: np.ndarray
    base_point: np.ndarray | None = None

    def __post_init__(self):
        if self.n > MAX_DIM:
            raise ParamError(f"chart oracle supports n <= {MAX_DIM}, got {self.n}")
        for name in ("lower", "upper"):
            object.__setattr__(self, name, np.broadcast_to(np.asarray(getattr(self, name), float), (self.n,)).copy())
        step = np.broadcast_to(np.asarray(self.fd_step, float), (self.n,)).copy()
        if np.any(step <= 0):
            raise ParamError("fd_step must be positive")
        object.__setattr__(self, "fd_step", step)

    def with_step(self, step) -> "ChartMetricField":
        return ChartMetricField(self.n, self.g, self.lower, self.upper, step, self.base_point)

    def point(self, s: float) -> np.ndarray:
        """The base point with its first coordinate replaced by ``s``."""
        x = np.array(self.base_point if self.base_point is not None else 0.5 * (self.lower + self.upper))
        x[0] = s
        return x


def _fd(F: Callable[[np.ndarray], np.ndarray], X: np.ndarray, step: np.ndarray) -> np.ndarray:
    """``dF[..., a, *shape] = d_a F`` at a batch ``X`` of shape ``(N, n)``."""
    N, n = X.shape
    disp = _OFFSETS[:, None, None] * np.diag(step)[None, :, :]  # (4, n, n)
    pts = X[:, None, None, :] + disp[None]  # (N, 4, n, n)
    vals = F(pts.reshape(-1, n))
    vals = vals.reshape((N, 4, n) + vals.shape[1:])
    w = _WEIGHTS.reshape((1, 4, 1) + (1,) * (vals.ndim - 3))
    d = np.sum(w * vals, axis=1)
    return d / step.reshape((1, n) + (1,) * (d.ndim - 2))


def _metric(field: ChartMetricField, X: np.ndarray) -> np.ndarray:
    G = np.asarray(field.g(X), dtype=float)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def _christoffel(field: ChartMetricField, X: np.ndarray):
    """Second-kind symbols ``Gamma[k, i, j]`` with the metric and its inverse."""
    G = _metric(field, X)
    dG = _fd(lambda P: _metric(field, P), X, field.fd_step)  # dG[:, l, i, j] = d_l g_ij
    Gi = np.linalg.inv(G)
    first = 0.5 * (np.einsum("nijl->nlij", dG) + np.einsum("njil->nlij", dG) - dG)
    # first[:, l, i, j] = Gamma_{l i j} (first kind, lowered index l)
    Gam = np.einsum("nkl,nlij->nkij", Gi, first)
    return Gam, G, Gi


def _riemann(field: ChartMetricField, X: np.ndarray):
    Gam, G, Gi = _christoffel(field, X)
    dGam = _fd(lambda P: _christoffel(field, P)[0], X, field.fd_step)  # [n, mu, rho, nu, sigma]
    # R^rho_{sigma mu nu} = d_mu Gam^rho_{nu sigma} - d_nu Gam^rho_{mu sigma}
    #                      + Gam^rho_{mu lam} Gam^lam_{nu sigma} - Gam^rho_{nu lam} Gam^lam_{mu sigma}
    term = np.einsum("nmrvs->nrsmv", dGam)
    quad = np.einsum("nrml,nlvs->nrsmv", Gam, Gam)
    Rup = term - np.swapaxes(term, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    # R_{ijkl} = g_{k a} R^a_{l i j}
    Rm = np.einsum("nka,nalij->nijkl", G, Rup)
    return Rm, Gam, G, Gi


def _curvature_core(field: ChartMetricField, X: np.ndarray) -> dict:
    n = field.n
    Rm, Gam, G, Gi = _riemann(field, X)
    Ric = np.einsum("nik,nijkl->njl", Gi, Rm)
    Ric = 0.5 * (Ric + np.swapaxes(Ric, -1, -2))
    R = np.einsum("njl,njl->n", Gi, Ric)
    A = Ric - (R / (2 * (n - 1)))[:, None, None] * G
    E = Ric - 0.5 * R[:, None, None] * G
    if n > 2:
        kul = (
            np.einsum("nik,njl->nijkl", A, G)
            + np.einsum("njl,nik->nijkl", A, G)
            - np.einsum("nil,njk->nijkl", A, G)
            - np.einsum("njk,nil->nijkl", A, G)
        )
        W = Rm - kul / (n - 2)
    else:
        W = np.zeros_like(Rm)
    return dict(Riemann=Rm, Gamma=Gam, g=G, ginv=Gi, Ricci=Ric, R=R, Schouten=A, Einstein=E, Weyl=W)


def _cov_2(dT, Gam, T):
    """``nabla_i T_jk`` from partials ``dT[:, i, j, k]``."""
    return dT - np.einsum("npij,npk->nijk", Gam, T) - np.einsum("npik,njp->nijk", Gam, T)


def _cov_4(dT, Gam, T):
    """``nabla_m T_ijkl`` from partials ``dT[:, m, i, j, k, l]``."""
    return (
        dT
        - np.einsum("npmi,npjkl->nmijkl", Gam, T)
        - np.einsum("npmj,nipkl->nmijkl", Gam, T)
        - np.einsum("npmk,nijpl->nmijkl", Gam, T)
        - np.einsum("npml,nijkp->nmijkl", Gam, T)
    )


@dataclass
class CurvatureBundle:
    x: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    Gamma: np.ndarray
    Riemann: np.ndarray
    Ricci: np.ndarray
    R: float
    Schouten: np.ndarray
    Weyl: np.ndarray
    Cotton: np.ndarray
    Einstein: np.ndarray
    nabla_ricci: np.ndarray  # nabla_i Ric_jk
    dR: np.ndarray
    div_weyl: np.ndarray  # nabla^l W_ijkl
    div_einstein: np.ndarray  # nabla^j E_ij

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def norm(self, T: np.ndarray) -> float:
        """Metric norm of a covariant tensor of any rank."""
        out = T
        for _ in range(T.ndim):
            out = np.tensordot(out, self.ginv, axes=([0], [0]))
        return float(math.sqrt(max(np.sum(out * T), 0.0)))

    def ricci_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the Ricci endomorphism ``g^{-1} Ric``, ascending."""
        return np.sort(np.linalg.eigvals(self.ginv @ self.Ricci).real)

    def symmetry_defects(self) -> dict:
        Rm, W, C = self.Riemann, self.Weyl, self.Cotton
        gi = self.ginv
        return {
            "antisym_first": self.norm(Rm + np.swapaxes(Rm, 0, 1)),
            "antisym_last": self.norm(Rm + np.swapaxes(Rm, 2, 3)),
            "pair_sym": self.norm(Rm - np.transpose(Rm, (2, 3, 0, 1))),
            "bianchi": self.norm(Rm + np.transpose(Rm, (0, 2, 3, 1)) + np.transpose(Rm, (0, 3, 1, 2))),
            "weyl_trace": float(np.max(np.abs([
                np.einsum("ik,ijkl->jl", gi, W), np.einsum("il,ijkl->jk", gi, W),
                np.einsum("jk,ijkl->il", gi, W), np.einsum("jl,ijkl->ik", gi, W),
            ]))),
            "cotton_antisym": self.norm(C + np.swapaxes(C, 0, 1)),
            "cotton_trace": float(np.max(np.abs([
                np.einsum("ij,ijk->k", gi, C), np.einsum("ik,ijk->j", gi, C), np.einsum("jk,ijk->i", gi, C),
            ]))),
        }


def _check_point(field: ChartMetricField, x: np.ndarray, levels: int):
    x = np.asarray(x, dtype=float)
    if x.shape != (field.n,):
        raise ParamError(f"point must have {field.n} coordinates")
    reach = 2.0 * levels * field.fd_step
    if np.any(x - reach <= field.lower) or np.any(x + reach >= field.upper):
        raise StencilOutOfRange(f"stencil around {x.tolist()} leaves the valid box")
    G = _metric(field, x[None])[0]
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite(f"metric not positive definite at {x.tolist()}") from exc
    return x


def _bundle_once(field: ChartMetricField, x: np.ndarray) -> CurvatureBundle:
    X = x[None]
    core = _curvature_core(field, X)

    def packed(P):
        c = _curvature_core(field, P)
        N = P.shape[0]
        return np.concatenate(
            [c["Schouten"].reshape(N, -1), c["Weyl"].reshape(N, -1), c["Einstein"].reshape(N, -1),
             c["Ricci"].reshape(N, -1), c["R"].reshape(N, 1)], axis=1)

    n = field.n
    d = _fd(packed, X, field.fd_step)[0]  # (n, total)
    n2, n4 = n * n, n**4
    dA = d[:, :n2].reshape(n, n, n)
    dW = d[:, n2:n2 + n4].reshape(n, n, n, n, n)
    dE = d[:, n2 + n4:2 * n2 + n4].reshape(n, n, n)
    dRic = d[:, 2 * n2 + n4:3 * n2 + n4].reshape(n, n, n)
    dR = d[:, -1]
    Gam = core["Gamma"]
    nabA = _cov_2(dA[None], Gam, core["Schouten"])[0]
    cotton = nabA - np.swapaxes(nabA, 0, 1)
    nabW = _cov_4(dW[None], Gam, core["Weyl"])[0]
    gi = core["ginv"][0]
    nabE = _cov_2(dE[None], Gam, core["Einstein"])[0]
    return CurvatureBundle(
        x=x, g=core["g"][0], ginv=gi, Gamma=Gam[0], Riemann=core["Riemann"][0],
        Ricci=core["Ricci"][0], R=float(core["R"][0]), Schouten=core["Schouten"][0],
        Weyl=core["Weyl"][0], Cotton=cotton, Einstein=core["Einstein"][0],
        nabla_ricci=_cov_2(dRic[None], Gam, core["Ricci"])[0], dR=dR,
        div_weyl=np.einsum("ml,mijkl->ijk", gi, nabW),
        div_einstein=np.einsum("mj,mji->i", gi, nabE),
    )


def curvature_at(field: ChartMetricField, x, richardson: bool = False) -> CurvatureBundle:
    """Full curvature bundle at one point.

    With ``richardson=True`` the bundle is extrapolated from steps ``h`` and
    ``h/2``, lifting every tensor to 6th order in the step.
    """
    x = _check_point(field, x, levels=3)
    b = _bundle_once(field, x)
    if not richardson:
        return b
    b2 = _bundle_once(field.with_step(field.fd_step / 2), x)
    out = {}
    for name in b.__dataclass_fields__:
        v1, v2 = getattr(b, name), getattr(b2, name)
        if name in ("x", "g", "ginv"):
            out[name] = v1
        else:
            out[name] = (16.0 * np.asarray(v2) - np.asarray(v1)) / 15.0
    out["R"] = float(out["R"])
    return CurvatureBundle(**out)


ScalarField = Callable[[np.ndarray], np.ndarray]


def _hessian_batch(field: ChartMetricField, phi: ScalarField, X: np.ndarray):
    dphi = _fd(lambda P: np.asarray(phi(P), float), X, field.fd_step)
    ddphi = _fd(lambda P: _fd(lambda Q: np.asarray(phi(Q), float), P, field.fd_step), X, field.fd_step)
    ddphi = 0.5 * (ddphi + np.swapaxes(ddphi, -1, -2))
    Gam = _christoffel(field, X)[0]
    return dphi, ddphi - np.einsum("nkij,nk->nij", Gam, dphi)


def hessian_and_gradient(field: ChartMetricField, phi: ScalarField, x):
    """Covector gradient ``d phi``, covariant Hessian and Laplacian at ``x``."""
    x = _check_point(field, x, levels=2)
    grad, hess = _hessian_batch(field, phi, x[None])
    gi = np.linalg.inv(_metric(field, x[None])[0])
    return grad[0], hess[0], float(np.sum(gi * hess[0]))


def third_derivative(field: ChartMetricField, phi: ScalarField, x) -> np.ndarray:
    """``T[i, j, k] = nabla_i nabla_j nabla_k phi``."""
    x = _check_point(field, x, levels=3)
    X = x[None]
    dH = _fd(lambda P: _hessian_batch(field, phi, P)[1], X, field.fd_step)
    H = _hessian_batch(field, phi, X)[1]
    Gam = _christoffel(field, X)[0]
    return _cov_2(dH, Gam, H)[0]


def d_tensor_from(bundle: CurvatureBundle, grad: np.ndarray) -> np.ndarray:
    n = bundle.n
    up = bundle.ginv @ grad
    A, E, g = bundle.Schouten, bundle.Einstein, bundle.g
    Ef = E @ up
    D = (np.einsum("ij,k->ijk", A, grad) - np.einsum("ik,j->ijk", A, grad)) / (n - 2)
    D += (np.einsum("ij,k->ijk", g, Ef) - np.einsum("ik,j->ijk", g, Ef)) / ((n - 1) * (n - 2))
    return D


def d_tensor(field: ChartMetricField, phi: ScalarField, x, bundle: CurvatureBundle | None = None):
    """D-tensor and its norm at ``x``."""
    b = bundle if bundle is not None else curvature_at(field, x)
    grad, _, _ = hessian_and_gradient(field, phi, x)
    D = d_tensor_from(b, grad)
    return D, b.norm(D)


# ---------------------------------------------------------------- realizations


def _sphere_chart(k: float):
    def g(Y):
        q = np.sum(Y**2, axis=-1)
        return 4.0 / (1.0 + k * q) ** 2

    return g


def _hyperbolic_chart(k: float):
    def g(Y):
        return 1.0 / (abs(k) * Y[..., -1] ** 2)

    return g


def _fiber_conformal(fiber):
    """Conformal factors (one per irreducible piece) with piece sizes and base points."""
    r, model = fiber.r, fiber.model
    if r == 1 or model in (FiberModel.LINE, FiberModel.FLAT):
        return [(lambda Y: np.ones(Y.shape[:-1]), r, np.full(r, 0.1), 1.0)]
    if model is FiberModel.SPHERE:
        return [(_sphere_chart(fiber.k), r, np.linspace(0.05, 0.15, r) / math.sqrt(fiber.k), 1.0 / math.sqrt(fiber.k))]
    if model is FiberModel.HYPERBOLIC:
        base = np.zeros(r)
        base[:-1] = np.linspace(0.05, 0.15, r - 1)
        base[-1] = 1.0
        return [(_hyperbolic_chart(fiber.k), r, base, 1.0)]
    if model is FiberModel.SPHERE_PRODUCT:
        p = r // 2
        kappa = (r - 1) * fiber.k / (p - 1)
        piece = (_sphere_chart(kappa), p, np.linspace(0.05, 0.15, p) / math.sqrt(kappa), 1.0 / math.sqrt(kappa))
        return [piece, piece]
    raise UnsupportedFiber(f"fiber model {model.value} has no chart realization")


def realize_chart(metric: MultiWarpedMetric, step: float = 1e-2, s0: float | None = None) -> ChartMetricField:
    """Coordinate chart ``(s, y_1, ..., y_{n-1})`` for a warped metric with model fibers."""
    n = metric.n
    if n > MAX_DIM:
        raise ParamError(f"chart oracle supports n <= {MAX_DIM}, got {n}")
    pieces = []  # (block index, conformal fn, slice)
    base = [0.0]
    scales = [1.0]
    start = 1
    for j, blk in enumerate(metric.blocks):
        for fn, size, b0, scale in _fiber_conformal(blk.fiber):
            pieces.append((j, fn, slice(start, start + size)))
            base.extend(b0.tolist())
            scales.extend([scale] * size)
            start += size
    hs = [blk.h for blk in metric.blocks]

    def g(X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1] + (n, n))
        s = X[..., 0]
        out[..., 0, 0] = 1.0
        hsq = [np.asarray(h(s), float) ** 2 for h in hs]
        for j, fn, sl in pieces:
            c = hsq[j] * fn(X[..., sl])
            idx = np.arange(sl.start, sl.stop)
            out[..., idx, idx] = c[..., None]
        return out

    lo, hi = metric.domain
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[0], upper[0] = lo, hi
    for j, fn, sl in pieces:
        if metric.blocks[j].fiber.model is FiberModel.HYPERBOLIC and metric.blocks[j].fiber.r > 1:
            lower[sl.stop - 1] = 0.0
    bp = np.array(base)
    bp[0] = s0 if s0 is not None else 0.5 * sum(metric.sample_range)
    return ChartMetricField(n=n, g=g, lower=lower, upper=upper, fd_step=step * np.array(scales), base_point=bp)


def realize_potential(p) -> ScalarField:
    """The potential as a chart scalar field depending only on ``s``."""
    f = p.f

    def phi(X):
        return np.asarray(f(np.asarray(X)[..., 0]), dtype=float)

    return phi
