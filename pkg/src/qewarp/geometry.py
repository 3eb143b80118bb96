"""Multiply warped product metrics ``ds^2 + sum_j h_j(s)^2 g_j`` over an interval.

Every fiber ``g_j`` is Einstein with Ricci ``(r_j - 1) k_j g_j``.  All curvature
quantities are evaluated in the adapted orthonormal frame
``{d/ds, e_a = h_j^{-1} (fiber frame)}``, where the Ricci and Schouten tensors are
diagonal and depend on ``s`` only.

Sign convention: ``R_{ijkl}`` is normalised so that the unit round sphere has
``R_{abab} = +1``, and ``Ric_{jl} = sum_i R_{ijil}``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import smooth1d
from .errors import DomainError, ParamError, UnsupportedFiber
from .smooth1d import SmoothFn


class FiberModel(str, enum.Enum):
    LINE = "Line"
    FLAT = "FlatTorus"
    SPHERE = "RoundSphere"
    HYPERBOLIC = "Hyperbolic"
    SPHERE_PRODUCT = "SphereProduct"
    EINSTEIN = "Einstein"  # abstract: Ricci-level analysis only


@dataclass(frozen=True)
class FiberBlock:
    """An ``r``-dimensional Einstein fiber with Ricci ``(r-1)k``."""

    r: int
    k: float = 0.0
    model: FiberModel = FiberModel.EINSTEIN

    def __post_init__(self):
        object.__setattr__(self, "model", FiberModel(self.model))
        if int(self.r) != self.r or self.r < 1:
            raise ParamError(f"fiber dimension must be a positive integer, got {self.r}")
        object.__setattr__(self, "r", int(self.r))
        m = self.model
        if m is FiberModel.LINE and self.r != 1:
            raise ParamError("Line fiber must have r = 1")
        if self.r == 1:
            return
        if m is FiberModel.FLAT and self.k != 0.0:
            raise ParamError("FlatTorus fiber requires k = 0")
        if m is FiberModel.SPHERE and not self.k > 0:
            raise ParamError("RoundSphere fiber requires k > 0")
        if m is FiberModel.HYPERBOLIC and not self.k < 0:
            raise ParamError("Hyperbolic fiber requires k < 0")
        if m is FiberModel.SPHERE_PRODUCT and (self.r % 2 or self.r < 4 or not self.k > 0):
            raise ParamError("SphereProduct needs even r >= 4 and k > 0")

    @property
    def einstein_constant(self) -> float:
        return (self.r - 1) * self.k

    @property
    def realizable(self) -> bool:
        return self.r == 1 or self.model is not FiberModel.EINSTEIN

    def sectional_pairs(self) -> list[tuple[float, int]]:
        """Fiber sectional curvatures of the model metric with their pair counts.

        Only pair-diagonal components ``R_{abab}`` are nonzero for the supported
        models, in the model's product orthonormal frame.
        """
        if self.r == 1:
            return []
        if not self.realizable:
            raise UnsupportedFiber("abstract Einstein fiber has no curvature realization")
        if self.model is FiberModel.SPHERE_PRODUCT:
            p = self.r // 2
            kappa = (self.r - 1) * self.k / (p - 1)
            return [(kappa, p * (p - 1)), (0.0, p * p)]
        return [(self.k, self.r * (self.r - 1) // 2)]


@dataclass(frozen=True)
class WarpedBlock:
    h: SmoothFn
    fiber: FiberBlock


@dataclass(frozen=True)
class MultiWarpedMetric:
    """``ds^2 + sum_j h_j(s)^2 g_j`` on an open ``s``-interval."""

    blocks: tuple[WarpedBlock, ...]
    domain: tuple[float, float] = (-math.inf, math.inf)
    sample_range: tuple[float, float] | None = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)
    min_dim: int = 4  # lowered to 3 only for the Einstein factor of a product

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise ParamError("need at least one fiber block")
        if self.min_dim < 3 or self.n < self.min_dim:
            raise ParamError(f"total dimension must be >= {max(self.min_dim, 3)}, got {self.n}")
        lo, hi = self.domain
        if not lo < hi:
            raise ParamError("empty domain")
        if self.sample_range is None:
            a = lo if math.isfinite(lo) else (hi - 4.0 if math.isfinite(hi) else -2.0)
            b = hi if math.isfinite(hi) else a + 4.0
            pad = 0.02 * (b - a)
            object.__setattr__(self, "sample_range", (a + pad, b - pad))

    @property
    def n(self) -> int:
        return 1 + sum(b.fiber.r for b in self.blocks)

    @property
    def dims(self) -> list[int]:
        return [b.fiber.r for b in self.blocks]

    def samples(self, count: int = 100) -> np.ndarray:
        a, b = self.sample_range
        return np.linspace(a, b, count)

    def check_point(self, s):
        arr = np.asarray(s, dtype=float)
        lo, hi = self.domain
        if np.any(arr <= lo) or np.any(arr >= hi):
            raise DomainError(f"s outside the metric domain ({lo}, {hi})")
        return arr


@dataclass
class AdaptedCurvature:
    """Adapted-frame curvature at one or many ``s`` values.

    Block arrays have a leading axis over blocks.
    """

    s: np.ndarray
    n: int
    dims: list[int]
    lambda1: np.ndarray
    dlambda1: np.ndarray
    lambda_blocks: np.ndarray
    dlambda_blocks: np.ndarray
    xi_blocks: np.ndarray
    dxi_blocks: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    schouten_radial: np.ndarray = field(init=False)
    schouten_blocks: np.ndarray = field(init=False)
    cotton_obstruction: np.ndarray = field(init=False)

    def __post_init__(self):
        c = self.R / (2 * (self.n - 1))
        self.schouten_radial = self.lambda1 - c
        self.schouten_blocks = self.lambda_blocks - c
        self.cotton_obstruction = (
            self.dlambda_blocks
            - (self.lambda1 - self.lambda_blocks) * self.xi_blocks
            - self.dR / (2 * (self.n - 1))
        )

    @property
    def sum_xi(self) -> np.ndarray:
        r = np.asarray(self.dims, dtype=float).reshape((-1,) + (1,) * np.ndim(self.s))
        return np.sum(r * self.xi_blocks, axis=0)

    @property
    def sum_xi_sq(self) -> np.ndarray:
        r = np.asarray(self.dims, dtype=float).reshape((-1,) + (1,) * np.ndim(self.s))
        return np.sum(r * self.xi_blocks**2, axis=0)

    @property
    def cotton_norm(self) -> np.ndarray:
        """Frame norm of the Cotton tensor, built from the per-block obstruction."""
        r = np.asarray(self.dims, dtype=float).reshape((-1,) + (1,) * np.ndim(self.s))
        return np.sqrt(2.0 * np.sum(r * self.cotton_obstruction**2, axis=0))


def adapted_curvature(g: MultiWarpedMetric, s) -> AdaptedCurvature:
    s = g.check_point(s)
    dims = g.dims
    xi, dxi, ddxi, kterm, dkterm = [], [], [], [], []
    for blk in g.blocks:
        hj = blk.h.eval_jet(s)
        if np.any(np.asarray(hj.value) <= 0):
            raise DomainError("warping function must be positive")
        lj = smooth1d.log_jet(blk.h, s)
        xi.append(lj.d1)
        dxi.append(lj.d2)
        ddxi.append(lj.d3)
        c = (blk.fiber.r - 1) * blk.fiber.k
        kh = c / np.asarray(hj.value) ** 2
        kterm.append(kh)
        dkterm.append(-2.0 * kh * lj.d1)
    xi, dxi, ddxi = (np.asarray(v, dtype=float) for v in (xi, dxi, ddxi))
    kterm, dkterm = np.asarray(kterm, dtype=float), np.asarray(dkterm, dtype=float)
    r = np.asarray(dims, dtype=float).reshape((-1,) + (1,) * s.ndim)

    sigma = np.sum(r * xi, axis=0)
    dsigma = np.sum(r * dxi, axis=0)
    lam1 = -np.sum(r * (dxi + xi**2), axis=0)
    dlam1 = -np.sum(r * (ddxi + 2 * xi * dxi), axis=0)
    lam = -dxi - xi * sigma + kterm
    dlam = -ddxi - dxi * sigma - xi * dsigma + dkterm
    R = lam1 + np.sum(r * lam, axis=0)
    dR = dlam1 + np.sum(r * dlam, axis=0)
    return AdaptedCurvature(
        s=s, n=g.n, dims=dims, lambda1=lam1, dlambda1=dlam1,
        lambda_blocks=lam, dlambda_blocks=dlam, xi_blocks=xi, dxi_blocks=dxi,
        R=R, dR=dR,
    )


def ricci_eigenvalues(g: MultiWarpedMetric, s):
    """Radial eigenvalue, per-block eigenvalues (multiplicity r_j), and xi values."""
    c = adapted_curvature(g, s)
    return c.lambda1, c.lambda_blocks, c.xi_blocks


def scalar_curvature(g: MultiWarpedMetric, s):
    """Scalar curvature and its ``s``-derivative."""
    c = adapted_curvature(g, s)
    return c.R, c.dR


def cotton_obstruction(g: MultiWarpedMetric, s) -> np.ndarray:
    """Per-block obstruction to the Schouten tensor being Codazzi.

    Harmonic Weyl curvature holds exactly when every entry vanishes; the
    remaining frame components of the Cotton tensor are identically zero for
    this metric class.
    """
    return adapted_curvature(g, s).cotton_obstruction


@dataclass
class WeylFrame:
    """Pair-diagonal orthonormal-frame Weyl components.

    ``components`` maps a slot label such as ``("radial", 0)``, ``(0, 1)`` or
    ``(1, "intra", 0)`` to ``(value, pair_count)``; the corresponding frame
    entries are ``W_{ijij}`` for each of the ``pair_count`` index pairs.
    """

    components: dict
    weyl_norm: np.ndarray  # |W|^2 summed over all index orderings


def sectional_pairs(g: MultiWarpedMetric, s, curv: AdaptedCurvature | None = None):
    """All pair sectional curvatures of the warped metric, with slot labels."""
    s = g.check_point(s)
    c = curv if curv is not None else adapted_curvature(g, s)
    out = []
    nb = len(g.blocks)
    for j in range(nb):
        out.append((("radial", j), -(c.dxi_blocks[j] + c.xi_blocks[j] ** 2), g.blocks[j].fiber.r))
    for i in range(nb):
        for j in range(i + 1, nb):
            out.append(((i, j), -c.xi_blocks[i] * c.xi_blocks[j], g.dims[i] * g.dims[j]))
    for j, blk in enumerate(g.blocks):
        hsq = np.asarray(blk.h.eval_jet(s).value) ** 2
        for q, (kappa, count) in enumerate(blk.fiber.sectional_pairs()):
            if count:
                out.append(((j, "intra", q), kappa / hsq - c.xi_blocks[j] ** 2, count))
    return out, c


def weyl_frame(g: MultiWarpedMetric, s) -> WeylFrame:
    pairs, c = sectional_pairs(g, s)
    n = g.n
    comps = {}
    total = np.zeros_like(np.asarray(c.R, dtype=float))
    for label, K, count in pairs:
        if label[0] == "radial":
            a, b = c.schouten_radial, c.schouten_blocks[label[1]]
        elif label[1] == "intra":
            a = b = c.schouten_blocks[label[0]]
        else:
            a, b = c.schouten_blocks[label[0]], c.schouten_blocks[label[1]]
        w = K - (a + b) / (n - 2)
        comps[label] = (w, count)
        total = total + 4.0 * count * w**2
    return WeylFrame(components=comps, weyl_norm=total)


def d_tensor_frame(g: MultiWarpedMetric, fp, s, curv: AdaptedCurvature | None = None):
    """Per-block frame value of ``D(e_a, e_a, d/ds)`` and the tensor norm.

    ``fp`` is ``f'(s)``.  All other frame components vanish or follow by
    antisymmetry in the last two slots.
    """
    c = curv if curv is not None else adapted_curvature(g, s)
    n = g.n
    dvals = np.asarray(fp) * ((n - 1) * c.lambda_blocks + c.lambda1 - c.R) / ((n - 1) * (n - 2))
    r = np.asarray(g.dims, dtype=float).reshape((-1,) + (1,) * np.ndim(c.s))
    return dvals, np.sqrt(2.0 * np.sum(r * dvals**2, axis=0))
