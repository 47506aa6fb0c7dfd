"""Riesz and weighted capacities by convex programs.

Boundary sets live in ``R^d`` with ``d = N - 1``.  The Riesz kernel is
``k(x, y) = |x - y|^(gamma - d) / (d - gamma)``, the normalization used by
:func:`potlab.potentials.riesz_potential`.

Discretization
--------------
Densities are piecewise constant on a tensor grid of square cells: side
``h = R / n_res`` over the set (``R`` the radius of its bounding ball) and
geometrically coarser cells out to ``box * R``.  Cell integrals of the kernel
are exact near the target (closed form via ``2F1``) and tensor Gauss far away.
The grid is tied to the set, so dilating the set dilates the discrete program
and both programs inherit the continuum scaling law.

* primal: ``min sum w_j f_j^s`` subject to ``(I f)(x_i) >= 1`` at the lattice
  points of spacing ``h/2`` inside the set.  It is solved through its
  Lagrangian dual (smooth, bound constrained, L-BFGS-B); the recovered ``f`` is
  rescaled to exact feasibility, so the value is attained by a feasible ``f``.
* dual: masses on squares of side ``h/2`` contained in the set; the value
  ``(omega(K) / ||I omega||_{s'})^s`` uses the norm over the whole space
  (tensor Gauss on the grid plus the far-field tail in closed form).  Sets with
  no interior (points) get dual value 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize, special

from .axisym import AxisGrid, AxisGridSpec, annulus_matrix, graded_breakpoints
from .errors import DomainError, InvariantViolation, NonConvergence
from .kernels import KernelSpec
from .model import HALFSPACE, Atom, BoundaryMeasure, Domain, measure_ball
from .quadrature import gauss_legendre, sphere_area

# ---------------------------------------------------------------------------
# sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundarySet:
    """Finite union of closed balls and points in ``R^d``.

    Examples
    --------
    >>> K = BoundarySet.ball((0.0, 0.0), 0.5)
    >>> K.dim, K.is_empty
    (2, False)
    """

    balls: tuple = ()
    points: tuple = ()

    def __post_init__(self):
        balls = tuple((tuple(float(c) for c in ctr), float(r)) for ctr, r in self.balls)
        points = tuple(tuple(float(c) for c in p) for p in self.points)
        dims = {len(c) for c, _ in balls} | {len(p) for p in points}
        if len(dims) > 1:
            raise DomainError("set components have different dimensions")
        if any(r <= 0 or not math.isfinite(r) for _, r in balls):
            raise DomainError("ball radii must be positive and finite")
        object.__setattr__(self, "balls", balls)
        object.__setattr__(self, "points", points)

    @classmethod
    def ball(cls, center, radius):
        return cls(balls=((center, radius),))

    @classmethod
    def point(cls, x):
        return cls(points=(x,))

    @property
    def dim(self):
        if self.balls:
            return len(self.balls[0][0])
        return len(self.points[0]) if self.points else 0

    @property
    def is_empty(self):
        return not self.balls and not self.points

    def union(self, other: "BoundarySet"):
        return BoundarySet(self.balls + other.balls, self.points + other.points)

    def bounding_ball(self):
        """Center (mean of component centers) and radius of a ball containing the set."""
        cs = [np.array(c) for c, _ in self.balls] + [np.array(p) for p in self.points]
        rs = [r for _, r in self.balls] + [0.0] * len(self.points)
        c = np.mean(cs, axis=0)
        R = max(float(np.linalg.norm(ci - c)) + ri for ci, ri in zip(cs, rs))
        return c, R

    def contains(self, x, tol=1e-12):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.zeros(x.shape[0], bool)
        for c, r in self.balls:
            out |= np.linalg.norm(x - np.array(c), axis=1) <= r * (1 + tol)
        for p in self.points:
            out |= np.linalg.norm(x - np.array(p), axis=1) <= tol
        return out

    def to_dict(self):
        return {"balls": [{"center": list(c), "radius": r} for c, r in self.balls],
                "points": [list(p) for p in self.points]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple((b["center"], b["radius"]) for b in data.get("balls", [])),
                   tuple(data.get("points", [])))


def ball_family(center, radii):
    """Balls with a common center, one per radius."""
    return [BoundarySet.ball(center, r) for r in radii]


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapacityConfig:
    """Discretization and optimizer settings.

    Attributes
    ----------
    n_res : int
        Cells per set radius.
    box : float
        Half-width of the density box in units of the set radius.
    growth : float
        Size ratio of consecutive cells outside the set.
    point_scale : float
        Length used in place of the radius for sets made of points only.
    far : float
        Cells farther than ``far`` diameters use tensor Gauss.
    """

    n_res: int = 8
    box: float = 8.0
    growth: float = 1.4
    point_scale: float = 1.0
    far: float = 2.0
    gauss: int = 3
    tol: float = 1e-12
    max_iter: int = 4000
    kkt_tol: float = 1e-3
    # weighted program
    w_levels: int = 14
    w_ratio: float = 0.5

    def to_dict(self):
        return asdict(self)


@dataclass
class CapacityEstimate:
    """Primal (upper) and dual (lower) values of one capacity computation."""

    primal: float
    dual: float
    grid: dict = field(default_factory=dict)
    iterations: int = 0
    kkt: float = 0.0

    def __post_init__(self):
        if self.primal < 0 or self.dual < 0:
            raise InvariantViolation("capacity values must be nonnegative")
        if self.dual > self.primal:
            raise InvariantViolation(f"weak duality violated: dual {self.dual} > primal {self.primal}")

    @property
    def gap(self):
        return self.primal - self.dual

    @property
    def relative_gap(self):
        return self.gap / self.primal if self.primal > 0 else 0.0

    def to_dict(self):
        return {"primal": self.primal, "dual": self.dual, "gap": self.gap,
                "relative_gap": self.relative_gap, "iterations": self.iterations,
                "kkt": self.kkt, "grid": self.grid}


# ---------------------------------------------------------------------------
# exact box integrals of the Riesz kernel
# ---------------------------------------------------------------------------


def _corner_1d(a, gamma):
    return np.sign(a) * np.abs(a) ** gamma / gamma


def _corner_2d(a, b, gamma):
    # int_0^a int_0^b |y|^(gamma - 2) dy (odd in a and in b)
    sa, sb = np.sign(a), np.sign(b)
    a, b = np.abs(a), np.abs(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = b / a
        tb = a / b
        h1 = special.hyp2f1(1 - 0.5 * gamma, 0.5, 1.5, -ta * ta)
        h2 = special.hyp2f1(1 - 0.5 * gamma, 0.5, 1.5, -tb * tb)
        val = (a ** gamma * ta * h1 + b ** gamma * tb * h2) / gamma
    val = np.where((a == 0) | (b == 0), 0.0, val)
    return sa * sb * val


def box_integral(x, lo, hi, gamma):
    """``int_{[lo, hi]} |x - y|^(gamma - d) / (d - gamma) dy`` in closed form.

    ``x`` has shape ``(P, d)``, ``lo`` and ``hi`` shape ``(C, d)``; returns
    ``(P, C)``.  Implemented for ``d`` in ``{1, 2}``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    lo = np.atleast_2d(np.asarray(lo, float))
    hi = np.atleast_2d(np.asarray(hi, float))
    d = x.shape[1]
    A = hi[None, :, :] - x[:, None, :]
    B = lo[None, :, :] - x[:, None, :]
    if d == 1:
        v = _corner_1d(A[..., 0], gamma) - _corner_1d(B[..., 0], gamma)
    elif d == 2:
        v = (_corner_2d(A[..., 0], A[..., 1], gamma) - _corner_2d(B[..., 0], A[..., 1], gamma)
             - _corner_2d(A[..., 0], B[..., 1], gamma) + _corner_2d(B[..., 0], B[..., 1], gamma))
    else:
        raise DomainError("Riesz capacity programs are implemented for d = N - 1 <= 2")
    return v / (d - gamma)


def cell_matrix(x, lo, hi, gamma, far=2.0, gauss=3, block=256):
    """Kernel integrals over cells: exact when near, tensor Gauss otherwise."""
    x = np.atleast_2d(np.asarray(x, float))
    lo = np.atleast_2d(np.asarray(lo, float))
    hi = np.atleast_2d(np.asarray(hi, float))
    d = x.shape[1]
    if d > 2:
        raise DomainError("Riesz capacity programs are implemented for d = N - 1 <= 2")
    g, gw = gauss_legendre(gauss)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    diam = 2.0 * np.linalg.norm(half, axis=1)
    # tensor Gauss nodes per cell: (C, G^d, d)
    grids = np.meshgrid(*([g] * d), indexing="ij")
    ref = np.stack([m.ravel() for m in grids], axis=1)
    wref = np.prod(np.meshgrid(*([gw] * d), indexing="ij"), axis=0).ravel()
    nodes = mid[:, None, :] + half[:, None, :] * ref[None, :, :]
    wts = np.prod(half, axis=1)[:, None] * wref[None, :]
    out = np.empty((x.shape[0], lo.shape[0]))
    for i0 in range(0, x.shape[0], block):
        xb = x[i0:i0 + block]
        r = np.linalg.norm(xb[:, None, None, :] - nodes[None], axis=-1)
        with np.errstate(divide="ignore"):
            val = np.einsum("pcg,cg->pc", r ** (gamma - d), wts) / (d - gamma)
        dist = np.linalg.norm(xb[:, None, :] - mid[None], axis=-1)
        near = dist < far * diam[None, :]
        if near.any():
            pi, ci = np.nonzero(near)
            val[pi, ci] = box_integral_pairs(xb[pi], lo[ci], hi[ci], gamma)
        out[i0:i0 + block] = val
    return out


def box_integral_pairs(x, lo, hi, gamma):
    """Row-wise :func:`box_integral` for matched arrays of points and boxes."""
    d = x.shape[1]
    A, B = hi - x, lo - x
    if d == 1:
        v = _corner_1d(A[:, 0], gamma) - _corner_1d(B[:, 0], gamma)
    else:
        v = (_corner_2d(A[:, 0], A[:, 1], gamma) - _corner_2d(B[:, 0], A[:, 1], gamma)
             - _corner_2d(A[:, 0], B[:, 1], gamma) + _corner_2d(B[:, 0], B[:, 1], gamma))
    return v / (d - gamma)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def _axis_edges(c, R, h, L, growth):
    m = int(math.ceil(R / h)) + 2
    inner = c + h * np.arange(-m, m + 1)
    right = [inner[-1]]
    step = h
    while right[-1] < c + L:
        step *= growth
        right.append(right[-1] + step)
    right = np.array(right[1:])
    left = 2 * c - right[::-1]
    return np.concatenate([left, inner, right])


@dataclass
class _Grid:
    center: np.ndarray
    R: float
    h: float
    lo: np.ndarray  # cells
    hi: np.ndarray
    points: np.ndarray  # primal constraint points
    sq_lo: np.ndarray  # dual squares inside the set
    sq_hi: np.ndarray

    @property
    def volumes(self):
        return np.prod(self.hi - self.lo, axis=1)

    def describe(self):
        return {"center": self.center.tolist(), "radius": self.R, "h": self.h,
                "cells": int(self.lo.shape[0]), "constraints": int(self.points.shape[0]),
                "dual_cells": int(self.sq_lo.shape[0]),
                "extent": float(np.max(np.abs(np.concatenate([self.lo, self.hi]) - self.center)))}


def _build_grid(K: BoundarySet, cfg: CapacityConfig, frame=None):
    c, R = frame if frame is not None else K.bounding_ball()
    c = np.asarray(c, float)
    d = c.size
    scale = R if R > 0 else cfg.point_scale
    h = scale / cfg.n_res
    edges = [_axis_edges(c[k], scale, h, cfg.box * scale, cfg.growth) for k in range(d)]
    lo_m = np.meshgrid(*[e[:-1] for e in edges], indexing="ij")
    hi_m = np.meshgrid(*[e[1:] for e in edges], indexing="ij")
    lo = np.stack([m.ravel() for m in lo_m], axis=1)
    hi = np.stack([m.ravel() for m in hi_m], axis=1)
    # lattice of spacing h/2 anchored at the frame center
    k = int(math.ceil(2 * scale / h)) + 2
    ax = np.arange(-k, k + 1)
    lat = np.stack([m.ravel() for m in np.meshgrid(*([ax] * d), indexing="ij")], axis=1)
    pts = c + 0.5 * h * lat
    inside = K.contains(pts)
    extra = [np.array(cc) for cc, _ in K.balls] + [np.array(p) for p in K.points]
    points = np.unique(np.round(np.concatenate([pts[inside]] + [e[None] for e in extra]), 14), axis=0) \
        if (inside.any() or extra) else np.zeros((0, d))
    # squares of side h/2 contained in some ball (all corners inside)
    sq_lo = c + 0.5 * h * lat
    sq_hi = sq_lo + 0.5 * h
    corners = np.stack([m.ravel() for m in np.meshgrid(*([[0, 1]] * d), indexing="ij")], axis=1)
    ok = np.zeros(sq_lo.shape[0], bool)
    for cc, r in K.balls:
        full = np.ones(sq_lo.shape[0], bool)
        for cr in corners:
            full &= np.linalg.norm(sq_lo + 0.5 * h * cr - np.array(cc), axis=1) <= r
        ok |= full
    return _Grid(c, R, h, lo, hi, points, sq_lo[ok], sq_hi[ok])


def _tail_factor(d, p, L):
    """``int_{|x|_inf > L} |x|^(-p) dx`` on ``R^d``."""
    if d == 1:
        return 2.0 * L ** (1 - p) / (p - 1)
    g, gw = gauss_legendre(16)
    th = 0.125 * math.pi * (g + 1)
    return 8.0 * L ** (2 - p) / (p - 2) * 0.125 * math.pi * float(np.sum(gw * np.cos(th) ** (p - 2)))


# ---------------------------------------------------------------------------
# concave dual programs
# ---------------------------------------------------------------------------


def _maximize_dual(B, w, s, cfg: CapacityConfig, tail=0.0):
    """Maximize ``sum(mu) - c_s (sum_e w_e (B mu)_e^s' + tail * sum(mu)^s')`` over ``mu >= 0``.

    ``B`` maps variable masses to potential values at the quadrature points
    (already divided by the cell weight where relevant).  Returns the optimal
    masses, the objective and the iteration count.  The variables are scaled
    by the optimal uniform start so the iteration does not depend on units.
    """
    sp = s / (s - 1.0)
    cs = (s - 1.0) * s ** (-sp)
    n = B.shape[1]

    def energy(mu):
        g = B @ mu
        return float(w @ g ** sp) + tail * float(mu.sum()) ** sp

    u = np.full(n, 1.0)
    Q = energy(u)
    t = (n / (cs * sp * Q)) ** (1.0 / (sp - 1.0))
    scale = t
    D0 = t * n - cs * t ** sp * Q

    def fun(x):
        mu = scale * x
        g = B @ mu
        M = float(mu.sum())
        val = M - cs * (float(w @ g ** sp) + tail * M ** sp)
        grad = 1.0 - cs * sp * (B.T @ (w * g ** (sp - 1.0)) + tail * M ** (sp - 1.0))
        return -val / D0, -grad * scale / D0

    def hess(x):
        mu = scale * x
        g = B @ mu
        c = cs * sp * (sp - 1.0) * scale ** 2 / D0
        H = (B.T * (w * g ** (sp - 2.0))) @ B
        if tail:
            H = H + tail * float(mu.sum()) ** (sp - 2.0)
        return c * H

    res = optimize.minimize(fun, np.ones(n), jac=True, method="L-BFGS-B",
                            bounds=[(0.0, None)] * n,
                            options={"maxiter": cfg.max_iter, "ftol": cfg.tol, "gtol": 0.0,
                                     "maxcor": 20})
    x, fx, nit = _projected_newton(fun, hess, np.maximum(res.x, 0.0), cfg)
    return scale * x, -fx * D0, int(res.nit) + nit, res


def _projected_newton(fun, hess, x, cfg: CapacityConfig, iters=60):
    """Polish a bound-constrained convex minimum (``x >= 0``) by damped Newton steps.

    The Hessian of the capacity programs is badly conditioned (nearby masses
    have nearly equal potentials), so steps solve ``(H + lam * diag(H)) p = -g``
    on the free set with ``lam`` adapted like Levenberg-Marquardt.
    """
    fx, gx = fun(x)
    lam = 1e-6
    nit = 0
    for nit in range(1, iters + 1):
        pg = np.where(x > 0, gx, np.minimum(gx, 0.0))
        if np.max(np.abs(pg)) < 1e-14:
            break
        free = (x > 0) | (gx < 0)
        H = hess(x)[np.ix_(free, free)]
        dH = np.diag(H).copy()
        while lam < 1e6:
            step = np.zeros_like(x)
            step[free] = -np.linalg.solve(H + lam * np.diag(dH), gx[free])
            xn = np.maximum(x + step, 0.0)
            fn, gn = fun(xn)
            if fn < fx:
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        else:
            break
        done = fx - fn <= 1e-15 * abs(fx)
        x, fx, gx = xn, fn, gn
        if done:
            break
    return x, fx, nit


def _certified(mu, B, w, s, tail):
    sp = s / (s - 1.0)
    M = float(mu.sum())
    if M <= 0:
        return 0.0
    g = B @ mu
    norm = (float(w @ g ** sp) + tail * M ** sp) ** (1.0 / sp)
    return (M / norm) ** s


def _check_params(K, gamma, s):
    d = K.dim
    if not 0 < gamma < d:
        raise DomainError(f"gamma must lie in (0, {d})")
    if s <= 1:
        raise DomainError("s must exceed 1")
    return d


_CACHE: dict = {}


def _cache_key(*parts):
    return json.dumps(parts, sort_keys=True, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o))


def riesz_capacity_primal(K: BoundarySet, gamma: float, s: float, cfg: CapacityConfig = CapacityConfig(),
                          frame=None, return_details=False):
    """Upper estimate of ``Cap_{I_gamma, s}(K)``.

    Minimizes ``int f^s`` over nonnegative cell densities with
    ``I_gamma * f >= 1`` at the constraint points.  ``frame=(center, radius)``
    fixes the grid independently of ``K`` (use it to compare nested sets).

    Returns
    -------
    float, or ``(value, details)`` with ``return_details``.

    Raises
    ------
    NonConvergence
        When the discrete primal and dual values differ by more than
        ``cfg.kkt_tol`` (relative) after the iteration budget.
    """
    if K.is_empty:
        return (0.0, {}) if return_details else 0.0
    _check_params(K, gamma, s)
    key = _cache_key("primal", K.to_dict(), gamma, s, cfg.to_dict(), frame)
    if key not in _CACHE:
        grid = _build_grid(K, cfg, frame)
        vol = grid.volumes
        A = cell_matrix(grid.points, grid.lo, grid.hi, gamma, cfg.far, cfg.gauss)
        # Lagrangian dual of the discrete primal: B = A^T / w acting on point masses
        Bt = A.T / vol[:, None]
        mu, dval, nit, res = _maximize_dual(Bt, vol, s, cfg)
        f = (Bt @ mu / s) ** (1.0 / (s - 1.0))
        lhs = A @ f
        if lhs.min() <= 0:
            raise NonConvergence("primal iterate is not feasible", last_iterate=f)
        f = f / lhs.min()
        value = float(vol @ f ** s)
        kkt = abs(value - dval) / max(value, 1e-300)
        details = {"grid": grid.describe(), "iterations": nit, "kkt": kkt, "discrete_dual": dval}
        if kkt > cfg.kkt_tol:
            raise NonConvergence(f"primal capacity program did not converge (kkt {kkt:.2e})",
                                 last_iterate=f, kkt_residual=kkt)
        _CACHE[key] = (value, details)
    value, details = _CACHE[key]
    return (value, dict(details)) if return_details else value


def riesz_capacity_dual(K: BoundarySet, gamma: float, s: float, cfg: CapacityConfig = CapacityConfig(),
                        frame=None, return_details=False):
    """Lower estimate of ``Cap_{I_gamma, s}(K)`` from ``sup omega(K)^s / ||I_gamma omega||^s_{s'}``.

    ``omega`` ranges over nonnegative masses spread uniformly on squares of
    side ``h/2`` contained in ``K``; the norm covers the whole space (grid
    quadrature plus far-field tail), so every admissible ``omega`` gives a
    valid lower bound up to quadrature error.  Requires ``gamma * s < d``.
    """
    if K.is_empty:
        return (0.0, {}) if return_details else 0.0
    d = _check_params(K, gamma, s)
    sp = s / (s - 1.0)
    p = (d - gamma) * sp
    if p <= d:
        raise DomainError("the dual norm is infinite unless gamma * s < d")
    key = _cache_key("dual", K.to_dict(), gamma, s, cfg.to_dict(), frame)
    if key not in _CACHE:
        grid = _build_grid(K, cfg, frame)
        if grid.sq_lo.shape[0] == 0:
            _CACHE[key] = (0.0, {"grid": grid.describe(), "iterations": 0, "kkt": 0.0})
        else:
            g, gw = gauss_legendre(2)
            refs = np.stack([m.ravel() for m in np.meshgrid(*([g] * d), indexing="ij")], axis=1)
            wref = np.prod(np.meshgrid(*([gw] * d), indexing="ij"), axis=0).ravel()
            mid, half = 0.5 * (grid.lo + grid.hi), 0.5 * (grid.hi - grid.lo)
            ev = (mid[:, None, :] + half[:, None, :] * refs[None]).reshape(-1, d)
            w = (np.prod(half, axis=1)[:, None] * wref[None]).ravel()
            sq_vol = np.prod(grid.sq_hi - grid.sq_lo, axis=1)
            B = cell_matrix(ev, grid.sq_lo, grid.sq_hi, gamma, cfg.far, cfg.gauss) / sq_vol[None, :]
            L = float(np.min(np.abs(np.concatenate([grid.lo.min(0) - grid.center,
                                                     grid.hi.max(0) - grid.center]))))
            tail = _tail_factor(d, p, L) / (d - gamma) ** sp
            mu, _, nit, _ = _maximize_dual(B, w, s, cfg, tail)
            value = _certified(mu, B, w, s, tail)
            _CACHE[key] = (value, {"grid": grid.describe(), "iterations": nit, "kkt": 0.0,
                                   "mass": float(mu.sum())})
    value, details = _CACHE[key]
    return (value, dict(details)) if return_details else value


def riesz_capacity(K: BoundarySet, gamma: float, s: float, cfg: CapacityConfig = CapacityConfig(),
                   frame=None) -> CapacityEstimate:
    """Both programs on the same grid, with weak duality asserted."""
    if K.is_empty:
        return CapacityEstimate(0.0, 0.0)
    P, dp = riesz_capacity_primal(K, gamma, s, cfg, frame, return_details=True)
    D, dd = riesz_capacity_dual(K, gamma, s, cfg, frame, return_details=True)
    return CapacityEstimate(P, D, dp["grid"], dp["iterations"] + dd["iterations"], dp["kkt"])


def clear_cache():
    _CACHE.clear()


# ---------------------------------------------------------------------------
# weighted capacity of boundary sets
# ---------------------------------------------------------------------------


def _rim_edges(r, h, L, levels, ratio, growth):
    # uniform spacing h, refined geometrically toward the rim s = r, coarsening beyond 2r
    base = list(np.arange(0.0, 2 * r + 0.5 * h, h))
    rim = [r + sgn * h * ratio ** k for k in range(1, levels + 1) for sgn in (-1, 1)]
    e = sorted(set(np.round(base + rim, 15)))
    step = h
    while e[-1] < L:
        step *= growth
        e.append(e[-1] + step)
    return np.array(e)


def weighted_grid(domain: Domain, center, r, cfg: CapacityConfig = CapacityConfig()):
    """Axisymmetric grid adapted to the boundary ball ``B'_r(center)``."""
    h = r / cfg.n_res
    L = cfg.box * r
    ue = _rim_edges(r, h, L, cfg.w_levels, cfg.w_ratio, cfg.growth)
    ve = graded_breakpoints(h, cfg.w_ratio, cfg.w_levels, ue[-1])
    spec = AxisGridSpec(L=float(ue[-1]), h=h, ratio=cfg.w_ratio, levels=cfg.w_levels)
    return AxisGrid(domain, spec, tuple(float(c) for c in center), ue, ve)


def weighted_capacity_dual(spec: KernelSpec, s: float, E: BoundarySet, domain: Domain = None,
                           cfg: CapacityConfig = CapacityConfig(), return_details=False):
    """Lower estimate of the weighted capacity ``Cap^{alpha0}_{N_{alpha,beta}, s}(E x {0})``.

    ``E`` is a single closed ball (or a point set) of the boundary of the
    half-space.  Admissible measures are combinations of uniform densities on
    annuli of ``E`` about its center, graded toward the rim; the dual value is
    ``(omega(E) / ||N[omega]||_{L^{s'}(rho^alpha0)})^s`` with the norm by
    midpoint rule on the revolved cells.

    For a point, every measure on ``E`` is an atom; its energy is infinite when
    ``(N - alpha + beta) s' >= N + alpha0`` and the value is 0.
    """
    if E.is_empty:
        return (0.0, {}) if return_details else 0.0
    d = E.dim
    domain = domain or Domain.halfspace(d + 1)
    if domain.kind != HALFSPACE or domain.boundary_dim != d:
        raise DomainError("weighted capacities are computed for boundary sets of the half-space")
    N = domain.N
    sp = s / (s - 1.0)
    if not E.balls:
        if (N - spec.alpha + spec.beta) * sp >= N + spec.alpha0:
            return (0.0, {}) if return_details else 0.0
        raise DomainError("points of finite weighted energy are not supported")
    if len(E.balls) != 1 or E.points:
        raise DomainError("weighted capacities are computed for a single boundary ball")
    (c, r), = E.balls
    key = _cache_key("weighted", E.to_dict(), spec.alpha, spec.beta, spec.alpha0, s, cfg.to_dict())
    if key not in _CACHE:
        grid = weighted_grid(domain, c, r, cfg)
        h = r / cfg.n_res
        edges = np.unique(np.concatenate([np.arange(0.0, r, h),
                                          r - h * cfg.w_ratio ** np.arange(1, cfg.w_levels // 2 + 1), [r]]))
        B = annulus_matrix(grid, spec.alpha, spec.beta, edges)
        area = sphere_area(d - 1) * (edges[1:] ** d - edges[:-1] ** d) / d
        B = B / area[None, :]
        w = grid.weighted_volumes(spec.alpha0)
        mu, _, nit, _ = _maximize_dual(B, w, s, cfg)
        value = _certified(mu, B, w, s, 0.0)
        _CACHE[key] = (value, {"nodes": grid.size, "annuli": int(edges.size - 1), "iterations": nit})
    value, details = _CACHE[key]
    return (value, dict(details)) if return_details else value


# ---------------------------------------------------------------------------
# measures against capacity
# ---------------------------------------------------------------------------


def set_measure(sigma: BoundaryMeasure, K: BoundarySet) -> float:
    """``sigma(K)`` for a single ball, a point set, or pairwise disjoint balls."""
    if K.is_empty or sigma.is_zero:
        return 0.0
    total = 0.0
    balls = K.balls
    for i, (c, r) in enumerate(balls):
        for c2, r2 in balls[i + 1:]:
            if np.linalg.norm(np.array(c) - np.array(c2)) <= r + r2:
                raise DomainError("overlapping balls: sigma(K) is not additive")
        total += measure_ball(sigma, c, r)
    for p in K.points:
        if any(np.linalg.norm(np.array(p) - np.array(c)) <= r for c, r in balls):
            continue
        for comp in sigma.positive:
            if isinstance(comp, Atom) and np.allclose(comp.location, p, atol=1e-12):
                total += comp.mass
    return float(total)


class CapacityRatio(NamedTuple):
    sup_ratio: float
    worst: BoundarySet


def capacity_ratios(sigma: BoundaryMeasure, q: float, family: Sequence[BoundarySet],
                    cfg: CapacityConfig = CapacityConfig()):
    """``sigma(K) / Cap_{I_{2/q}, q'}(K)`` for every set (dual denominators)."""
    if not family:
        raise DomainError("the test family is empty")
    s = q / (q - 1.0)
    gamma = 2.0 / q
    out = []
    for K in family:
        m = set_measure(sigma, K)
        if m == 0.0:
            out.append(0.0)
            continue
        if len(K.balls) == 1 and not K.points:
            # the grid follows the set, so one ball's program is a dilate of the unit ball's
            c, r = K.balls[0]
            unit = BoundarySet.ball(tuple(0.0 for _ in c), 1.0)
            cap = riesz_capacity_dual(unit, gamma, s, cfg) * r ** (len(c) - gamma * s)
        else:
            cap = riesz_capacity_dual(K, gamma, s, cfg)
        out.append(math.inf if cap == 0.0 else m / cap)
    return out


def measure_vs_capacity(sigma: BoundaryMeasure, q: float, family: Sequence[BoundarySet],
                        cfg: CapacityConfig = CapacityConfig()) -> CapacityRatio:
    """Supremum of ``sigma(K) / Cap(K)`` over the family and the set attaining it."""
    if not sigma.is_positive:
        raise DomainError("measure_vs_capacity needs a positive measure")
    ratios = capacity_ratios(sigma, q, family, cfg)
    k = int(np.argmax(ratios))
    return CapacityRatio(float(ratios[k]), family[k])
