"""Collocation grids and kernel matrices for problems symmetric about an axis.

When every component of a boundary measure is radially symmetric about one
boundary point ``c``, the potentials and the solutions of the integral
equations depend only on two coordinates.  On the half-space these are
``(s, t) = (|x' - c|, x_N)``; on the unit ball they are the polar angle
``psi`` from ``c`` and the boundary distance ``rho = 1 - |x|``.

The interior is split into revolved cells of a tensor grid graded
geometrically toward ``s = 0`` and ``t = 0`` (resp. ``psi = 0`` and
``rho = 0``).  A function is represented by its values at cell midpoints and
treated as constant on each cell, so an integral operator with kernel ``K``
becomes the matrix ``W[i, j] = int_{cell j} K(x_i, y) dy``.  Each entry is a
cell quadrature in the meridian plane of the kernel integrated over the
azimuth.  Azimuthal integrals of the Green kernels are hypergeometric and
evaluated in closed form; the cell rule is graded toward the target for
cells close to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError
from .kernels import newton_constant
from .model import HALFSPACE, BoundaryMeasure, Domain, Field
from .potentials import (
    DEFAULT_QUAD,
    QuadratureConfig,
    boundary_axis_potential,
    n_boundary_axis,
    poisson_axis,
    poisson_grad_axis,
)
from .quadrature import exp_graded, gauss_interval, gauss_legendre, ring_weight, sphere_area


def graded_breakpoints(h, ratio, levels, L):
    """``[0, h r^m, ..., h r, h, 2h, ..., L]``: geometric toward 0, uniform above ``h``."""
    if not (0 < ratio < 1 and h > 0 and L >= h):
        raise DomainError("need 0 < ratio < 1 and 0 < h <= L")
    geo = h * ratio ** np.arange(levels, 0, -1)
    n = max(1, int(round((L - h) / h)))
    uni = np.linspace(h, L, n + 1) if L > h * (1 + 1e-12) else np.array([h])
    return np.concatenate([[0.0], geo, uni])


@dataclass(frozen=True)
class AxisGridSpec:
    """Tangential/normal layout of an axisymmetric grid.

    Half-space: box ``s, t in [0, L]`` with uniform cells of size ``h`` above
    ``h`` and ``levels`` geometric cells (ratio ``ratio``) below it, in both
    directions.  Ball: ``psi in [0, pi]`` and ``rho in [0, 1]`` laid out the
    same way (``L`` is ignored).
    """

    L: float = 8.0
    h: float = 0.5
    ratio: float = 0.5
    levels: int = 10
    gauss: int = 4

    def refined(self, extra=1):
        """Add grading levels (finer cells toward the axis and the boundary)."""
        return AxisGridSpec(self.L, self.h, self.ratio, self.levels + extra, self.gauss)

    def enlarged(self):
        return AxisGridSpec(2.0 * self.L, self.h, self.ratio, self.levels, self.gauss)


@dataclass(frozen=True, eq=False)
class AxisGrid:
    """Tensor grid of revolved cells about the axis through ``center``."""

    domain: Domain
    spec: AxisGridSpec
    center: tuple
    u_edges: np.ndarray = field(repr=False)
    v_edges: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, domain: Domain, spec: AxisGridSpec, center=None):
        if center is None:
            d = domain.boundary_dim
            center = (0.0,) * d if domain.kind == HALFSPACE else (0.0,) * d + (1.0,)
        center = tuple(float(c) for c in center)
        if domain.kind == HALFSPACE:
            ue = graded_breakpoints(spec.h, spec.ratio, spec.levels, spec.L)
            ve = ue.copy()
        else:
            ue = graded_breakpoints(spec.h, spec.ratio, spec.levels, math.pi)
            ve = graded_breakpoints(min(spec.h, 0.25), spec.ratio, spec.levels, 1.0)
        return cls(domain, spec, center, ue, ve)

    # -- geometry -------------------------------------------------------
    @property
    def u_nodes(self):
        return 0.5 * (self.u_edges[:-1] + self.u_edges[1:])

    @property
    def v_nodes(self):
        return 0.5 * (self.v_edges[:-1] + self.v_edges[1:])

    @property
    def shape(self):
        return (self.u_edges.size - 1, self.v_edges.size - 1)

    @property
    def size(self):
        return self.shape[0] * self.shape[1]

    def to_sw(self, u, v):
        """Meridian-plane coordinates ``(s, w)`` from grid parameters."""
        if self.domain.kind == HALFSPACE:
            return u, v
        R = 1.0 - v
        return R * np.sin(u), R * np.cos(u)

    def jacobian(self, u, v):
        """Revolved volume density ``s^(N-2) * |d(s,w)/d(u,v)|`` (ring measure excluded)."""
        s, _ = self.to_sw(u, v)
        base = s ** (self.domain.N - 2)
        return base if self.domain.kind == HALFSPACE else base * (1.0 - v)

    def rho_of(self, u, v):
        return v

    @property
    def nodes_uv(self):
        U, V = np.meshgrid(self.u_nodes, self.v_nodes, indexing="ij")
        return U.ravel(), V.ravel()

    @property
    def nodes_sw(self):
        return self.to_sw(*self.nodes_uv)

    @property
    def rho(self):
        return self.nodes_uv[1]

    def cartesian_nodes(self):
        """Node positions in ``R^N`` (placed in the half-plane of the first axis)."""
        N = self.domain.N
        s, w = self.nodes_sw
        x = np.zeros((s.size, N))
        if self.domain.kind == HALFSPACE:
            x[:, 0] = s
            x[:, :-1] += np.asarray(self.center)
            x[:, -1] = w
            return x
        c = np.asarray(self.center)
        # an orthonormal vector perpendicular to c
        e = np.eye(N)[int(np.argmin(np.abs(c)))]
        e = e - (e @ c) * c
        e /= np.linalg.norm(e)
        return s[:, None] * e[None, :] + w[:, None] * c[None, :]

    @property
    def cell_volumes(self):
        """Revolved volumes of the cells."""
        return self.weighted_volumes(0.0)

    def weighted_volumes(self, alpha0):
        """``int_cell rho^alpha0 dx`` for every cell (Gauss, 8 points per axis)."""
        uq, wu = gauss_interval(self.u_edges[:-1], self.u_edges[1:], 8)
        vq, wv = gauss_interval(self.v_edges[:-1], self.v_edges[1:], 8)
        U = uq[:, None, :, None]
        V = vq[None, :, None, :]
        J = self.jacobian(U, V) * V ** alpha0 * wu[:, None, :, None] * wv[None, :, None, :]
        return _ring_total(self.domain.N) * J.sum(axis=(2, 3)).ravel()

    def field(self, values, decay=0.0):
        frame = "axisymmetric" if self.domain.kind == HALFSPACE else "ball-polar"
        return Field((self.u_nodes, self.v_nodes), np.asarray(values, float).reshape(self.shape),
                     frame, self.center, decay)

    def key(self):
        return (self.domain, self.spec)


def _ring_total(N):
    return sphere_area(N - 2)


# ---------------------------------------------------------------------------
# ring-integrated kernels
# ---------------------------------------------------------------------------


def ring_moment(a, b, q, k, d):
    """``int_0^pi (1-cos phi)^k (a + b (1-cos phi))^(-q) w_d(phi) dphi`` in closed form.

    ``w_d`` is the ring weight of :func:`~potlab.quadrature.ring_weight`, so the
    result is the integral over ``S^(d-1)`` of a function of the polar angle.
    Uses the Euler integral of the Gauss hypergeometric function, or complete
    elliptic integrals for the cases needed by the Green kernels in ``R^3``.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if d == 2 and (q, k) in ((0.5, 0), (1.5, 0), (1.5, 1)):
        return _ring_elliptic(a, b, q, k)
    if d == 2 and (q, k) == (1.0, 0):
        with np.errstate(divide="ignore", invalid="ignore"):
            return 2.0 * math.pi / np.sqrt(a * (a + 2.0 * b))
    c = k + 0.5 * (d - 1)
    pref = sphere_area(d - 2) * 2.0 ** (d - 2 + k) * special.beta(c, 0.5 * (d - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return pref * a ** (-q) * special.hyp2f1(q, c, k + d - 1, -2.0 * b / a)


# series of (K(m) - E(m)) / m * 2/pi for small m
_KE_SERIES = (0.5, 3.0 / 16.0, 15.0 / 128.0, 175.0 / 2048.0, 2205.0 / 32768.0)


def _ring_elliptic(a, b, q, k):
    # d = 2: weight 2, a + b(1 - cos) = p - r cos with p = a + b, r = b
    with np.errstate(divide="ignore", invalid="ignore"):
        top = a + 2.0 * b
        m1 = a / top
        m = 2.0 * b / top
        sq = np.sqrt(top)
        if q == 0.5:
            return 4.0 * special.ellipkm1(m1) / sq
        E = special.ellipe(m)
        if k == 0:
            return 4.0 * E / (a * sq)
        # (K - E) / b, computed through (K - E) / m for small m
        small = m < 1e-2
        ms = np.where(small, m, 0.0)
        ser = sum(cf * ms ** n for n, cf in enumerate(_KE_SERIES)) * (0.5 * math.pi)
        ke_m = np.where(small, ser, (special.ellipkm1(m1) - E) / np.where(small, 1.0, m))
        return 4.0 * ke_m * 2.0 / (top * sq)


def _ring_kernels(domain, names, xs, xw, ys, yw):
    """Kernels integrated over the azimuth of the source ring; dict of arrays."""
    N = domain.N
    d = N - 1
    A0 = (xs - ys) ** 2 + (xw - yw) ** 2
    b = 2.0 * xs * ys
    if domain.kind == HALFSPACE:
        rx, ry = xw, yw
        gap = 4.0 * xw * yw
    else:
        nx2 = xs * xs + xw * xw
        ny2 = ys * ys + yw * yw
        rx, ry = 1.0 - np.sqrt(nx2), 1.0 - np.sqrt(ny2)
        gap = (1.0 - nx2) * (1.0 - ny2)
    out = {}
    p = 0.5 * (N - 2)
    for name in names:
        if name == "green":
            out[name] = newton_constant(N) * (ring_moment(A0, b, p, 0, d) - ring_moment(A0 + gap, b, p, 0, d))
        elif name in ("green_s", "green_w"):
            if "green_s" in out:
                continue
            c = newton_constant(N) * (2.0 - N)
            q = 0.5 * N
            m0 = ring_moment(A0, b, q, 0, d)
            i0 = ring_moment(A0 + gap, b, q, 0, d)
            m1 = ring_moment(A0, b, q, 1, d)
            i1 = ring_moment(A0 + gap, b, q, 1, d)
            if domain.kind == HALFSPACE:
                vs0, vw = xs - ys, xw + yw
            else:
                vs0, vw = ny2 * xs - ys, ny2 * xw - yw
            # x_s - y_s cos(phi) = (x_s - y_s) + y_s (1 - cos(phi))
            out["green_s"] = c * ((xs - ys) * m0 + ys * m1 - vs0 * i0 - ys * i1)
            out["green_w"] = c * ((xw - yw) * m0 - vw * i0)
        elif name.startswith("n:"):
            al, be = (float(v) for v in name[2:].split(","))
            out[name] = _ring_n(al, be, N, A0, b, np.maximum(rx, ry))
        else:
            raise KeyError(name)
    return {k: out[k] for k in names}


def _ring_n(alpha, beta, N, A0, b, m0):
    # |x-y|^(beta-N) max(|x-y|, m0)^(-alpha): the singular part is the pure
    # power m0^-alpha A^(-q1); beyond the angle where A = m0^2 the kernel is
    # A^(-q2), so the correction there is smooth and done by Gauss.
    d = N - 1
    q1 = 0.5 * (N - beta)
    q2 = 0.5 * (N - beta + alpha)
    m2 = m0 * m0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(b > 0, (m2 - A0) / b, np.where(m2 > A0, 3.0, -1.0))
    cphi = np.arccos(np.clip(1.0 - u, -1.0, 1.0))
    base = m0 ** (-alpha) * ring_moment(A0, b, q1, 0, d)
    x, w = gauss_legendre(12)
    lo = cphi[..., None]
    half = 0.5 * (math.pi - lo)
    phi = lo + half * (x + 1.0)
    A = A0[..., None] + b[..., None] * (1.0 - np.cos(phi))
    corr = (m2[..., None] ** (-0.5 * alpha) * A ** (-q1) - A ** (-q2)) * ring_weight(phi, d)
    return base - (half * w * corr).sum(axis=-1)


def kernel_name_n(alpha, beta):
    return f"n:{float(alpha)!r},{float(beta)!r}"


# ---------------------------------------------------------------------------
# matrix assembly
# ---------------------------------------------------------------------------

NEAR_FACTOR = 2.0


def _cell_geometry(grid):
    # physical centers and diameters of the cells in the meridian plane
    ue, ve = grid.u_edges, grid.v_edges
    us = np.stack([ue[:-1], 0.5 * (ue[:-1] + ue[1:]), ue[1:]])
    vs = np.stack([ve[:-1], 0.5 * (ve[:-1] + ve[1:]), ve[1:]])
    U = us[:, None, :, None]
    V = vs[None, :, None, :]
    S, W = grid.to_sw(np.broadcast_to(U, (3, 3) + grid.shape), np.broadcast_to(V, (3, 3) + grid.shape))
    cs, cw = S[1, 1], W[1, 1]
    rad = np.sqrt((S - cs) ** 2 + (W - cw) ** 2).max(axis=(0, 1))
    return cs.ravel(), cw.ravel(), 2.0 * rad.ravel()


def _assemble_rows(grid, names, rows, cfg):
    """Rows ``rows`` of every matrix in ``names``: Gauss per cell, then graded rules near the target."""
    domain = grid.domain
    nu, nv = grid.shape
    U, V = grid.nodes_uv
    XS, XW = grid.to_sw(U, V)
    g = grid.spec.gauss
    uq, wu = gauss_interval(grid.u_edges[:-1], grid.u_edges[1:], g)
    vq, wv = gauss_interval(grid.v_edges[:-1], grid.v_edges[1:], g)
    UQ = np.broadcast_to(uq[:, None, :, None], (nu, nv, g, g))
    VQ = np.broadcast_to(vq[None, :, None, :], (nu, nv, g, g))
    WQ = wu[:, None, :, None] * wv[None, :, None, :]
    YS, YW = grid.to_sw(UQ, VQ)
    JW = (grid.jacobian(UQ, VQ) * WQ).reshape(1, nu * nv, g * g)
    YS = YS.reshape(1, nu * nv, g * g)
    YW = YW.reshape(1, nu * nv, g * g)
    rows = np.asarray(rows)
    xs = XS[rows][:, None, None]
    xw = XW[rows][:, None, None]
    vals = _ring_kernels(domain, names, xs, xw, YS, YW)
    out = {k: _integrate(vals[k], JW) for k in names}
    cs, cw, diam = _cell_geometry(grid)
    for k, i in enumerate(rows):
        dist = np.hypot(cs - XS[i], cw - XW[i])
        near = np.flatnonzero(dist < NEAR_FACTOR * diam)
        near = near[near != i]
        if near.size:
            vals = _cell_batch(grid, names, i, near, cfg, panels=1, floor=1e-6, step=cfg.step)
            for name in names:
                out[name][k, near] = vals[name]
        vals = _cell_batch(grid, names, i, np.array([i]), cfg, panels=1, floor=1e-7, step=cfg.step)
        for name in names:
            out[name][k, i] = vals[name][0]
    return out


def _integrate(vals, weights):
    return (np.nan_to_num(vals, posinf=0.0, neginf=0.0) * weights).sum(axis=-1)


def _cell_batch(grid, names, i, cells, cfg, panels, floor, step):
    """Integrals over the cells ``cells`` with product rules graded toward node ``i``."""
    U, V = grid.nodes_uv
    ut, vt = U[i], V[i]
    xs, xw = grid.to_sw(ut, vt)
    ju, jv = np.divmod(cells, grid.shape[1])
    ua, ub = grid.u_edges[ju], grid.u_edges[ju + 1]
    va, vb = grid.v_edges[jv], grid.v_edges[jv + 1]
    # the peak along one axis is smoothed by the offset along the other
    du = np.maximum(np.maximum(ua - ut, ut - ub), 0.0)
    dv = np.maximum(np.maximum(va - vt, vt - vb), 0.0)
    kw = dict(panels=panels, order=cfg.order, floor=floor, step=step)
    un, uw = exp_graded(ua, ub, np.full(cells.size, ut), width=dv, **kw)
    vn, vw = exp_graded(va, vb, np.full(cells.size, vt), width=du, **kw)
    UQ = np.broadcast_to(un[:, :, None], un.shape + (vn.shape[1],))
    VQ = np.broadcast_to(vn[:, None, :], UQ.shape)
    WQ = uw[:, :, None] * vw[:, None, :]
    YS, YW = grid.to_sw(UQ, VQ)
    JW = (grid.jacobian(UQ, VQ) * WQ).reshape(cells.size, -1)
    vals = _ring_kernels(grid.domain, names, xs, xw, YS.reshape(cells.size, -1), YW.reshape(cells.size, -1))
    return {name: _integrate(vals[name], JW) for name in names}


_MATRIX_CACHE: dict = {}


def kernel_matrices(grid: AxisGrid, names, cfg: QuadratureConfig = DEFAULT_QUAD, threads=1):
    """Matrices ``W[name][i, j] = int_{cell j} K_name(x_i, y) dy`` (cached per grid).

    Names: ``"green"``, ``"green_s"``, ``"green_w"`` (radial and axial
    components of the gradient in ``x``), and ``"n:alpha,beta"`` for the
    model kernels.  Matrices depend only on the grid, not on any measure.
    """
    names = tuple(names)
    if "green_s" in names and "green_w" not in names:
        names = names + ("green_w",)
    if "green_w" in names and "green_s" not in names:
        names = names + ("green_s",)
    key = (grid.domain, grid.spec, cfg.order, cfg.step)
    cached = _MATRIX_CACHE.setdefault(key, {})
    todo = tuple(n for n in names if n not in cached)
    if todo:
        n = grid.size
        blocks = [list(range(i, min(n, i + 16))) for i in range(0, n, 16)]
        if threads and threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(lambda rows: _assemble_rows(grid, todo, rows, cfg), blocks))
        else:
            parts = [_assemble_rows(grid, todo, rows, cfg) for rows in blocks]
        for name in todo:
            m = np.concatenate([p[name] for p in parts], axis=0)
            m.setflags(write=False)
            cached[name] = m
    return {n: cached[n] for n in names}


def clear_cache():
    _MATRIX_CACHE.clear()


# ---------------------------------------------------------------------------
# boundary potentials at the nodes
# ---------------------------------------------------------------------------


def check_axisymmetric(sigma: BoundaryMeasure, grid: AxisGrid):
    c = sigma.radial_center()
    if c is None or not np.allclose(c, grid.center, atol=1e-12):
        raise DomainError("measure is not radially symmetric about the grid axis")


def nodal_boundary_potential(sigma: BoundaryMeasure, grid: AxisGrid, kind="poisson", spec=None,
                             cfg: QuadratureConfig = DEFAULT_QUAD):
    """Boundary potential of ``sigma`` at the grid nodes.

    ``kind`` is ``"poisson"``, ``"poisson_grad"`` (returns the ``(s, w)``
    components) or ``"n"`` (model kernel ``N_{alpha,beta}`` from ``spec``).
    """
    if not sigma.is_zero:
        check_axisymmetric(sigma, grid)
    xs, xw = grid.nodes_sw
    if kind == "poisson":
        kern = poisson_axis
    elif kind == "poisson_grad":
        kern = poisson_grad_axis
    elif kind == "n":
        kern = n_boundary_axis(spec.alpha, spec.beta)
    else:
        raise KeyError(kind)
    comps = list(sigma.positive) + [c.scaled(-1.0) for c in sigma.negative]
    if kind == "poisson_grad":
        out = (np.zeros(xs.size), np.zeros(xs.size))
        for comp in comps:
            gs, gw = boundary_axis_potential(grid.domain, comp, xs, xw, kern, cfg)
            out = (out[0] + gs, out[1] + gw)
        return out
    out = np.zeros(xs.size)
    for comp in comps:
        out = out + boundary_axis_potential(grid.domain, comp, xs, xw, kern, cfg)
    return out


def annulus_matrix(grid: AxisGrid, alpha, beta, edges, order=8):
    """``B[i, k] = int_{edges[k] <= |z - c| < edges[k+1]} N_{alpha,beta}(x_i, z) dz``.

    Half-space only.  For boundary ``z`` the model kernel is the pure power
    ``|x - z|^(beta - N - alpha)``, so the azimuthal integral is closed-form
    and the radial one uses rules graded toward the radius of the node.
    """
    if grid.domain.kind != HALFSPACE:
        raise DomainError("annulus_matrix is implemented for the half-space")
    N = grid.domain.N
    d = N - 1
    q = 0.5 * (N - beta + alpha)
    edges = np.asarray(edges, float)
    xs, xw = grid.nodes_sw
    a = np.broadcast_to(edges[:-1], (xs.size, edges.size - 1))
    b = np.broadcast_to(edges[1:], a.shape)
    # grade toward the node radius, smoothed by its height
    z, wz = exp_graded(a, b, np.broadcast_to(xs[:, None], a.shape), panels=2, order=order,
                       width=np.broadcast_to(xw[:, None], a.shape), floor=1e-9, step=1.0)
    A0 = (xs[:, None, None] - z) ** 2 + xw[:, None, None] ** 2
    ring = ring_moment(A0, 2.0 * xs[:, None, None] * z, q, 0, d)
    return (ring * z ** (d - 1) * wz).sum(axis=-1)
