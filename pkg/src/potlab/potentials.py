"""Quadrature engine for boundary, interior, Riesz and kernel-model potentials.

Two integrators live here.

* Boundary ring integrals.  A radially symmetric boundary density about a
  center ``c`` is integrated in polar coordinates about ``c``; the angular
  integral over each ring is graded toward the direction of the probe so the
  near-singular Poisson kernel at small ``rho(x)`` is resolved.
* Probe integrals.  Interior potentials ``int K(x, y) f(y) dy`` are evaluated
  lazily in spherical coordinates about the probe ``x``.  The radial rule has
  breakpoints at the boundary exit, at the closest approach to each singular
  boundary point of ``f`` and at the excision sphere around it, and a
  logarithmic tail for long rays.

Every public evaluation can compare two rule levels and raise
:class:`ToleranceFailure` when they disagree by more than ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import DivergenceError, DomainError, ToleranceFailure
from .kernels import (
    KernelSpec,
    green_exact,
    n_kernel,
    n_kernel_raw,
    poisson_constant,
    poisson_exact,
)
from .model import (
    HALFSPACE,
    Atom,
    BoundaryMeasure,
    Domain,
    Field,
    TabulatedDensity,
    measure_ball,
)
from .quadrature import (
    composite_gauss,
    exp_graded,
    householder_to,
    polar_graded,
    ring_weight,
    sphere_area,
    sphere_rule,
)

GROWTH = 0.10  # relative growth that counts as "still growing"
GROWTH_STEPS = 3


@dataclass(frozen=True)
class QuadratureConfig:
    """Rule sizes and the relative error target of the potential engine.

    Attributes
    ----------
    eps : float
        Relative error target; two rule levels differing by more than this
        raise :class:`ToleranceFailure`.
    order, panels : int
        Gauss order and panel count of every graded 1-D rule.
    n_polar, polar_panels, n_azim : int
        Direction rule about a probe point.
    tail_decades : float
        Rays are followed to ``10**tail_decades`` times the near-field length.
    check : bool
        Evaluate a refined rule and compare.
    """

    eps: float = 1e-3
    order: int = 6
    panels: int = 3
    n_polar: int = 6
    polar_panels: int = 4
    n_azim: int = 16
    tail_decades: float = 8.0
    check: bool = True
    max_halvings: int = 40
    step: float = 1.5

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError("eps must be positive")

    def refined(self):
        return replace(self, order=self.order + 3, n_polar=self.n_polar + 3,
                       n_azim=self.n_azim + self.n_azim // 2, panels=self.panels + 1,
                       step=0.75 * self.step, check=False)


DEFAULT_QUAD = QuadratureConfig()


def _checked(fn, cfg, what):
    """Run ``fn(cfg)`` and, when asked, ``fn(cfg.refined())``; return the finer value."""
    v0 = np.asarray(fn(cfg), float)
    if not cfg.check:
        return v0, np.zeros_like(v0)
    v1 = np.asarray(fn(cfg.refined()), float)
    scale = np.maximum(np.abs(v1), 1e-300)
    err = np.abs(v1 - v0) / scale
    err = np.where((v1 == 0.0) & (v0 == 0.0), 0.0, err)
    if np.any(err > cfg.eps):
        i = int(np.argmax(err))
        raise ToleranceFailure(f"{what}: relative error {err.flat[i]:.3g} exceeds {cfg.eps:g}",
                               value=v1, achieved=float(err.max()))
    return v1, err


# ---------------------------------------------------------------------------
# axis frames
# ---------------------------------------------------------------------------


def axis_coordinates(domain: Domain, center, x):
    """Cylindrical coordinates ``(s, w)`` of ``x`` about the axis through ``center``.

    Half-space: ``s = |x' - center|``, ``w = x_N``.  Ball: ``w = x . center``
    and ``s`` the distance to the line through 0 and ``center``.
    """
    x = np.asarray(x, float)
    c = np.asarray(center, float)
    if domain.kind == HALFSPACE:
        return np.linalg.norm(x[..., :-1] - c, axis=-1), x[..., -1]
    w = x @ c
    s = np.sqrt(np.maximum(np.einsum("...i,...i->...", x, x) - w * w, 0.0))
    return s, w


def boundary_frame_point(domain, theta):
    """``(s, w, jacobian, distance-to-center)`` of the boundary ring at parameter theta."""
    d = domain.boundary_dim
    if domain.kind == HALFSPACE:
        return theta, np.zeros_like(theta), theta ** (d - 1), theta
    return np.sin(theta), np.cos(theta), np.sin(theta) ** (d - 1), 2.0 * np.sin(0.5 * theta)


def _one_minus_cos(phi):
    return 2.0 * np.sin(0.5 * phi) ** 2


def sq_distance(xs, xw, ys, yw, omc):
    """``|x - y|^2`` for points at azimuthal separation with ``1 - cos(phi) = omc``."""
    return (xs - ys) ** 2 + (xw - yw) ** 2 + 2.0 * xs * ys * omc


# boundary kernels in axis coordinates -------------------------------------


def poisson_axis(domain, xs, xw, zs, zw, omc):
    N = domain.N
    A = sq_distance(xs, xw, zs, zw, omc)
    if domain.kind == HALFSPACE:
        return poisson_constant(N) * xw * A ** (-0.5 * N)
    return (1.0 - xs * xs - xw * xw) / sphere_area(N - 1) * A ** (-0.5 * N)


def poisson_grad_axis(domain, xs, xw, zs, zw, omc):
    """``(d/ds, d/dw)`` of the Poisson kernel at ``x``."""
    N = domain.N
    A = sq_distance(xs, xw, zs, zw, omc)
    ds = xs - zs * (1.0 - omc)
    dw = xw - zw
    if domain.kind == HALFSPACE:
        k = poisson_constant(N)
        g = k * A ** (-0.5 * N)
        h = N * xw * k * A ** (-0.5 * N - 1.0)
        return -h * ds, g - h * dw
    a = 1.0 / sphere_area(N - 1)
    wgt = 1.0 - xs * xs - xw * xw
    g = -2.0 * a * A ** (-0.5 * N)
    h = N * wgt * a * A ** (-0.5 * N - 1.0)
    return g * xs - h * ds, g * xw - h * dw


def n_boundary_axis(alpha, beta):
    def kern(domain, xs, xw, zs, zw, omc):
        r = np.sqrt(sq_distance(xs, xw, zs, zw, omc))
        rx = xw if domain.kind == HALFSPACE else 1.0 - np.sqrt(xs * xs + xw * xw)
        return n_kernel_raw(alpha, beta, domain.N, r, rx, 0.0)
    return kern


# ---------------------------------------------------------------------------
# boundary ring integrals
# ---------------------------------------------------------------------------


def _theta_rule(domain, comp, xs, xw, cfg):
    """Radial (polar-angle on the sphere) rule for a radial density, per probe."""
    if domain.kind == HALFSPACE:
        tmax = comp.radius
        peak, width = xs, np.maximum(xw, 1e-300)
    else:
        tmax = 2.0 * math.asin(min(1.0, comp.radius / 2.0))
        peak = np.arctan2(xs, xw)
        width = np.maximum(1.0 - np.sqrt(xs * xs + xw * xw), 1e-300)
    a2 = np.minimum(np.maximum(peak, width), tmax)
    a1 = 0.5 * a2
    zero = np.zeros_like(a1)
    kw = dict(panels=cfg.panels, order=cfg.order, step=cfg.step)
    n1, w1 = exp_graded(zero, a1, zero, floor=1e-13, **kw)
    n2, w2 = exp_graded(a1, a2, peak, width=width, **kw)
    n3, w3 = exp_graded(a2, np.full_like(a2, tmax), peak, width=width, **kw)
    return np.concatenate([n1, n2, n3], axis=-1), np.concatenate([w1, w2, w3], axis=-1)


def _density_ring(domain, comp, xs, xw, kernel, cfg):
    """``int k(x, z) f(z) dz`` for a radial density ``comp`` about its own axis."""
    d = domain.boundary_dim
    th, wth = _theta_rule(domain, comp, xs, xw, cfg)  # (M, K)
    zs, zw, jac, dist = boundary_frame_point(domain, th)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(wth > 0.0, comp.profile(dist), 0.0)
    xs3, xw3 = xs[:, None, None], xw[:, None, None]
    a0 = (xs[:, None] - zs) ** 2 + (xw[:, None] - zw) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.sqrt(a0 / np.maximum(xs[:, None] * zs, 1e-300))
    scale = np.clip(np.nan_to_num(scale, nan=math.pi), 1e-9, math.pi)
    phi, wphi = polar_graded(scale, panels=cfg.panels, order=cfg.order, step=cfg.step)  # (M, K, P)
    wphi = wphi * ring_weight(phi, d)
    vals = kernel(domain, xs3, xw3, zs[..., None], zw[..., None], _one_minus_cos(phi))
    if isinstance(vals, tuple):
        return tuple(np.einsum("mkp,mkp,mk->m", v, wphi, wth * jac * dens) for v in vals)
    return np.einsum("mkp,mkp,mk->m", vals, wphi, wth * jac * dens)


def _atom_axis(domain, comp, xs, xw, kernel):
    zs = np.zeros_like(xs)
    zw = zs if domain.kind == HALFSPACE else np.ones_like(xs)
    vals = kernel(domain, xs, xw, zs, zw, np.zeros_like(xs))
    if isinstance(vals, tuple):
        return tuple(comp.mass * v for v in vals)
    return comp.mass * vals


def boundary_axis_potential(domain, comp, xs, xw, kernel, cfg=DEFAULT_QUAD):
    """Potential of one radial component at axis coordinates about its center."""
    xs = np.atleast_1d(np.asarray(xs, float))
    xw = np.atleast_1d(np.asarray(xw, float))
    if isinstance(comp, Atom):
        return _atom_axis(domain, comp, xs, xw, kernel)
    out = None
    chunk = max(1, 40000 // (3 * (cfg.panels + 2) * cfg.order) ** 2)
    parts = []
    for i in range(0, xs.size, chunk):
        parts.append(_density_ring(domain, comp, xs[i:i + chunk], xw[i:i + chunk], kernel, cfg))
    if isinstance(parts[0], tuple):
        out = tuple(np.concatenate([p[k] for p in parts]) for k in range(len(parts[0])))
    else:
        out = np.concatenate(parts)
    return out


def _tabulated_potential(domain, comp: TabulatedDensity, x, kernel_xz, order):
    """Cell-by-cell product Gauss rule, cells subdivided near the probe foot."""
    d = domain.boundary_dim
    lo, vals = comp.cells()
    h = comp.spacing
    g, gw = np.polynomial.legendre.leggauss(order)
    out = np.empty(len(x))
    for m, xm in enumerate(x):
        foot = xm[:-1]
        t = max(xm[-1], 1e-300)
        near = np.linalg.norm(np.maximum(0.0, np.maximum(lo - foot, foot - lo - h)), axis=1)
        nsub = np.clip(np.ceil(3.0 * h / np.maximum(t, near)), 1, 32).astype(int)
        total = 0.0
        for ns in np.unique(nsub):
            sel = nsub == ns
            sub = h / ns
            k1 = (np.arange(ns)[:, None] + 0.5 * (g[None, :] + 1.0)).ravel() * sub
            w1 = np.tile(0.5 * gw * sub, ns)
            mesh = np.stack(np.meshgrid(*([k1] * d), indexing="ij"), axis=-1).reshape(-1, d)
            wm = np.prod(np.stack(np.meshgrid(*([w1] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=1)
            z = lo[sel][:, None, :] + mesh[None, :, :]
            kv = kernel_xz(xm, z)
            total += float(np.einsum("cn,n,c->", kv, wm, vals[sel]))
        out[m] = total
    return out


def _measure_potential(sigma: BoundaryMeasure, x, kernel_axis, kernel_xz, cfg, what):
    domain = sigma.domain
    x = np.atleast_2d(np.asarray(x, float))

    def run(c):
        total = np.zeros(len(x))
        for sign, part in ((1.0, sigma.positive), (-1.0, sigma.negative)):
            for comp in part:
                if isinstance(comp, TabulatedDensity):
                    total += sign * _tabulated_potential(domain, comp, x, kernel_xz, c.order)
                    continue
                center = comp.location if isinstance(comp, Atom) else comp.center
                xs, xw = axis_coordinates(domain, center, x)
                total += sign * boundary_axis_potential(domain, comp, xs, xw, kernel_axis, c)
        return total

    if all(isinstance(c, Atom) for c in sigma.components):
        val = run(cfg)
        return val, np.zeros_like(val)
    return _checked(run, cfg, what)


def poisson_potential(sigma: BoundaryMeasure, x, cfg: QuadratureConfig = DEFAULT_QUAD, return_error=False):
    """``P[sigma](x) = int P(x, z) dsigma(z)`` at one probe or an array of probes.

    Atoms are evaluated in closed form, radial densities by graded ring
    quadrature about their centers, tabulated densities cell by cell.

    Raises
    ------
    DomainError
        If a probe is not interior.
    ToleranceFailure
        If two rule levels disagree by more than ``cfg.eps``.
    """
    domain = sigma.domain
    xa = domain.check_interior(np.atleast_2d(np.asarray(x, float)))
    val, err = _measure_potential(sigma, xa, poisson_axis,
                                  lambda xm, z: poisson_exact(domain, xm, z), cfg, "poisson_potential")
    return _shape_out(x, val, err, return_error)


def n_measure_potential(spec: KernelSpec, sigma: BoundaryMeasure, x, cfg=DEFAULT_QUAD, return_error=False):
    """``N_{alpha,beta}[sigma](x)`` for a boundary measure."""
    domain = sigma.domain
    spec.check(domain.N)
    xa = domain.check_interior(np.atleast_2d(np.asarray(x, float)))
    val, err = _measure_potential(sigma, xa, n_boundary_axis(spec.alpha, spec.beta),
                                  lambda xm, z: n_kernel(spec, domain, xm, z), cfg, "n_potential")
    return _shape_out(x, val, err, return_error)


def _shape_out(x, val, err, return_error):
    if np.asarray(x).ndim == 1:
        val, err = float(val[0]), float(err[0])
    return (val, err) if return_error else val


# ---------------------------------------------------------------------------
# probe integrals over the interior
# ---------------------------------------------------------------------------


def _exit_distance(domain, x, dirs):
    if domain.kind == HALFSPACE:
        dn = dirs[:, -1]
        with np.errstate(divide="ignore"):
            return np.where(dn < 0.0, x[-1] / np.maximum(-dn, 1e-300), np.inf)
    b = dirs @ x
    return -b + np.sqrt(b * b + 1.0 - x @ x)


@dataclass(frozen=True)
class ProbeValue:
    value: float
    error: float
    excision: float = 0.0
    history: tuple = ()


def _probe_once(domain, x, integrand, atoms, a, cfg, breaks=None):
    N = domain.N
    atoms = [np.asarray(z, float) for z in atoms]
    if atoms:
        dists = [float(np.linalg.norm(z - x)) for z in atoms]
        j = int(np.argmin(dists))
        pole = (atoms[j] - x) / dists[j]
        pscale = min(1.0, max(a, 1e-12) / dists[j])
    else:
        if domain.kind == HALFSPACE:
            pole = -np.eye(N)[-1]
        else:
            nx = np.linalg.norm(x)
            pole = x / nx if nx > 1e-12 else np.eye(N)[-1]
        pscale = None
        dists = []
    dirs, wd = sphere_rule(N - 1, n_polar=cfg.n_polar, n_azim=cfg.n_azim, pole_scale=pscale,
                           panels=cfg.polar_panels)
    dirs = dirs @ householder_to(pole).T
    R = _exit_distance(domain, x, dirs)
    rho_x = float(domain.rho(x))
    ln = 4.0 * max([rho_x] + dists)
    rn = np.minimum(R, ln)
    # breakpoints: origin, excision chord ends around each atom, near-field end
    bps = [np.zeros_like(rn)]
    peaks, widths = [], []
    for z in atoms:
        rstar = dirs @ (z - x)
        dmin = np.sqrt(np.maximum((z - x) @ (z - x) - rstar ** 2, 0.0))
        half = np.sqrt(np.maximum(a * a - dmin * dmin, 0.0))
        bps += [np.clip(rstar - half, 0.0, rn), np.clip(rstar + half, 0.0, rn)]
        peaks.append(rstar)
        widths.append(np.maximum(np.maximum(dmin, a), 1e-300))
    if breaks is not None:
        extra = np.atleast_2d(np.asarray(breaks(x, dirs), float).T).T
        bps += [np.clip(e, 0.0, rn) for e in extra.T]
    bps.append(rn)
    bp = np.sort(np.stack(bps, axis=1), axis=1)
    # split the first piece so the origin gets its own graded rule
    first = np.where(bp[:, 1] > 0, bp[:, 1], rn)
    bp = np.concatenate([bp[:, :1], 0.5 * first[:, None], bp[:, 1:]], axis=1)
    bp = np.sort(bp, axis=1)
    nodes, weights = [], []
    P = np.stack(peaks, axis=1) if peaks else None
    W = np.stack(widths, axis=1) if peaks else None
    for i in range(bp.shape[1] - 1):
        lo, hi = bp[:, i], bp[:, i + 1]
        if i == 0:
            c, wdt = np.zeros_like(lo), np.zeros_like(lo)
        elif P is None:
            c, wdt = np.full_like(lo, -1e300), np.zeros_like(lo)
        else:
            mid = 0.5 * (lo + hi)
            k = np.argmin(np.abs(P - mid[:, None]) / W, axis=1)
            c = P[np.arange(len(k)), k]
            wdt = W[np.arange(len(k)), k]
        n, w = exp_graded(lo, hi, c, panels=cfg.panels, order=cfg.order, floor=1e-12, width=wdt, step=cfg.step)
        nodes.append(n)
        weights.append(w)
    # logarithmic tail beyond the near field
    umax = np.where(R > rn, np.log(np.minimum(R, rn * 10.0 ** cfg.tail_decades) / np.maximum(rn, 1e-300)), 0.0)
    tail_panels = max(4, int(math.ceil(cfg.tail_decades * 2)))
    u, wu = composite_gauss(umax[:, None] * np.linspace(0.0, 1.0, tail_panels + 1), cfg.order)
    rt = rn[:, None] * np.exp(u)
    nodes.append(rt)
    weights.append(wu * rt)
    r = np.concatenate(nodes, axis=1)
    wr = np.concatenate(weights, axis=1)
    y = x + r[..., None] * dirs[:, None, :]
    mask = wr > 0.0
    mask &= np.isfinite(r)
    if domain.kind == HALFSPACE:
        mask &= y[..., -1] > 0.0
    else:
        mask &= np.einsum("...i,...i->...", y, y) < 1.0
    for z in atoms:
        mask &= np.linalg.norm(y - z, axis=-1) >= a
    yp = y[mask]
    vals = np.zeros(r.shape)
    if yp.size:
        vals[mask] = integrand(yp)
    return float(np.einsum("dk,dk,dk,d->", vals, wr, r ** (N - 1), wd))


def probe_integral(domain: Domain, x, integrand: Callable, atoms: Sequence = (), excise=None,
                   cfg: QuadratureConfig = DEFAULT_QUAD, breaks=None) -> ProbeValue:
    """``int_Omega integrand(y) dy`` with ``integrand`` singular only at ``atoms``.

    ``integrand`` maps points ``(K, N)`` to values ``(K,)`` and already
    includes the kernel at the probe ``x``.  With atoms and ``excise=None``,
    balls of radius ``a`` about the atoms are removed with ``a`` halved until
    the value settles; three successive growths above 10% raise
    :class:`DivergenceError`.  ``breaks(x, dirs)`` may return extra radial
    breakpoints per direction, shape ``(len(dirs), k)``, where the integrand
    jumps (e.g. the edge of a compactly supported source).
    """
    x = domain.check_interior(np.asarray(x, float))
    atoms = [domain.embed_boundary(np.asarray(z, float)) for z in atoms]

    def at(a, c):
        return _probe_once(domain, x, integrand, atoms, a, c, breaks)

    if not atoms or excise is not None:
        a = float(excise or 0.0)
        val, err = _checked(lambda c: at(a, c), cfg, "probe integral")
        return ProbeValue(float(val), float(err), a)
    a = 0.25 * min(float(np.linalg.norm(z - x)) for z in atoms)
    hist = [at(a, cfg)]
    a, remainder = _shrink_excision(lambda aa: at(aa, cfg), a, hist, cfg)
    val, err = _checked(lambda c: at(a, c), cfg, "probe integral")
    return ProbeValue(float(val) + remainder, float(err), a, tuple(hist))


def _shrink_excision(value_at, a, hist, cfg):
    """Halve the excision radius until the value settles.

    Increments that shrink geometrically (ratio below 0.95) are summed in
    closed form; increments above 10% of the value that do not shrink, three
    times in a row, mean divergence.
    """
    grow = 0
    prev_inc = None
    for _ in range(cfg.max_halvings):
        a *= 0.5
        hist.append(value_at(a))
        prev, cur = hist[-2], hist[-1]
        inc = cur - prev
        ratio = inc / prev_inc if prev_inc not in (None, 0.0) else None
        if prev > 0 and inc > GROWTH * prev and (ratio is None or ratio >= 0.95):
            grow += 1
            if grow >= GROWTH_STEPS:
                raise DivergenceError("integral grows without bound as the excision shrinks", hist)
        else:
            grow = 0
        if ratio is not None and 0.0 <= ratio < 0.95:
            rem = inc * ratio / (1.0 - ratio)
            if abs(rem) <= 0.25 * cfg.eps * max(abs(cur), 1e-300):
                return a, rem
        elif abs(inc) <= 0.05 * cfg.eps * max(abs(cur), 1e-300):
            return a, 0.0
        prev_inc = inc
    raise ToleranceFailure("excision did not settle", value=hist[-1],
                           achieved=abs(hist[-1] - hist[-2]) / max(abs(hist[-1]), 1e-300))


def green_potential(f, x, domain: Domain = None, cfg: QuadratureConfig = DEFAULT_QUAD, atoms=(), excise=None,
                    return_error=False, breaks=None):
    """``G[f](x) = int G(x, y) f(y) dy`` for ``f >= 0``.

    Parameters
    ----------
    f : Field or callable
        Nonnegative source; a callable maps points ``(K, N)`` to values.
    x : array_like
        Interior probe point.
    domain : Domain, optional
        Defaults to the half-space of matching dimension.
    atoms : sequence of boundary points
        Points where ``f`` is singular; excised adaptively (see
        :func:`probe_integral`) unless ``excise`` fixes the radius.
    breaks : callable, optional
        Extra radial breakpoints, see :func:`probe_integral`.
    """
    x = np.asarray(x, float)
    if domain is None:
        domain = Domain.halfspace(x.size)
    if isinstance(f, Field) and np.any(f.values < 0):
        raise DomainError("green_potential needs a nonnegative source")
    pv = probe_integral(domain, x, lambda y: green_exact(domain, x, y) * f(y), atoms, excise, cfg, breaks)
    return (pv.value, pv.error) if return_error else pv.value


def n_potential(spec: KernelSpec, source, x, domain: Domain = None, cfg: QuadratureConfig = DEFAULT_QUAD,
                atoms=(), excise=None, return_error=False, breaks=None):
    """Kernel-model potential ``N_{alpha,beta}[source](x)``.

    ``source`` is a :class:`BoundaryMeasure` or a nonnegative interior
    density (Field or callable); an interior density is weighted by
    ``rho**spec.alpha0``.
    """
    if isinstance(source, BoundaryMeasure):
        return n_measure_potential(spec, source, x, cfg, return_error)
    x = np.asarray(x, float)
    if domain is None:
        domain = Domain.halfspace(x.size)
    spec.check(domain.N)

    def integrand(y):
        return n_kernel(spec, domain, x, y) * source(y) * np.maximum(domain.rho(y), 0.0) ** spec.alpha0

    pv = probe_integral(domain, x, integrand, atoms, excise, cfg, breaks)
    return (pv.value, pv.error) if return_error else pv.value


# ---------------------------------------------------------------------------
# Riesz potentials on R^(N-1)
# ---------------------------------------------------------------------------


def _ball_mass_kinks(mu, y):
    kinks = []
    for comp in mu.positive:
        if isinstance(comp, Atom):
            kinks.append(float(np.linalg.norm(np.asarray(comp.location) - y)))
        elif isinstance(comp, TabulatedDensity):
            lo, _ = comp.cells()
            dist = np.linalg.norm(lo + 0.5 * comp.spacing - y, axis=1)
            kinks += [float(dist.min()), float(dist.max()) + comp.spacing]
        else:
            D = float(np.linalg.norm(np.asarray(comp.center) - y))
            kinks += [abs(D - comp.radius), D + comp.radius]
    return sorted(k for k in set(kinks) if k > 0)


def riesz_potential(mu: BoundaryMeasure, gamma: float, y, order: int = 10, eps: float = 1e-6):
    """Riesz potential by the layer-cake formula.

    ``I_gamma[mu](y) = int_0^inf mu(B'_r(y)) r^(gamma - d) dr / r`` with
    ``d = N - 1``, which equals ``int |y - z|^(gamma - d) / (d - gamma) dmu(z)``.
    Beyond the last kink every mass is inside the ball and the tail is added
    in closed form.  Near ``r = 0`` dyadic shells are added until they are
    negligible; three successive growths above 10% raise
    :class:`DivergenceError`.
    """
    domain = mu.domain
    d = domain.boundary_dim
    if domain.kind != HALFSPACE:
        raise DomainError("Riesz potentials are defined on R^(N-1)")
    if not 0 < gamma < d:
        raise DomainError(f"gamma must lie in (0, {d})")
    if not mu.is_positive:
        raise DomainError("riesz_potential needs a positive measure")
    y = np.asarray(y, float)
    if mu.is_zero:
        return 0.0
    kinks = _ball_mass_kinks(mu, y)
    total_mass = mu.total_variation()
    rmax = kinks[-1] if kinks else 1.0
    g, gw = np.polynomial.legendre.leggauss(order)

    def piece(a, b):
        # Gauss in log r on [a, b]: integrand mu(B_r) r^(gamma-d)
        ua, ub = math.log(a), math.log(b)
        n = max(1, int(math.ceil((ub - ua) / 0.35)))
        tot = 0.0
        for k in range(n):
            u0 = ua + (ub - ua) * k / n
            u1 = ua + (ub - ua) * (k + 1) / n
            us = 0.5 * (u0 + u1) + 0.5 * (u1 - u0) * g
            r = np.exp(us)
            tot += 0.5 * (u1 - u0) * float(np.sum(gw * measure_ball(mu, y, r) * r ** (gamma - d)))
        return tot

    first = kinks[0] if kinks else rmax
    value = total_mass * rmax ** (gamma - d) / (d - gamma)
    pts = kinks
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a * (1 + 1e-12):
            value += piece(a, b)
    # dyadic shells toward r = 0
    state = {"b": first}

    def shell():
        b = state["b"]
        state["b"] = 0.5 * b
        return piece(0.5 * b, b)

    return float(accumulate_increments(shell, value, eps, "Riesz potential diverges at small radii"))


def accumulate_increments(next_increment, value, eps, message, max_steps=200):
    """Add increments until they are negligible.

    Geometrically shrinking increments (ratio below 0.95) are summed in
    closed form once the remainder is below ``eps/4`` of the value.  Three
    successive increments above 10% of the running value that do not shrink
    raise :class:`DivergenceError`.
    """
    hist = [value]
    grow = 0
    prev_inc = None
    for _ in range(max_steps):
        inc = next_increment()
        prev = value
        value += inc
        hist.append(value)
        ratio = inc / prev_inc if prev_inc not in (None, 0.0) else None
        if prev > 0 and inc > GROWTH * prev and (ratio is None or ratio >= 0.95):
            grow += 1
            if grow >= GROWTH_STEPS:
                raise DivergenceError(message, hist)
        else:
            grow = 0
        if ratio is not None and 0.0 <= ratio < 0.95:
            rem = inc * ratio / (1.0 - ratio)
            if abs(rem) <= 0.25 * eps * max(abs(value), 1e-300):
                return value + rem
        elif prev_inc is not None and abs(inc) <= 0.05 * eps * max(abs(value), 1e-300):
            return value
        if value == 0.0 and inc == 0.0 and prev_inc == 0.0:
            return value
        prev_inc = inc
    raise ToleranceFailure(message + " (did not settle)", value=value)


def riesz_convolution(mu: BoundaryMeasure, gamma: float, y):
    """Direct ``int |y - z|^(gamma - d) dmu(z) / (d - gamma)`` (independent route)."""
    domain = mu.domain
    d = domain.boundary_dim
    y = np.asarray(y, float)
    c = 1.0 / (d - gamma)
    total = 0.0
    for comp in mu.positive:
        if isinstance(comp, Atom):
            r = float(np.linalg.norm(np.asarray(comp.location) - y))
            if r == 0.0:
                return math.inf
            total += comp.mass * c * r ** (gamma - d)
        elif isinstance(comp, TabulatedDensity):
            raise DomainError("riesz_convolution supports atoms and radial densities")
        else:
            D = float(np.linalg.norm(np.asarray(comp.center) - y))

            def ring(r):
                # average of |y - z|^(gamma-d) over the sphere |z - center| = r
                def f(phi):
                    return (r * r + D * D - 2 * r * D * math.cos(phi)) ** (0.5 * (gamma - d)) * float(ring_weight(np.array(phi), d))
                v, _ = integrate.quad(f, 0.0, math.pi, points=None, limit=200, epsrel=1e-10)
                return v

            def radial(r):
                return float(comp.profile(r)) * r ** (d - 1) * ring(r)

            brk = [D] if 0 < D < comp.radius else None
            v, _ = integrate.quad(radial, 0.0, comp.radius, points=brk, limit=400, epsrel=1e-9)
            total += c * v
    return total


# ---------------------------------------------------------------------------
# weighted norms and nu-measures
# ---------------------------------------------------------------------------


def _axis_edges(axis, last):
    a = np.asarray(axis, float)
    if a.size == 1:
        return np.array([0.0, 2 * a[0]]) if last else np.array([a[0] - 0.5, a[0] + 0.5])
    if last and a[0] > 0 and np.allclose(a[1:] / a[:-1], a[1] / a[0], rtol=1e-9) and a[1] / a[0] != 2.0:
        e = np.sqrt(a[:-1] * a[1:])
        ratio = a[1] / a[0]
        return np.concatenate([[0.0], e, [a[-1] * math.sqrt(ratio)]])
    e = 0.5 * (a[:-1] + a[1:])
    lo = 0.0 if last else a[0] - (e[0] - a[0])
    return np.concatenate([[lo], e, [a[-1] + (a[-1] - e[-1])]])


def cell_edges(field: Field):
    """Dual-cell edges of a Cartesian Field (stored edges if present)."""
    edges = getattr(field, "edges", None)
    if edges:
        return tuple(np.asarray(e, float) for e in edges)
    n = len(field.axes)
    return tuple(_axis_edges(a, i == n - 1) for i, a in enumerate(field.axes))


def weighted_norm(f: Field, s_prime: float, alpha0: float) -> float:
    """``(int |f|^s' rho^alpha0 dx)^(1/s')`` over the tabulated half-space box.

    ``f`` is piecewise constant on the dual cells of its nodes and the weight
    ``x_N**alpha0`` is integrated exactly over each cell.  The box is the
    truncation: nothing is added beyond it.
    """
    if not s_prime > 1:
        raise DomainError("s' must exceed 1")
    if alpha0 < 0:
        raise DomainError("alpha0 must be nonnegative")
    if f.frame != "cartesian":
        raise DomainError("weighted_norm expects a Cartesian field")
    edges = cell_edges(f)
    vol = np.ones(())
    for e in edges[:-1]:
        vol = np.multiply.outer(vol, np.diff(e))
    et = edges[-1]
    wt = (et[1:] ** (alpha0 + 1.0) - et[:-1] ** (alpha0 + 1.0)) / (alpha0 + 1.0)
    w = np.multiply.outer(vol, wt)
    return float(np.sum(np.abs(f.values) ** s_prime * w) ** (1.0 / s_prime))


def _slice_fraction(R, v, rad, N):
    """Fraction of the sphere ``|y| = R`` inside ``B(x, rad)`` with ``R = |x| + v``.

    Written through ``1 - cos`` so that tiny balls keep full relative accuracy.
    """
    r0 = R - v
    if R <= 0.0 or r0 <= 0.0:
        return float(abs(v) < rad)
    if R + r0 <= rad:
        return 1.0
    if abs(v) >= rad:
        return 0.0
    om = (rad - v) * (rad + v) / (2.0 * R * r0)
    if om >= 2.0:
        return 1.0
    if N == 2:
        return math.acos(1.0 - om) / math.pi
    half = 0.5 * float(special.betainc((N - 1) / 2.0, 0.5, om * (2.0 - om)))
    return half if om <= 1.0 else 1.0 - half


def nu_ball(domain: Domain, alpha0: float, x, s: float) -> float:
    """``nu(B_s(x))`` for ``d nu = rho^alpha0 dx`` restricted to the domain."""
    x = np.asarray(x, float)
    N = domain.N
    if domain.kind == HALFSPACE:
        t = float(x[-1])

        def f(v):
            return (t + v) ** alpha0 * (s * s - v * v) ** (0.5 * (N - 1))

        v, _ = integrate.quad(f, max(-t, -s), s, epsrel=1e-11, limit=200)
        return sphere_area(N - 2) / (N - 1) * v
    r0 = float(np.linalg.norm(x))

    def g(v):
        R = r0 + v
        return (1.0 - R) ** alpha0 * sphere_area(N - 1) * R ** (N - 1) * _slice_fraction(R, v, s, N)

    lo, hi = max(-r0, -s), min(1.0 - r0, s)
    pts = [p for p in (s - 2 * r0,) if lo < p < hi]
    v, _ = integrate.quad(g, lo, hi, points=pts or None, epsrel=1e-11, limit=200)
    return v


def quasi_ball_radius(spec: KernelSpec, N, s, rho_x, rho_y):
    """Euclidean radius ``R`` with ``d(x, y) = s`` along rays where ``rho(y)`` is fixed.

    ``d = R^(N-beta) max(R, rho_x, rho_y)^alpha`` is increasing in ``R``.
    """
    m = np.maximum(rho_x, rho_y)
    big = s ** (1.0 / (N - spec.beta + spec.alpha))
    small = (s * m ** (-spec.alpha)) ** (1.0 / (N - spec.beta))
    return np.where(big >= m, big, small)


def nu_quasi_ball(spec: KernelSpec, domain: Domain, alpha0: float, x, s: float) -> float:
    """``nu`` of the quasi-metric ball ``{y : 1/N_{alpha,beta}(x, y) < s}``."""
    x = np.asarray(x, float)
    N = domain.N
    spec.check(N)
    if domain.kind == HALFSPACE:
        t = float(x[-1])

        def f(v):
            R = float(quasi_ball_radius(spec, N, s, t, t + v))
            h2 = (R - v) * (R + v)
            return (t + v) ** alpha0 * h2 ** (0.5 * (N - 1)) if h2 > 0 else 0.0

        # rho(y) >= 0 only enlarges m, so the reach is the radius at m = rho(x)
        reach = float(quasi_ball_radius(spec, N, s, t, 0.0))
        lo, hi = max(-t, -reach), reach
        brk = {0.0, s ** (1.0 / (N - spec.beta + spec.alpha)) - t}
        # ends of the support, where the chord length vanishes like a square root
        brk |= set(_sign_changes(lambda v: quasi_ball_radius(spec, N, s, t, t + v) - np.abs(v), lo, hi))
        brk = sorted(p for p in brk if lo < p < hi)
        v, _ = integrate.quad(f, lo, hi, points=brk or None, epsrel=1e-10, limit=400)
        return sphere_area(N - 2) / (N - 1) * v
    r0 = float(np.linalg.norm(x))
    rx = 1.0 - r0

    def rr_of(v):
        return quasi_ball_radius(spec, N, s, rx, rx - v)

    def g(v):
        R = r0 + v
        return (1.0 - R) ** alpha0 * sphere_area(N - 1) * R ** (N - 1) * _slice_fraction(R, v, float(rr_of(v)), N)

    reach = float(quasi_ball_radius(spec, N, s, rx, 0.0))
    lo, hi = max(-r0, -reach), min(rx, reach)
    brk = {0.0}
    # offsets where the spherical slice enters, covers, or leaves the quasi-ball
    for h in (lambda v: 2 * r0 + v - rr_of(v), lambda v: v - rr_of(v), lambda v: -v - rr_of(v)):
        brk |= set(_sign_changes(h, lo, hi))
    brk = sorted(p for p in brk if lo < p < hi)
    v, _ = integrate.quad(g, lo, hi, points=brk or None, epsrel=1e-10, limit=400)
    return v


def _sign_changes(h, a, b, n=64):
    """Roots of ``h`` on ``[a, b]`` located by sign changes on a uniform sample.

    ``h`` must accept arrays.
    """
    us = np.linspace(a, b, n + 1)
    hv = np.asarray(h(us), float)
    out = []
    for k in range(n):
        if hv[k] == 0.0:
            out.append(float(us[k]))
        elif hv[k] * hv[k + 1] < 0:
            out.append(float(optimize.brentq(lambda u: float(h(u)), us[k], us[k + 1], xtol=max(1e-300, 1e-13 * (b - a)))))
    return out


def doubling_integral(spec: KernelSpec, domain: Domain, alpha0: float, x, r: float, order=8):
    """``int_0^r nu(quasi-ball_s(x)) s^-2 ds`` by Gauss panels in log s."""
    return float(doubling_integrals(spec, domain, alpha0, x, [r], order)[0])


def doubling_integrals(spec: KernelSpec, domain: Domain, alpha0: float, x, radii, order=8):
    """:func:`doubling_integral` at several radii, accumulated along one panel sweep.

    Panels in ``log s`` span at most one unit and break at every radius and at
    the scale ``rho(x)^(N - beta + alpha)`` where the ball shape changes.
    Below ``1e-8`` times the smallest radius the small-ball power law
    ``nu ~ s^(N/(N-beta))`` (valid once the ball sits inside the domain) is
    integrated in closed form.
    """
    x = np.asarray(x, float)
    radii = np.asarray(radii, float)
    rx = float(domain.rho(x))
    lo = float(radii.min()) * 1e-8
    pts = {lo} | set(radii.tolist())
    if rx > 0:
        pts.add(rx ** (domain.N - spec.beta + spec.alpha))
    brk = sorted(p for p in pts if lo <= p <= radii.max())
    g, gw = np.polynomial.legendre.leggauss(order)
    k = domain.N / (domain.N - spec.beta) - 1.0
    total = nu_quasi_ball(spec, domain, alpha0, x, lo) / lo / k if rx > 0 else 0.0
    cum = {brk[0]: total}
    for a, b in zip(brk[:-1], brk[1:]):
        ua, ub = math.log(a), math.log(b)
        n = max(1, int(math.ceil((ub - ua) / 1.0)))
        for k in range(n):
            u0 = ua + (ub - ua) * k / n
            u1 = ua + (ub - ua) * (k + 1) / n
            for u, w in zip(0.5 * (u0 + u1) + 0.5 * (u1 - u0) * g, gw):
                sv = math.exp(u)
                total += 0.5 * (u1 - u0) * w * nu_quasi_ball(spec, domain, alpha0, x, sv) / sv
        cum[b] = total
    return np.array([cum[float(r)] for r in radii])
