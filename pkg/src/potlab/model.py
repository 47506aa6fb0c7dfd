"""Domains, boundary measures, graded grids and tabulated fields.

Two domains are supported: the half-space ``R^N_+ = R^(N-1) x (0, inf)`` and
the unit ball of ``R^N``.  Boundary points of the half-space are given by their
``N-1`` tangential coordinates; boundary points of the ball are unit vectors
in ``R^N`` and boundary distances on the sphere are chordal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError
from .quadrature import ball_volume, sphere_area, sphere_rule

HALFSPACE = "halfspace"
UNITBALL = "ball"

_GEOM_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """Half-space ``R^N_+`` or unit ball in ``R^N`` (``N >= 3``)."""

    kind: str = HALFSPACE
    N: int = 3

    def __post_init__(self):
        if self.kind not in (HALFSPACE, UNITBALL):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if int(self.N) != self.N or self.N < 3:
            raise DomainError(f"dimension must be an integer >= 3, got {self.N}")

    @classmethod
    def halfspace(cls, N=3):
        return cls(HALFSPACE, N)

    @classmethod
    def ball(cls, N=3):
        return cls(UNITBALL, N)

    @property
    def boundary_dim(self):
        """Dimension ``N - 1`` of the boundary."""
        return self.N - 1

    def rho(self, x):
        """Distance to the boundary, vectorized over the leading axes of ``x``.

        No membership check is done; see :func:`rho` for the checked version.
        """
        x = np.asarray(x, float)
        if self.kind == HALFSPACE:
            return x[..., -1]
        return 1.0 - np.linalg.norm(x, axis=-1)

    def contains(self, x, closed=True):
        r = self.rho(x)
        return r >= -_GEOM_TOL if closed else r > 0.0

    def check_interior(self, x):
        x = np.asarray(x, float)
        if x.shape[-1] != self.N:
            raise DomainError(f"expected points in R^{self.N}, got shape {x.shape}")
        if np.any(self.rho(x) <= 0.0):
            raise DomainError("point is not interior to the domain")
        return x

    def embed_boundary(self, z):
        """Boundary point(s) as points of ``R^N``."""
        z = np.asarray(z, float)
        if self.kind == HALFSPACE:
            return np.concatenate([z, np.zeros(z.shape[:-1] + (1,))], axis=-1)
        return z

    def check_boundary(self, z):
        z = np.asarray(z, float)
        if self.kind == HALFSPACE:
            if z.shape[-1] != self.N - 1:
                raise DomainError(f"half-space boundary points have {self.N - 1} coordinates")
        else:
            if z.shape[-1] != self.N or np.any(np.abs(np.linalg.norm(z, axis=-1) - 1.0) > 1e-9):
                raise DomainError("ball boundary points must be unit vectors")
        return z


def rho(domain: Domain, x) -> np.ndarray | float:
    """Distance from ``x`` to the boundary of ``domain``.

    Raises
    ------
    DomainError
        If any point lies outside the closed domain.
    """
    x = np.asarray(x, float)
    if x.shape[-1] != domain.N:
        raise DomainError(f"expected points in R^{domain.N}")
    r = domain.rho(x)
    if np.any(r < -_GEOM_TOL):
        raise DomainError("point outside the closure of the domain")
    r = np.maximum(r, 0.0)
    return float(r) if r.ndim == 0 else r


# ---------------------------------------------------------------------------
# boundary measures
# ---------------------------------------------------------------------------


def _cap_fraction(cos_angle, d):
    """Fraction of S^(d-1) within angle acos(cos_angle) of a pole."""
    return _cap_fraction_om(1.0 - np.clip(cos_angle, -1.0, 1.0), d)


def _cap_fraction_om(om, d):
    """:func:`_cap_fraction` written in ``om = 1 - cos`` (accurate for thin caps)."""
    om = np.clip(np.asarray(om, float), 0.0, 2.0)
    if d == 2:
        return 2.0 * np.arcsin(np.sqrt(0.5 * om)) / math.pi
    half = 0.5 * special.betainc((d - 1) / 2.0, 0.5, om * (2.0 - om))
    return np.where(om <= 1.0, half, 1.0 - half)


def _flat_shell_fraction(r, D, rad, d):
    """Fraction of the sphere ``|z - a| = r`` lying in the ball ``B(b, rad)``, ``|a-b| = D``."""
    r = np.asarray(r, float)
    return _flat_shell_fraction_offset(r - D, D, rad, d)


def _flat_shell_fraction_offset(u, D, rad, d):
    """:func:`_flat_shell_fraction` at ``r = D + u``, free of cancellation for small ``rad``."""
    u = np.asarray(u, float)
    r = D + u
    if D < 1e-300:
        return (r <= rad).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        om = (rad - u) * (rad + u) / (2.0 * r * D)
    out = _cap_fraction_om(om, d)
    out = np.where(r + D <= rad, 1.0, out)
    out = np.where((np.abs(u) >= rad) & (r + D > rad), 0.0, out)
    return out


def _sphere_shell_fraction(psi, Psi, theta, d):
    """Fraction of the geodesic circle of radius ``psi`` about ``a`` inside the
    geodesic ball of radius ``theta`` about ``b``, with ``dist(a, b) = Psi``."""
    psi = np.asarray(psi, float)
    if Psi < 1e-14:
        return (psi <= theta).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (math.cos(theta) - np.cos(psi) * math.cos(Psi)) / (np.sin(psi) * math.sin(Psi))
    out = _cap_fraction(c, d)
    out = np.where(psi + Psi <= theta, 1.0, out)
    out = np.where((psi >= Psi + theta) | (Psi >= psi + theta), 0.0, out)
    return out


def _chord_to_geodesic(r):
    return 2.0 * math.asin(min(1.0, r / 2.0))


@dataclass(frozen=True)
class Atom:
    """Point mass ``mass * delta_location``."""

    location: tuple
    mass: float

    def scaled(self, c):
        return Atom(self.location, self.mass * c)

    def abs(self):
        return Atom(self.location, abs(self.mass))

    @property
    def sign(self):
        return np.sign(self.mass)


class _RadialDensity:
    def profile(self, r):
        raise NotImplementedError

    @property
    def sign(self):
        return np.sign(self.coefficient)


@dataclass(frozen=True)
class RadialPowerDensity(_RadialDensity):
    """Density ``c |z - center|^p`` on the ball ``|z - center| <= radius``."""

    center: tuple
    exponent: float
    radius: float
    coefficient: float

    def profile(self, r):
        r = np.asarray(r, float)
        with np.errstate(divide="ignore"):
            return self.coefficient * np.where(r <= self.radius, r ** self.exponent, 0.0)

    def scaled(self, c):
        return RadialPowerDensity(self.center, self.exponent, self.radius, self.coefficient * c)

    def abs(self):
        return RadialPowerDensity(self.center, self.exponent, self.radius, abs(self.coefficient))


@dataclass(frozen=True)
class UniformBallDensity(_RadialDensity):
    """Density ``c`` on the ball ``|z - center| <= radius``."""

    center: tuple
    radius: float
    coefficient: float

    exponent = 0.0

    def profile(self, r):
        r = np.asarray(r, float)
        return np.where(r <= self.radius, self.coefficient, 0.0)

    def scaled(self, c):
        return UniformBallDensity(self.center, self.radius, self.coefficient * c)

    def abs(self):
        return UniformBallDensity(self.center, self.radius, abs(self.coefficient))


@dataclass(frozen=True)
class TabulatedDensity:
    """Piecewise-constant density on a uniform rectilinear grid of ``R^(N-1)``.

    ``values[i, j, ...]`` is the density on the cell with lower corner
    ``origin + spacing * (i, j, ...)``.  Half-space only.
    """

    origin: tuple
    spacing: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, float))

    def scaled(self, c):
        return TabulatedDensity(self.origin, self.spacing, self.values * c)

    def abs(self):
        return TabulatedDensity(self.origin, self.spacing, np.abs(self.values))

    @property
    def sign(self):
        if np.all(self.values >= 0):
            return 1.0
        if np.all(self.values <= 0):
            return -1.0
        return 0.0

    def cells(self):
        """Lower corners (M, d), cell values (M,), for nonzero cells."""
        idx = np.argwhere(self.values != 0.0)
        lo = np.asarray(self.origin, float) + self.spacing * idx
        return lo, self.values[tuple(idx.T)]

    def __eq__(self, other):
        return (
            isinstance(other, TabulatedDensity)
            and tuple(self.origin) == tuple(other.origin)
            and self.spacing == other.spacing
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((tuple(self.origin), self.spacing, self.values.tobytes()))


Component = Atom | RadialPowerDensity | UniformBallDensity | TabulatedDensity


def _split_sign(comp):
    """Split a component into (positive part, negative part), either may be None."""
    if isinstance(comp, TabulatedDensity):
        pos = np.maximum(comp.values, 0.0)
        neg = np.maximum(-comp.values, 0.0)
        return (
            TabulatedDensity(comp.origin, comp.spacing, pos) if pos.any() else None,
            TabulatedDensity(comp.origin, comp.spacing, neg) if neg.any() else None,
        )
    s = comp.sign
    if s > 0:
        return comp, None
    if s < 0:
        return None, comp.abs()
    return None, None


@dataclass(frozen=True)
class BoundaryMeasure:
    """Finite signed measure on the boundary, stored as positive and negative parts.

    Build it with :meth:`from_components`; each part is a tuple of components
    with nonnegative masses/coefficients.
    """

    domain: Domain
    positive: tuple = ()
    negative: tuple = ()

    @classmethod
    def from_components(cls, domain: Domain, components: Sequence[Component]):
        pos, neg = [], []
        for comp in components:
            _validate_component(domain, comp)
            p, n = _split_sign(comp)
            if p is not None:
                pos.append(p)
            if n is not None:
                neg.append(n)
        return cls(domain, tuple(pos), tuple(neg))

    @classmethod
    def zero(cls, domain: Domain):
        return cls(domain, (), ())

    @property
    def is_positive(self):
        return len(self.negative) == 0

    @property
    def is_zero(self):
        return not self.positive and not self.negative

    @property
    def components(self):
        """Signed components (negative part carries negated masses)."""
        return self.positive + tuple(c.scaled(-1.0) for c in self.negative)

    def abs(self):
        """``|sigma|``: positive plus negative part (exact for mutually singular parts)."""
        return BoundaryMeasure(self.domain, self.positive + self.negative, ())

    def scaled(self, c):
        if c >= 0:
            return BoundaryMeasure(self.domain, tuple(p.scaled(c) for p in self.positive),
                                   tuple(n.scaled(c) for n in self.negative))
        return BoundaryMeasure(self.domain, tuple(n.scaled(-c) for n in self.negative),
                               tuple(p.scaled(-c) for p in self.positive))

    def atoms(self):
        return [c for c in self.components if isinstance(c, Atom)]

    def radial_center(self):
        """Common center of radial symmetry, or ``None``."""
        center = None
        for comp in self.components:
            if isinstance(comp, TabulatedDensity):
                return None
            c = comp.location if isinstance(comp, Atom) else comp.center
            c = tuple(float(v) for v in c)
            if center is None:
                center = c
            elif not np.allclose(center, c, atol=1e-14):
                return None
        if center is None:
            d = self.domain.boundary_dim
            center = tuple([0.0] * d) if self.domain.kind == HALFSPACE else tuple([0.0] * d + [1.0])
        return center

    def total_variation(self):
        return sum(_component_mass(self.domain, c) for c in self.positive + self.negative)

    def support_radius(self, center=None):
        """Radius of a ball about ``center`` containing the support (inf if unbounded)."""
        d = self.domain.boundary_dim
        if center is None:
            center = np.zeros(d)
        center = np.asarray(center, float)
        out = 0.0
        for comp in self.positive + self.negative:
            if isinstance(comp, Atom):
                out = max(out, float(np.linalg.norm(np.asarray(comp.location) - center)))
            elif isinstance(comp, TabulatedDensity):
                lo, _ = comp.cells()
                corners = [lo, lo + comp.spacing]
                out = max(out, max(float(np.max(np.linalg.norm(c - center, axis=1))) for c in corners))
            else:
                out = max(out, float(np.linalg.norm(np.asarray(comp.center) - center)) + comp.radius)
        return out


def _validate_component(domain, comp):
    d = domain.boundary_dim
    if isinstance(comp, Atom):
        domain.check_boundary(np.asarray(comp.location, float))
        if not math.isfinite(comp.mass):
            raise DomainError("atom mass must be finite")
        return
    if isinstance(comp, TabulatedDensity):
        if domain.kind != HALFSPACE:
            raise DomainError("tabulated densities are supported on the half-space only")
        if comp.values.ndim != d or len(comp.origin) != d or comp.spacing <= 0:
            raise DomainError("tabulated density grid does not match the boundary dimension")
        if not np.all(np.isfinite(comp.values)):
            raise DomainError("tabulated density has non-finite values")
        return
    domain.check_boundary(np.asarray(comp.center, float))
    if not (comp.radius > 0 and math.isfinite(comp.radius)):
        raise DomainError("density cutoff radius must be positive and finite")
    if isinstance(comp, RadialPowerDensity) and comp.exponent <= -d:
        raise DomainError(f"radial power exponent must exceed -{d} for finite mass")


def _component_mass(domain, comp):
    d = domain.boundary_dim
    if isinstance(comp, Atom):
        return abs(comp.mass)
    if isinstance(comp, TabulatedDensity):
        return float(np.abs(comp.values).sum() * comp.spacing ** d)
    if domain.kind == HALFSPACE:
        p = comp.exponent
        return abs(comp.coefficient) * sphere_area(d - 1) * comp.radius ** (p + d) / (p + d)
    return float(_sphere_component_ball_mass(comp.abs(), np.asarray(comp.center, float), np.array([2.0]), d)[0])


def _cap_volume(R, h, d):
    """Volume of the cap of height ``h`` (0 <= h <= 2R) of a d-ball of radius ``R``."""
    R, h = np.broadcast_arrays(np.asarray(R, float), np.asarray(h, float))
    full = ball_volume(d) * R ** d
    hh = np.where(h <= R, h, 2.0 * R - h)
    x = np.clip((2.0 * R * hh - hh * hh) / np.maximum(R * R, 1e-300), 0.0, 1.0)
    cap = 0.5 * full * special.betainc((d + 1) / 2.0, 0.5, x)
    return np.where(h <= R, cap, full - cap)


def lens_volume(R1, R2, D, d):
    """Volume of the intersection of d-balls of radii R1, R2 with centers ``D`` apart."""
    R1, R2, D = np.broadcast_arrays(*(np.asarray(v, float) for v in (R1, R2, D)))
    out = np.zeros(R1.shape)
    inner = D <= np.abs(R1 - R2)
    out = np.where(inner, ball_volume(d) * np.minimum(R1, R2) ** d, out)
    mid = (~inner) & (D < R1 + R2)
    Ds = np.where(mid, D, 1.0)
    c1 = (Ds * Ds + R1 * R1 - R2 * R2) / (2.0 * Ds)
    c2 = Ds - c1
    v = _cap_volume(R1, np.clip(R1 - c1, 0, 2 * R1), d) + _cap_volume(R2, np.clip(R2 - c2, 0, 2 * R2), d)
    return np.where(mid, v, out)


def _shell_rule(lo, hi, order=8):
    from .quadrature import endpoint_graded
    return endpoint_graded(lo, hi, panels=2, order=order, floor=1e-12, step=1.5)


def _sphere_component_ball_mass(comp, qcenter, r, d):
    r = np.atleast_1d(np.asarray(r, float))
    c0 = np.asarray(comp.center, float)
    Psi = math.acos(max(-1.0, min(1.0, float(c0 @ qcenter))))
    theta = 2.0 * np.arcsin(np.minimum(1.0, r / 2.0))
    psimax = _chord_to_geodesic(comp.radius)
    p = comp.exponent
    area = sphere_area(d - 1)
    # integrate over psi in [0, psimax] with breaks at |Psi - theta|, Psi + theta
    b1 = np.clip(np.abs(Psi - theta), 0.0, psimax)
    b2 = np.clip(Psi + theta, 0.0, psimax)
    out = np.zeros(r.shape)
    for lo, hi in ((np.zeros_like(b1), b1), (b1, b2), (b2, np.full_like(b2, psimax))):
        x, w = _shell_rule(lo, hi)
        chord = 2.0 * np.sin(0.5 * x)
        frac = np.stack([_sphere_shell_fraction(x[i], Psi, theta[i], d) for i in range(len(r))])
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(w > 0, chord ** p * np.sin(x) ** (d - 1) * frac, 0.0)
        out += np.sum(w * f, axis=-1)
    return comp.coefficient * area * out


def _flat_component_ball_mass(comp, center, r, d):
    r = np.atleast_1d(np.asarray(r, float))
    c0 = np.asarray(comp.center, float)
    D = float(np.linalg.norm(c0 - center))
    R = comp.radius
    p = comp.exponent
    area = sphere_area(d - 1)
    if isinstance(comp, UniformBallDensity):
        return comp.coefficient * lens_volume(R, r, D, d)
    # shells of radius < r - D lie entirely inside the query ball
    m = np.clip(r - D, 0.0, R)
    full = area * m ** (p + d) / (p + d)
    # the rest in the offset u = shell radius - D, so tiny balls keep their digits
    lo = np.maximum(m - D, -r)
    hi = np.maximum(np.minimum(R - D, r), lo)
    u, w = _shell_rule(lo, hi)
    x = D + u
    frac = _flat_shell_fraction_offset(u, D, r[:, None], d)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where((w > 0) & (x > 0), x ** (p + d - 1) * frac, 0.0)
    partial = np.sum(w * f, axis=-1)
    # the graded rule stops 1e-12 short of a zero lower end; add that sliver
    tiny = (D + lo == 0.0) & (hi > lo)
    if np.any(tiny):
        e = 1e-12 * (D + hi)
        partial = partial + np.where(tiny, _flat_shell_fraction(e, D, r, d) * e ** (p + d) / (p + d), 0.0)
    return comp.coefficient * (full + area * partial)


def _tabulated_ball_mass(comp, center, r, d, sub=8):
    lo, vals = comp.cells()
    h = comp.spacing
    hi = lo + h
    # distance from center to nearest / farthest point of each cell
    near = np.linalg.norm(np.maximum(0.0, np.maximum(lo - center, center - hi)), axis=1)
    far = np.linalg.norm(np.maximum(np.abs(lo - center), np.abs(hi - center)), axis=1)
    total = float(vals[far <= r].sum()) * h ** d
    partial = (near < r) & (far > r)
    if np.any(partial):
        g = (np.arange(sub) + 0.5) / sub
        offs = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d) * h
        pts = lo[partial][:, None, :] + offs[None, :, :]
        inside = np.linalg.norm(pts - center, axis=2) <= r
        total += float((vals[partial] * inside.mean(axis=1)).sum()) * h ** d
    return total


def measure_ball(sigma: BoundaryMeasure, center, r) -> float:
    """Mass ``sigma(B'_r(center))`` of a closed boundary ball.

    On the half-space the ball is Euclidean in ``R^(N-1)``; on the unit ball
    it is the chordal ball on the sphere.  ``r`` may be an array of radii, in
    which case an array is returned.

    Raises
    ------
    DomainError
        If ``r <= 0`` or ``sigma`` has a negative part.
    """
    ra = np.atleast_1d(np.asarray(r, float))
    if not np.all(ra > 0):
        raise DomainError("ball radius must be positive")
    if not sigma.is_positive:
        raise DomainError("measure_ball is defined for positive measures only")
    domain = sigma.domain
    d = domain.boundary_dim
    center = domain.check_boundary(np.asarray(center, float))
    total = np.zeros(ra.shape)
    for comp in sigma.positive:
        if isinstance(comp, Atom):
            dist = np.linalg.norm(np.asarray(comp.location, float) - center)
            total += np.where(dist <= ra * (1 + 1e-14), comp.mass, 0.0)
        elif isinstance(comp, TabulatedDensity):
            total += np.array([_tabulated_ball_mass(comp, center, rr, d) for rr in ra])
        elif domain.kind == HALFSPACE:
            total += _flat_component_ball_mass(comp, center, ra, d)
        else:
            total += _sphere_component_ball_mass(comp, center, ra, d)
    return float(total[0]) if np.ndim(r) == 0 else total


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Truncated, boundary-graded sampling grid.

    Half-space: box ``[-L, L]^(N-1) x (0, L]`` with tangential cells of width
    ``h`` and normal levels ``t_k = L * ratio**k`` for ``k = 1..levels``.
    Unit ball: shells at boundary distance ``t_k = L * ratio**k`` (``L <= 1``)
    with angular cells of size about ``h``.
    """

    L: float = 4.0
    h: float = 0.5
    ratio: float = 0.5
    levels: int = 20

    def __post_init__(self):
        if not (self.L > 0 and self.h > 0):
            raise DomainError("L and h must be positive")
        if not 0.0 < self.ratio < 1.0:
            raise DomainError("grading ratio must lie in (0, 1)")
        if int(self.levels) != self.levels or self.levels < 1:
            raise DomainError("levels must be a positive integer")

    def normal_levels(self):
        k = np.arange(1, self.levels + 1)
        return self.L * self.ratio ** k

    def refined(self):
        """Halve ``h`` and add one grading level."""
        return GridSpec(self.L, self.h / 2.0, self.ratio, self.levels + 1)


def _normal_cells(t):
    # t descending geometric; dual cells split at geometric midpoints
    t = np.asarray(t, float)
    edges = np.empty(t.size + 1)
    edges[0] = t[0] / math.sqrt(t[1] / t[0]) if t.size > 1 else 2 * t[0]
    edges[1:-1] = np.sqrt(t[:-1] * t[1:])
    edges[-1] = 0.0
    return edges


def grid_axes(domain: Domain, spec: GridSpec):
    """Coordinate axes of the half-space sampling grid (ascending)."""
    if domain.kind != HALFSPACE:
        raise DomainError("grid axes are defined for the half-space grid only")
    n = int(round(2 * spec.L / spec.h))
    if abs(n * spec.h - 2 * spec.L) > 1e-9 * spec.L:
        raise DomainError("2L must be an integer multiple of h")
    tang = -spec.L + spec.h * (np.arange(n) + 0.5)
    t = spec.normal_levels()[::-1]
    return tuple([tang] * (domain.N - 1) + [t])


def sample_grid(domain: Domain, spec: GridSpec):
    """Quadrature nodes and positive weights for the truncated domain.

    Returns
    -------
    points : ndarray (M, N)
    weights : ndarray (M,)
        Sum to the volume of the truncated box (half-space) or of the ball.
    """
    if domain.kind == HALFSPACE:
        axes = grid_axes(domain, spec)
        t_desc = spec.normal_levels()
        edges = _normal_cells(t_desc)
        edges[0] = spec.L
        wt = (edges[:-1] - edges[1:])[::-1]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        w = np.broadcast_to(wt, mesh[0].shape).ravel() * spec.h ** (domain.N - 1)
        return pts, np.ascontiguousarray(w)
    return _ball_grid(domain, spec)


def _ball_grid(domain, spec):
    N = domain.N
    if spec.L > 1.0:
        raise DomainError("unit-ball grids need L <= 1")
    t = spec.normal_levels()
    edges = _normal_cells(t)
    edges[0] = spec.L
    # radial shells in |x|: from 1 - edges; plus the core ball |x| < 1 - L
    radii = 1.0 - t
    inner = 1.0 - edges[:-1]
    outer = 1.0 - edges[1:]
    vol_unit = ball_volume(N)
    n_dir = max(8, int(round(2 * math.pi / spec.h)))
    dirs, wd = sphere_rule(N - 1, n_polar=max(2, n_dir // 8), n_azim=n_dir, panels=4)
    wd = wd * (sphere_area(N - 1) / wd.sum())
    shell_vol = (outer ** N - inner ** N) / N
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, N)
    w = (shell_vol[:, None] * wd[None, :]).ravel()
    core_r = 1.0 - spec.L
    if core_r > 0:
        # core: shells at uniform spacing h in |x|
        nc = max(1, int(math.ceil(core_r / spec.h)))
        e = np.linspace(0.0, core_r, nc + 1)
        mid = 0.5 * (e[:-1] + e[1:])
        vol = (e[1:] ** N - e[:-1] ** N) / N
        cpts = (mid[:, None, None] * dirs[None, :, :]).reshape(-1, N)
        cw = (vol[:, None] * wd[None, :]).ravel()
        pts = np.concatenate([cpts, pts])
        w = np.concatenate([cw, w])
    w *= vol_unit / w.sum()  # remove round-off so weights reproduce |B_1|
    return pts, w


@dataclass(frozen=True)
class Field:
    """Scalar function tabulated on a rectilinear grid.

    ``frame='cartesian'`` tabulates on ``R^N`` coordinates; ``frame='axisymmetric'``
    tabulates on ``(s, t)`` where ``s = |x' - center|`` and ``t = x_N``;
    ``frame='ball-polar'`` tabulates on ``(angle to center, 1 - |x|)``.
    Evaluation is multilinear between nodes, clamped toward the boundary, and
    multiplied by ``(extent / r)^decay`` beyond the box, where ``r`` is the
    sup-norm distance from the box center.
    """

    axes: tuple
    values: np.ndarray = field(repr=False)
    frame: str = "cartesian"
    center: tuple = ()
    decay: float = 0.0

    def __post_init__(self):
        axes = tuple(np.asarray(a, float) for a in self.axes)
        vals = np.asarray(self.values, float)
        if vals.shape != tuple(a.size for a in axes):
            raise DomainError("field values do not match the grid axes")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)
        interp = RegularGridInterpolator(axes, vals, method="linear", bounds_error=False, fill_value=None)
        object.__setattr__(self, "_interp", interp)

    @property
    def nodes(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def _coords(self, x):
        x = np.asarray(x, float)
        if self.frame == "axisymmetric":
            c = np.asarray(self.center, float)
            s = np.linalg.norm(x[..., :-1] - c, axis=-1)
            return np.stack([s, x[..., -1]], axis=-1)
        if self.frame == "ball-polar":
            c = np.asarray(self.center, float)
            r = np.linalg.norm(x, axis=-1)
            cosang = np.clip((x @ c) / np.maximum(r, 1e-300), -1.0, 1.0)
            return np.stack([np.arccos(cosang), 1.0 - r], axis=-1)
        return x

    def __call__(self, x):
        y = self._coords(x)
        shape = y.shape[:-1]
        y = y.reshape(-1, y.shape[-1])
        lo = np.array([a[0] for a in self.axes])
        hi = np.array([a[-1] for a in self.axes])
        yc = np.clip(y, lo, hi)
        out = self._interp(yc)
        if self.decay:
            # decay measured from the box top corner along each coordinate
            ratio = np.max(np.maximum(np.abs(y), 1e-300) / np.maximum(np.abs(yc), 1e-300), axis=1)
            out = out * np.maximum(ratio, 1.0) ** (-self.decay)
        return out.reshape(shape)

    def map(self, fn):
        return Field(self.axes, fn(self.values), self.frame, self.center, self.decay)

    def to_csv(self, path):
        """Write node coordinates and values, one node per row."""
        nodes = self.nodes
        names = {"axisymmetric": ["s", "t"], "ball-polar": ["psi", "rho"]}.get(self.frame) or \
            [f"x{i + 1}" for i in range(nodes.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["value"])
            for p, v in zip(nodes, self.values.ravel()):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def field_from_function(domain: Domain, spec: GridSpec, fn, decay=0.0):
    """Tabulate ``fn(points)`` on the half-space sampling grid."""
    axes = grid_axes(domain, spec)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return Field(axes, np.asarray(fn(pts), float).reshape(mesh[0].shape), "cartesian", (), decay)
