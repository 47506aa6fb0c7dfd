"""Model kernels ``N_{alpha,beta}``, exact Green/Poisson kernels and Hardy exponents.

All functions broadcast over leading axes: points are arrays whose last axis
holds coordinates.  Boundary points of the half-space may be given either with
``N - 1`` coordinates or already embedded in ``R^N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import DomainError
from .model import HALFSPACE, Domain
from .quadrature import sphere_area


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the kernel model ``N_{alpha,beta}`` and its nonlinearity.

    ``alpha0`` is the exponent of the weight ``rho**alpha0`` multiplying the
    nonlinearity ``V**q``.
    """

    alpha: float = 2.0
    beta: float = 2.0
    alpha0: float = 0.0
    q: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= self.beta:
            raise DomainError("kernel parameters need 0 <= alpha <= beta")
        if self.alpha0 < 0:
            raise DomainError("alpha0 must be nonnegative")
        if not self.q > 1:
            raise DomainError("q must exceed 1")

    def check(self, N):
        if not self.beta < N:
            raise DomainError(f"beta must be < N = {N}")
        return self

    def decay_exponent(self, N):
        """Homogeneity degree ``N - beta + alpha`` of the kernel (half-space)."""
        return N - self.beta + self.alpha


@dataclass(frozen=True)
class HardyParams:
    """Hardy coefficient ``kappa`` in ``[0, 1/4]``."""

    kappa: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 0.25:
            raise DomainError("kappa must lie in [0, 1/4]")

    @property
    def root(self):
        return math.sqrt(max(0.0, 1.0 - 4.0 * self.kappa))

    @property
    def a(self):
        return 0.5 * (1.0 + self.root)

    @property
    def alpha_h(self):
        return 1.0 + self.root


class HardyExponents(NamedTuple):
    a: float
    alpha_h: float
    alpha0_h: float
    cap_order: float


def hardy_exponents(h: HardyParams, q: float) -> HardyExponents:
    """Boundary exponent, kernel exponent, weight exponent and capacity order.

    >>> hardy_exponents(HardyParams(0.0), 3.0).cap_order == 2 / 3
    True
    """
    if not isinstance(h, HardyParams):
        h = HardyParams(float(h))
    if not q > 1:
        raise DomainError("q must exceed 1")
    s = h.root
    a = 0.5 * (1.0 + s)
    # (q + 3 - (q - 1) s) / (2q), written so that s = 1 gives 2/q exactly
    cap = ((q - 1.0) * (1.0 - s) + 4.0) / (2.0 * q)
    return HardyExponents(a, 2.0 * a, (q + 1.0) * a, cap)


# ---------------------------------------------------------------------------
# normalization constants
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def poisson_constant(N: int) -> float:
    """``k_N`` with ``int_{R^(N-1)} k_N t / |(z, -t)|^N dz = 1``.

    Computed once per dimension by radial quadrature.
    """
    val, _ = integrate.quad(lambda r: r ** (N - 2) / (r * r + 1.0) ** (N / 2.0), 0.0, np.inf,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return 1.0 / (sphere_area(N - 2) * val)


@lru_cache(maxsize=None)
def newton_constant(N: int) -> float:
    """``c_N`` in the fundamental solution ``c_N |x|^(2-N)`` of ``-Laplace``.

    Related to the Poisson constant by ``k_N = 2 (N - 2) c_N`` (the Poisson
    kernel is the inward normal derivative of the half-space Green function).
    """
    return poisson_constant(N) / (2.0 * (N - 2))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _as_space(domain, p):
    p = np.asarray(p, float)
    if domain.kind == HALFSPACE and p.shape[-1] == domain.N - 1:
        return domain.embed_boundary(p)
    if p.shape[-1] != domain.N:
        raise DomainError(f"expected points with {domain.N} coordinates")
    return p


def _rho(domain, p):
    return np.maximum(domain.rho(p), 0.0)


def _sqdist(x, y):
    d = x - y
    return np.einsum("...i,...i->...", d, d)


# ---------------------------------------------------------------------------
# model kernels
# ---------------------------------------------------------------------------


def n_kernel(spec: KernelSpec, domain: Domain, x, y):
    """``|x-y|^(beta-N) * max(|x-y|, rho(x), rho(y))^(-alpha)``.

    Returns ``inf`` on the diagonal ``x == y``.  ``y`` may be a boundary point.
    """
    spec.check(domain.N)
    x = _as_space(domain, x)
    y = _as_space(domain, y)
    r = np.sqrt(_sqdist(x, y))
    m = np.maximum(r, np.maximum(_rho(domain, x), _rho(domain, y)))
    with np.errstate(divide="ignore"):
        out = r ** (spec.beta - domain.N) * m ** (-spec.alpha)
    out = np.where(r > 0.0, out, np.inf)
    return float(out) if out.ndim == 0 else out


def n_kernel_raw(alpha, beta, N, r, rx, ry):
    """Kernel from precomputed distance ``r`` and boundary distances (no checks)."""
    m = np.maximum(r, np.maximum(rx, ry))
    with np.errstate(divide="ignore"):
        return r ** (beta - N) * m ** (-alpha)


def quasi_distance(spec: KernelSpec, domain: Domain, x, y):
    """``d = 1 / N_{alpha,beta}``; zero on the diagonal."""
    spec.check(domain.N)
    x = _as_space(domain, x)
    y = _as_space(domain, y)
    r = np.sqrt(_sqdist(x, y))
    m = np.maximum(r, np.maximum(_rho(domain, x), _rho(domain, y)))
    return r ** (domain.N - spec.beta) * m ** spec.alpha


# ---------------------------------------------------------------------------
# exact kernels
# ---------------------------------------------------------------------------


def _image_gap(domain, x, y):
    # |x - y*|^2 - |x - y|^2 scaled so that both domains share one formula
    if domain.kind == HALFSPACE:
        return 4.0 * x[..., -1] * y[..., -1]
    return (1.0 - np.einsum("...i,...i->...", x, x)) * (1.0 - np.einsum("...i,...i->...", y, y))


def green_raw(N, A, D):
    """``c_N A^(-p/2) (1 - (1 + D/A)^(-p/2))`` with ``p = N - 2``.

    ``A = |x-y|^2`` and ``D`` the image gap; stable for ``D << A``.
    """
    p = N - 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -np.expm1(-0.5 * p * np.log1p(D / A)) * A ** (-0.5 * p)
    return newton_constant(N) * val


def green_exact(domain: Domain, x, y):
    """Green function of ``-Laplace`` with zero boundary values.

    Half-space: method of images.  Unit ball: Kelvin image.  Vanishes when
    either point is on the boundary; ``inf`` on the diagonal.
    """
    x = _as_space(domain, x)
    y = _as_space(domain, y)
    if np.any(domain.rho(x) < -1e-12) or np.any(domain.rho(y) < -1e-12):
        raise DomainError("Green function arguments must lie in the closed domain")
    A = _sqdist(x, y)
    D = np.maximum(_image_gap(domain, x, y), 0.0)
    out = np.where(A > 0.0, green_raw(domain.N, np.where(A > 0, A, 1.0), D), np.inf)
    out = np.where((D == 0.0) & (A > 0.0), 0.0, out)
    return float(out) if out.ndim == 0 else out


def poisson_exact(domain: Domain, x, z):
    """Poisson kernel, normalized so that it integrates to 1 over the boundary."""
    x = _as_space(domain, x)
    z = _as_space(domain, z)
    r = domain.rho(x)
    if np.any(r <= 0.0):
        raise DomainError("Poisson kernel needs an interior point x")
    N = domain.N
    dist = np.sqrt(_sqdist(x, z))
    if domain.kind == HALFSPACE:
        out = poisson_constant(N) * x[..., -1] / dist ** N
    else:
        out = (1.0 - np.einsum("...i,...i->...", x, x)) / (sphere_area(N - 1) * dist ** N)
    return float(out) if np.ndim(out) == 0 else out


def grad_green_exact(domain: Domain, x, y):
    """Gradient in ``x`` of :func:`green_exact` (shape of ``x``)."""
    x = _as_space(domain, x)
    y = _as_space(domain, y)
    N = domain.N
    c = newton_constant(N) * (2.0 - N)
    if domain.kind == HALFSPACE:
        ys = y.copy()
        ys[..., -1] *= -1.0
        scale = 1.0
    else:
        ny2 = np.einsum("...i,...i->...", y, y)
        ys = y / ny2[..., None]
        scale = ny2 ** ((2.0 - N) / 2.0)
    d1 = x - y
    d2 = x - ys
    r1 = np.sqrt(np.einsum("...i,...i->...", d1, d1))
    r2 = np.sqrt(np.einsum("...i,...i->...", d2, d2))
    return c * (d1 * (r1 ** -N)[..., None] - (scale * r2 ** -N)[..., None] * d2)


def grad_poisson_exact(domain: Domain, x, z):
    """Gradient in ``x`` of :func:`poisson_exact`."""
    x = _as_space(domain, x)
    z = _as_space(domain, z)
    N = domain.N
    d = x - z
    r2 = np.einsum("...i,...i->...", d, d)
    if domain.kind == HALFSPACE:
        k = poisson_constant(N)
        e = np.zeros(N)
        e[-1] = 1.0
        return k * (e * (r2 ** (-N / 2.0))[..., None] - (N * x[..., -1] * r2 ** (-N / 2.0 - 1.0))[..., None] * d)
    w = 1.0 - np.einsum("...i,...i->...", x, x)
    a = 1.0 / sphere_area(N - 1)
    return a * (-2.0 * x * (r2 ** (-N / 2.0))[..., None] - (N * w * r2 ** (-N / 2.0 - 1.0))[..., None] * d)


def grad_bound_kernels(domain: Domain, x, y_or_z):
    """Majorants ``rho(y) N_{1,1}(x, y)`` and ``N_{1,1}(x, y)`` of the kernel gradients.

    When the second argument is a boundary point the first value is 0 and the
    second is the Poisson-gradient majorant ``N_{1,1}(x, z)``.
    """
    x = _as_space(domain, x)
    y = _as_space(domain, y_or_z)
    r = np.sqrt(_sqdist(x, y))
    ry = _rho(domain, y)
    nk = n_kernel_raw(1.0, 1.0, domain.N, r, _rho(domain, x), ry)
    nk = np.where(r > 0.0, nk, np.inf)
    g = ry * nk
    if np.ndim(g) == 0:
        return float(g), float(nk)
    return g, nk


# ---------------------------------------------------------------------------
# Hardy kernel-model surrogates
# ---------------------------------------------------------------------------


def hardy_green_model(h: HardyParams, domain: Domain, x, y):
    """``rho(x)^a rho(y)^a N_{alpha_H, 2}(x, y)``."""
    x = _as_space(domain, x)
    y = _as_space(domain, y)
    spec = KernelSpec(h.alpha_h, 2.0, 0.0, 2.0)
    return (_rho(domain, x) * _rho(domain, y)) ** h.a * n_kernel(spec, domain, x, y)


def hardy_poisson_model(h: HardyParams, domain: Domain, x, z):
    """``rho(x)^a N_{alpha_H, 2}(x, z)`` for a boundary point ``z``."""
    x = _as_space(domain, x)
    z = _as_space(domain, z)
    spec = KernelSpec(h.alpha_h, 2.0, 0.0, 2.0)
    return _rho(domain, x) ** h.a * n_kernel(spec, domain, x, z)
