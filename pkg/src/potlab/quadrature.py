"""Low-level quadrature rules.

Everything here is vectorized: rules are built for a whole batch of intervals
at once so that callers can evaluate kernels on arrays of shape
``(batch, nodes)`` without Python loops.

The workhorse is :func:`exp_graded`, a composite Gauss rule in the variable
``v`` with ``x = e + delta * (exp(v) - 1)``, which resolves integrable point
singularities sitting at (or just outside) an interval endpoint.
"""

from functools import lru_cache
import math

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(n):
    """Gauss-Legendre nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def sphere_area(m):
    """Surface measure of the unit sphere S^m in R^(m+1)."""
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)


def ball_volume(d):
    """Lebesgue measure of the unit ball in R^d."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def gauss_interval(a, b, n):
    """Plain Gauss rule on a batch of intervals.

    Parameters
    ----------
    a, b : array_like
        Interval endpoints, broadcast together to shape ``S``.
    n : int
        Points per interval.

    Returns
    -------
    nodes, weights : ndarray of shape ``S + (n,)``
    """
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)[..., None]
    mid = 0.5 * (b + a)[..., None]
    return mid + half * x, half * w


def composite_gauss(breaks, n):
    """Composite Gauss rule on consecutive sub-intervals of ``breaks`` (last axis)."""
    breaks = np.asarray(breaks, float)
    nodes, weights = gauss_interval(breaks[..., :-1], breaks[..., 1:], n)
    shape = breaks.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _graded_piece(e, other, c, panels, order, floor, width=0.0, step=None):
    # Grade from endpoint ``e`` toward ``other``; singularity at ``c`` lies
    # on the far side of ``e`` (or on ``e`` itself).
    length = np.abs(other - e)
    sign = np.where(other >= e, 1.0, -1.0)
    delta = np.maximum(np.maximum(np.abs(e - c), width), floor * np.maximum(length, 1e-300))
    vmax = np.log1p(length / delta)
    if step is not None and vmax.size:
        # enough panels that none spans more than ``step`` in log scale
        panels = max(panels, int(math.ceil(float(vmax.max()) / step)))
    vb = vmax[..., None] * np.linspace(0.0, 1.0, panels + 1)
    v, wv = composite_gauss(vb, order)
    ev = np.exp(v)
    x = e[..., None] + sign[..., None] * delta[..., None] * np.expm1(v)
    w = delta[..., None] * ev * wv
    return x, w


def exp_graded(a, b, c, panels=3, order=6, floor=1e-10, width=0.0, step=None):
    """Composite Gauss rule on [a, b] graded toward the point ``c``.

    When ``c`` lies strictly inside the interval it is split there and both
    halves are graded toward ``c``; otherwise the interval is halved and both
    halves are graded toward the side closest to ``c``.  The grading scale is
    the distance from ``c`` to the nearest endpoint, floored at
    ``floor * length`` so a singular point exactly on an endpoint is handled.
    A positive ``width`` also bounds the scale from below, for peaks of known
    width (e.g. a kernel smoothed at distance ``width`` from the line).
    With ``step`` the panel count grows so that no panel spans more than
    ``step`` units of the logarithmic variable; the count is shared by the
    whole batch so the output shape stays rectangular.

    Returns nodes and weights of shape ``broadcast(a, b, c).shape + (K,)`` with
    ``K = 2 * panels * order``.
    """
    a, b, c, width = np.broadcast_arrays(*(np.asarray(v, float) for v in (a, b, c, width)))
    inside = (c > a) & (c < b)
    m = np.where(inside, c, 0.5 * (a + b))
    # left piece [a, m]
    cl = np.where(inside, m, c)
    left_from_a = cl <= a
    eL = np.where(left_from_a, a, m)
    oL = np.where(left_from_a, m, a)
    xl, wl = _graded_piece(eL, oL, cl, panels, order, floor, width, step)
    # right piece [m, b]
    cr = np.where(inside, m, c)
    right_from_b = cr >= b
    eR = np.where(right_from_b, b, m)
    oR = np.where(right_from_b, m, b)
    xr, wr = _graded_piece(eR, oR, cr, panels, order, floor, width, step)
    return np.concatenate([xl, xr], axis=-1), np.concatenate([wl, wr], axis=-1)


def endpoint_graded(a, b, panels=2, order=8, floor=1e-12, step=1.5):
    """Rule on [a, b] graded toward both endpoints (for sqrt-type end behavior)."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    m = 0.5 * (a + b)
    xl, wl = _graded_piece(a, m, a, panels, order, floor, 0.0, step)
    xr, wr = _graded_piece(b, m, b, panels, order, floor, 0.0, step)
    return np.concatenate([xl, xr], axis=-1), np.concatenate([wl, wr], axis=-1)


def polar_graded(c_scale, panels=3, order=6, upper=math.pi, step=None):
    """Rule for an angle in [0, upper] graded toward 0 with scale ``c_scale``."""
    c_scale = np.asarray(c_scale, float)
    return exp_graded(np.zeros_like(c_scale), np.full_like(c_scale, upper), -c_scale,
                      panels=panels, order=order, step=step)


def ring_weight(phi, d):
    """Angular measure factor of the ring integral over S^(d-1).

    For a function of the angle ``phi`` between a direction and a fixed axis,
    ``int_{S^(d-1)} f dtheta = int_0^pi f(phi) ring_weight(phi, d) dphi``.
    """
    if d == 2:
        return np.full_like(phi, 2.0)
    return sphere_area(d - 2) * np.sin(phi) ** (d - 2)


def householder_to(pole):
    """Orthogonal matrix mapping the last coordinate axis onto ``pole``."""
    pole = np.asarray(pole, float)
    pole = pole / np.linalg.norm(pole)
    n = pole.size
    e = np.zeros(n)
    e[-1] = 1.0
    v = e - pole
    nv = v @ v
    if nv < 1e-30:
        return np.eye(n)
    return np.eye(n) - 2.0 * np.outer(v, v) / nv


def sphere_rule(m, n_polar=16, n_azim=32, pole_scale=None, panels=4):
    """Direction rule on S^m (directions in R^(m+1)) with pole along the last axis.

    Parameters
    ----------
    m : int
        Sphere dimension, ``m >= 1``.
    n_polar : int
        Gauss order per polar panel.
    n_azim : int
        Number of equispaced points on the innermost circle.
    pole_scale : float, optional
        When given, the polar angle is graded toward the pole with this
        angular scale, resolving integrands concentrated near the pole.

    Returns
    -------
    dirs : ndarray (K, m+1)
    weights : ndarray (K,)
    """
    if m == 1:
        phi = 2.0 * math.pi * (np.arange(n_azim) + 0.5) / n_azim
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(n_azim, 2.0 * math.pi / n_azim)
    if pole_scale is None:
        psi, wpsi = composite_gauss(np.linspace(0.0, math.pi, panels + 1), n_polar)
    else:
        psi, wpsi = polar_graded(pole_scale, panels=panels, order=n_polar)
    wpsi = wpsi * np.sin(psi) ** (m - 1)
    sub, wsub = sphere_rule(m - 1, n_polar, n_azim, None, panels=max(2, panels // 2))
    sp = np.sin(psi)[:, None, None]
    dirs = np.concatenate(
        [sp * sub[None, :, :], np.broadcast_to(np.cos(psi)[:, None, None], (psi.size, sub.shape[0], 1))],
        axis=2,
    ).reshape(-1, m + 1)
    weights = (wpsi[:, None] * wsub[None, :]).ravel()
    return dirs, weights
