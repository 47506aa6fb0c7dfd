"""Monotone Picard iteration and the invariant-set fixed point.

All solvers work on the axisymmetric collocation grid of
:mod:`potlab.axisym`: the measure must be radially symmetric about one
boundary point.  Functions are stored at cell midpoints and the integral
operators are the cached kernel matrices, so one iteration is one
matrix-vector product.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .axisym import AxisGrid, AxisGridSpec, kernel_matrices, kernel_name_n, nodal_boundary_potential
from .errors import DomainError, InvariantViolation
from .kernels import HardyParams, KernelSpec, hardy_exponents
from .model import BoundaryMeasure, Domain, Field
from .potentials import DEFAULT_QUAD, QuadratureConfig


@dataclass(frozen=True)
class SolveConfig:
    """Iteration parameters.

    ``q`` is the power of ``u`` (``q1`` in the gradient case) and ``q2`` the
    power of the gradient.  ``eps`` multiplies the boundary data.  ``tol`` is
    the nodewise relative change that stops the iteration and ``cap`` the
    factor over ``sup eps*P[sigma]`` at which an iterate counts as diverged.
    """

    q: float = 3.0
    q2: float = 0.0
    eps: float = 1.0
    grid: AxisGridSpec = AxisGridSpec()
    max_iter: int = 2000
    tol: float = 1e-4
    cap: float = 1e3
    threads: int = 1

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if self.eps < 0:
            raise DomainError("eps must be nonnegative")


@dataclass
class SolveResult:
    """Outcome of a solve.

    ``status`` is one of ``"converged"``, ``"diverged"``, ``"max-iter"`` or
    ``"not-applicable"`` (gradient case above its amplitude threshold).
    """

    status: str
    iterations: int
    u: Field
    residual: float
    c_low: float
    c_high: float
    history: list = field(default_factory=list)
    grad: Field | None = None
    extras: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def diverged(self):
        return self.status == "diverged"

    def to_dict(self):
        out = {
            "status": self.status,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "c_low": self.c_low,
            "c_high": self.c_high,
            "sup_u": float(np.max(self.u.values)) if self.u.values.size else 0.0,
            "history": [float(h) for h in self.history],
        }
        out.update({k: _jsonable(v) for k, v in self.extras.items()})
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(v):
    if isinstance(v, AxisGridSpec):
        return dict(vars(v))
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def grid_for(sigma: BoundaryMeasure, spec: AxisGridSpec):
    center = sigma.radial_center()
    if center is None:
        raise DomainError("solvers need a measure that is radially symmetric about one boundary point")
    return AxisGrid.build(sigma.domain, spec, center)


# ---------------------------------------------------------------------------
# generic monotone iteration
# ---------------------------------------------------------------------------


def monotone_iteration(W, forcing, q, weight=None, tol=1e-4, cap=1e3, max_iter=2000):
    """``u_0 = 0``, ``u_{n+1} = W (weight * u_n^q) + forcing``.

    Stops when ``max (u_{n+1} - u_n) / u_{n+1} <= tol`` over the nodes.
    Asserts ``u_{n+1} >= u_n`` at every node and every step.  Returns
    ``(u, status, iterations, history)``.
    """
    forcing = np.asarray(forcing, float)
    if np.any(forcing < 0) or np.any(W < 0):
        raise DomainError("monotone iteration needs nonnegative data and kernel")
    u = np.zeros_like(forcing)
    fmax = float(forcing.max()) if forcing.size else 0.0
    history = []
    if fmax == 0.0:
        return u, "converged", 1, [0.0]
    wt = 1.0 if weight is None else weight
    for n in range(1, max_iter + 1):
        new = W @ (wt * u ** q) + forcing
        if not np.all(new >= u):
            bad = int(np.sum(~(new >= u)))
            raise InvariantViolation(f"monotonicity failed at {bad} nodes in step {n}")
        top = float(new.max())
        history.append(top)
        if not math.isfinite(top) or top > cap * fmax:
            return new, "diverged", n, history
        # nodewise relative change: it bounds the sup-norm one and, for a
        # contracting step, the collocation residual of the returned iterate
        pos = new > 0
        change = float(np.max((new[pos] - u[pos]) / new[pos])) if np.any(pos) else 0.0
        u = new
        if change <= tol:
            return u, "converged", n, history
    return u, "max-iter", max_iter, history


def _ratios(u, p):
    pos = p > 0
    if not np.any(pos):
        return 0.0, 0.0
    r = u[pos] / p[pos]
    return float(r.min()), float(r.max())


def _collocation_residual(W, u, forcing, q, weight=None):
    wt = 1.0 if weight is None else weight
    den = np.maximum(u, forcing)
    num = np.abs(u - W @ (wt * u ** q) - forcing)
    ok = den > 0
    return float(np.max(num[ok] / den[ok])) if np.any(ok) else 0.0


# ---------------------------------------------------------------------------
# pure power
# ---------------------------------------------------------------------------


def picard_pure(sigma: BoundaryMeasure, cfg: SolveConfig = SolveConfig(), domain: Domain | None = None,
                quad: QuadratureConfig = DEFAULT_QUAD) -> SolveResult:
    """Minimal solution of ``u = G[u^q] + eps P[sigma]`` by monotone iteration.

    Examples
    --------
    >>> from potlab.model import Domain, BoundaryMeasure
    >>> r = picard_pure(BoundaryMeasure.zero(Domain.halfspace(3)))
    >>> r.converged, r.iterations
    (True, 1)
    """
    if domain is not None and domain != sigma.domain:
        raise DomainError("measure and domain disagree")
    if not sigma.is_positive:
        raise DomainError("picard_pure needs a positive measure")
    if sigma.is_zero:
        return _zero_result(sigma.domain, cfg)
    grid = grid_for(sigma, cfg.grid)
    W = kernel_matrices(grid, ("green",), quad, cfg.threads)["green"]
    p = nodal_boundary_potential(sigma, grid, "poisson", cfg=quad)
    f = cfg.eps * p
    u, status, n, hist = monotone_iteration(W, f, cfg.q, None, cfg.tol, cfg.cap, cfg.max_iter)
    lo, hi = _ratios(u, p)
    res = _collocation_residual(W, u, f, cfg.q)
    return SolveResult(status, n, grid.field(u, decay=grid.domain.N - 1), res, lo, hi, hist,
                       extras={"eps": cfg.eps, "q": cfg.q, "nodes": grid.size, "grid_spec": cfg.grid})


def _zero_result(domain, cfg):
    grid = AxisGrid.build(domain, cfg.grid)
    z = np.zeros(grid.size)
    return SolveResult("converged", 1, grid.field(z), 0.0, 0.0, 0.0, [0.0],
                       extras={"eps": cfg.eps, "q": cfg.q, "nodes": grid.size, "grid_spec": cfg.grid})


def residual(result: SolveResult, sigma: BoundaryMeasure, q: float, eps: float,
             quad: QuadratureConfig = DEFAULT_QUAD, grid_spec: AxisGridSpec | None = None) -> float:
    """Collocation residual ``sup |u - G[u^q] - eps P[sigma]| / max(u, eps P[sigma])`` at the nodes."""
    u = result.u.values.ravel()
    if sigma.is_zero and not np.any(u):
        return 0.0
    spec = grid_spec or result.extras.get("grid_spec")
    grid = AxisGrid.build(sigma.domain, spec, sigma.radial_center()) if spec else None
    if grid is None or grid.size != u.size:
        raise DomainError("pass the grid spec the solution was computed on")
    W = kernel_matrices(grid, ("green",), quad)["green"]
    p = nodal_boundary_potential(sigma, grid, "poisson", cfg=quad)
    return _collocation_residual(W, u, eps * p, q)


# ---------------------------------------------------------------------------
# kernel model
# ---------------------------------------------------------------------------


def picard_kernel_model(spec: KernelSpec, omega: BoundaryMeasure, cfg: SolveConfig = SolveConfig(),
                        quad: QuadratureConfig = DEFAULT_QUAD) -> SolveResult:
    """``V = N[V^q rho^alpha0] + eps N[omega]`` by monotone iteration (``q`` from ``spec``)."""
    if not omega.is_positive:
        raise DomainError("picard_kernel_model needs a positive measure")
    spec.check(omega.domain.N)
    if omega.is_zero:
        return _zero_result(omega.domain, cfg)
    grid = grid_for(omega, cfg.grid)
    W = kernel_matrices(grid, (kernel_name_n(spec.alpha, spec.beta),), quad, cfg.threads)
    W = W[kernel_name_n(spec.alpha, spec.beta)]
    p = nodal_boundary_potential(omega, grid, "n", spec=spec, cfg=quad)
    f = cfg.eps * p
    weight = grid.rho ** spec.alpha0
    v, status, n, hist = monotone_iteration(W, f, spec.q, weight, cfg.tol, cfg.cap, cfg.max_iter)
    lo, hi = _ratios(v, p)
    res = _collocation_residual(W, v, f, spec.q, weight)
    return SolveResult(status, n, grid.field(v, decay=spec.decay_exponent(grid.domain.N)), res, lo, hi, hist,
                       extras={"eps": cfg.eps, "q": spec.q, "alpha": spec.alpha, "beta": spec.beta,
                               "alpha0": spec.alpha0, "nodes": grid.size})


def pure_power_model(q: float) -> KernelSpec:
    """Kernel model of the pure power problem: ``alpha = beta = 2``, ``alpha0 = q + 1``."""
    return KernelSpec(2.0, 2.0, q + 1.0, q)


def hardy_model(kappa: float, q: float) -> KernelSpec:
    """Kernel model of the Hardy problem from :func:`hardy_exponents`."""
    ex = hardy_exponents(HardyParams(kappa), q)
    return KernelSpec(ex.alpha_h, 2.0, ex.alpha0_h, q)


# ---------------------------------------------------------------------------
# gradient case
# ---------------------------------------------------------------------------


def gradient_constants(sigma: BoundaryMeasure, grid: AxisGrid, quad: QuadratureConfig = DEFAULT_QUAD,
                       threads=1):
    """Discrete majorant constant ``C`` and the data needed by the invariant set.

    ``C`` bounds, entry by entry, ``W^G_ij / (rho_i rho_j M_ij)``,
    ``|W^grad_ij| / (rho_j M_ij)`` with ``M_ij = int_cell N_{1,1}(x_i, y) dy``,
    and at the nodes ``|P[sigma]| / (rho N_{1,1}[|sigma|])`` and
    ``|grad P[sigma]| / N_{1,1}[|sigma|]``.
    """
    n11 = kernel_name_n(1.0, 1.0)
    mats = kernel_matrices(grid, ("green", "green_s", "green_w", n11), quad, threads)
    M = mats[n11]
    rho = grid.rho
    with np.errstate(divide="ignore", invalid="ignore"):
        c_g = np.nanmax(np.where(M > 0, mats["green"] / (rho[:, None] * rho[None, :] * M), 0.0))
        gmag = np.hypot(mats["green_s"], mats["green_w"])
        c_d = np.nanmax(np.where(M > 0, gmag / (rho[None, :] * M), 0.0))
    tv = sigma.abs()
    phi1 = nodal_boundary_potential(tv, grid, "n", spec=KernelSpec(1.0, 1.0, 0.0, 2.0), cfg=quad)
    p_abs = nodal_boundary_potential(tv, grid, "poisson", cfg=quad)
    ps, pw = nodal_boundary_potential(sigma, grid, "poisson_grad", cfg=quad)
    c_p = float(np.max(p_abs / (rho * phi1)))
    c_dp = float(np.max(np.hypot(ps, pw) / phi1))
    p_signed = nodal_boundary_potential(sigma, grid, "poisson", cfg=quad)
    C = float(max(c_g, c_d, c_p, c_dp))
    return {"C": C, "C_parts": (float(c_g), float(c_d), c_p, c_dp), "M": M, "phi1": phi1,
            "P": p_signed, "Ps": ps, "Pw": pw, "mats": mats}


def gradient_threshold(C, q1, q2):
    """``(lambda, theta)`` with ``lambda = C Q/(Q-1)``, ``theta = (Q-1)^(Q-1)/(C Q)^Q``."""
    Q = q1 + q2
    return C * Q / (Q - 1.0), (Q - 1.0) ** (Q - 1.0) / (C * Q) ** Q


def fixedpoint_gradient(sigma: BoundaryMeasure, q1: float, q2: float, cfg: SolveConfig = SolveConfig(),
                        quad: QuadratureConfig = DEFAULT_QUAD) -> SolveResult:
    """Fixed point of ``u = G[|u|^q1 |grad u|^q2] + eps P[sigma]`` inside the invariant set ``E``.

    ``E = {|u| <= lam rho phi, |grad u| <= lam phi}`` with
    ``phi = N_{1,1}[|eps sigma|]``.  The amplitude must satisfy the threshold
    ``N_{1,1}[phi^Q rho^(q1+1)] <= theta phi`` at every node, which is
    ``eps <= eps_thr``; otherwise the result is ``"not-applicable"``.
    Membership in ``E`` is asserted for every iterate.
    """
    if q1 < 0 or q2 < 0 or not q1 + q2 > 1 or not q2 < 2:
        raise DomainError("need q1, q2 >= 0, q1 + q2 > 1 and q2 < 2")
    if sigma.is_zero:
        r = _zero_result(sigma.domain, cfg)
        r.grad = r.u
        return r
    grid = grid_for(sigma, cfg.grid)
    k = gradient_constants(sigma, grid, quad, cfg.threads)
    C = k["C"] * (1.0 + 1e-9)
    Q = q1 + q2
    lam, theta = gradient_threshold(C, q1, q2)
    rho, phi1, M = grid.rho, k["phi1"], k["M"]
    T1 = M @ (phi1 ** Q * rho ** (q1 + 1.0))
    eps_thr = float((theta / np.max(T1 / phi1)) ** (1.0 / (Q - 1.0)))
    extras = {"eps": cfg.eps, "q1": q1, "q2": q2, "C": C, "lambda": lam, "theta": theta,
              "eps_threshold": eps_thr, "nodes": grid.size}
    empty = grid.field(np.zeros(grid.size))
    if cfg.eps > eps_thr:
        return SolveResult("not-applicable", 0, empty, float("nan"), float("nan"), float("nan"), [],
                           grad=empty, extras=extras)
    eps = cfg.eps
    mats = k["mats"]
    WG, Ws, Ww = mats["green"], mats["green_s"], mats["green_w"]
    P, Ps, Pw = eps * k["P"], eps * k["Ps"], eps * k["Pw"]
    bound_u = lam * rho * eps * phi1
    bound_g = lam * eps * phi1
    slack = 1.0 + 1e-12
    u = np.zeros(grid.size)
    g = np.zeros(grid.size)
    hist = []
    status = "max-iter"
    n = 0
    for n in range(1, cfg.max_iter + 1):
        src = np.abs(u) ** q1 * g ** q2
        nu = WG @ src + P
        ng = np.hypot(Ws @ src + Ps, Ww @ src + Pw)
        if np.any(np.abs(nu) > slack * bound_u) or np.any(ng > slack * bound_g):
            raise InvariantViolation(f"iterate {n} left the invariant set (C under-measured)")
        top = float(np.max(np.abs(nu)))
        change = float(max(np.max(np.abs(nu - u)), 0.0))
        gchange = float(np.max(np.abs(ng - g)))
        hist.append(top)
        u, g = nu, ng
        if change <= cfg.tol * top and gchange <= cfg.tol * float(np.max(g)):
            status = "converged"
            break
    src = np.abs(u) ** q1 * g ** q2
    den = np.maximum(np.abs(u), np.abs(P))
    ok = den > 0
    res = float(np.max(np.abs(u - WG @ src - P)[ok] / den[ok])) if np.any(ok) else 0.0
    pabs = eps * nodal_boundary_potential(sigma.abs(), grid, "poisson", cfg=quad)
    lo, hi = _ratios(np.abs(u), pabs)
    extras["u_over_bound"] = float(np.max(np.abs(u) / (rho * eps * phi1)))
    extras["grad_over_bound"] = float(np.max(g / (eps * phi1)))
    return SolveResult(status, n, grid.field(u, decay=grid.domain.N - 1), res, lo, hi, hist,
                       grad=grid.field(g, decay=grid.domain.N), extras=extras)


# ---------------------------------------------------------------------------
# amplitude bisection
# ---------------------------------------------------------------------------


@dataclass
class AmplitudeSearch:
    """Largest converging amplitude found by bisection and the runs along the way."""

    eps_star: float
    eps_fail: float
    certified: SolveResult | None
    path: list

    def to_dict(self):
        return {"eps_star": self.eps_star, "eps_fail": self.eps_fail,
                "certified_eps": self.eps_star / 2.0,
                "path": [(e, s) for e, s in self.path]}


def bisect_amplitude(run, eps0=1.0, steps=12, eps_min=1e-12, eps_max=1e12):
    """Bisect (geometrically) on the amplitude between converging and failing runs.

    ``run(eps)`` returns a :class:`SolveResult`.  The certified run is the one
    at ``eps_star / 2``; if it fails to converge, convergence is not monotone
    in the amplitude and :class:`InvariantViolation` is raised.
    """
    path = []

    def ok(e):
        r = run(e)
        path.append((e, r.status))
        return r.converged

    lo, hi = 0.0, math.inf
    e = eps0
    while True:
        if ok(e):
            lo = e
            if e >= eps_max:
                break
            e *= 10.0
        else:
            hi = e
            if lo > 0 or e <= eps_min:
                break
            e /= 10.0
        if lo > 0 and hi < math.inf:
            break
    if lo > 0 and hi < math.inf:
        for _ in range(steps):
            mid = math.sqrt(lo * hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    # bisection keeps the path ordered; the run at eps_star / 2 is the independent check
    cert = run(lo / 2.0) if lo > 0 else None
    if cert is not None and not cert.converged:
        raise InvariantViolation(f"convergence is not monotone in the amplitude: eps {lo:g} converged, "
                                 f"eps {lo / 2.0:g} did not")
    return AmplitudeSearch(lo, hi, cert, path)
