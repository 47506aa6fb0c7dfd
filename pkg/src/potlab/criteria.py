"""Solvability criteria and structural checks.

Every test returns a :class:`CriterionReport`.  Conditions that are
asymptotic (toward the boundary, toward atoms, toward small balls) are
decided operationally:

* a measured constant is *stable* when it changes by less than 10% between
  the last two refinements;
* a quantity is *divergent* when three successive refinements each grow it
  by more than 10% without the increments shrinking.

Grid-based ratios are evaluated at the nodes of the axisymmetric grid at
grading levels ``m, ..., m + 3``; each extra level adds one cell toward the
boundary and toward the symmetry axis, i.e. toward the atoms and the
singular center of radial densities.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize

from .axisym import AxisGrid, AxisGridSpec, kernel_matrices, kernel_name_n, nodal_boundary_potential
from .capacity import BoundarySet, CapacityConfig, capacity_ratios
from .errors import DivergenceError, DomainError, ToleranceFailure
from .kernels import (HardyParams, KernelSpec, green_exact, hardy_exponents, n_kernel, poisson_exact,
                      quasi_distance)
from .model import HALFSPACE, Atom, BoundaryMeasure, Domain, RadialPowerDensity, TabulatedDensity, \
    UniformBallDensity, measure_ball
from .potentials import DEFAULT_QUAD, GROWTH, QuadratureConfig, doubling_integrals, green_potential, \
    n_potential, nu_ball
from .solver import SolveConfig, bisect_amplitude, picard_pure, picard_kernel_model, pure_power_model, \
    hardy_model

STABLE = 0.10
VERDICTS = ("pass", "fail", "divergent", "inconclusive")
CRITERIA = ("ball-growth", "fefferman-phong", "pointwise", "pointwise-hardy", "capacity-compare",
            "quasi-metric", "doubling")


@dataclass
class CriterionReport:
    """Verdict of one criterion with the measured constant and where it is attained.

    ``levels`` holds the constant at each refinement; ``verdict`` is
    ``"pass"`` exactly when the constant is finite and every probe value
    was finite.
    """

    criterion: str
    verdict: str
    constant: float
    witness: object = None
    params: dict = field(default_factory=dict)
    levels: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "pass" and not math.isfinite(self.constant):
            raise ValueError("a passing report needs a finite constant")

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return {"criterion": self.criterion, "verdict": self.verdict, "constant": _num(self.constant),
                "witness": _plain(self.witness), "params": _plain(self.params),
                "levels": [_num(v) for v in self.levels], "details": _plain(self.details)}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def csv_rows(self):
        """``(criterion, level, constant, verdict)`` rows."""
        rows = [(self.criterion, k, _num(v), "") for k, v in enumerate(self.levels)]
        rows.append((self.criterion, "final", _num(self.constant), self.verdict))
        return rows

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["criterion", "level", "constant", "verdict"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "nan")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, BoundarySet):
        return obj.to_dict()
    return obj


# ---------------------------------------------------------------------------
# operational rules
# ---------------------------------------------------------------------------


def is_stable(values, tol=STABLE):
    """Last two values finite and within ``tol`` (relative) of each other."""
    if len(values) < 2:
        return False
    a, b = float(values[-2]), float(values[-1])
    if not (math.isfinite(a) and math.isfinite(b)):
        return False
    if a == b:
        return True
    return abs(b - a) <= tol * max(abs(a), abs(b))


def is_divergent(values, steps=3):
    """Last ``steps`` increments each exceed 10% of the running value and do not shrink."""
    v = [float(x) for x in values]
    if any(not math.isfinite(x) for x in v):
        return True
    if len(v) < steps + 1:
        return False
    v = v[-(steps + 1):]
    inc = np.diff(v)
    grow = all(inc[k] > GROWTH * v[k] and v[k] > 0 for k in range(steps))
    keep = all(inc[k + 1] >= 0.95 * inc[k] for k in range(steps - 1))
    return grow and keep


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------


def critical_exponent_pure(N: int) -> float:
    """``(N + 1) / (N - 1)``: below or at it only the zero measure is admissible.

    >>> critical_exponent_pure(3)
    2.0
    """
    if N < 3:
        raise DomainError("need N >= 3")
    return (N + 1) / (N - 1)


def subcritical_mixed(N: int, q1: float, q2: float) -> bool:
    """``(N - 1) q1 + N q2 < N + 1``, computed in exact rational arithmetic.

    The equivalent form ``(N - 1)(q1 + q2 - 1) < 2 - q2`` is evaluated too and
    asserted to agree.
    """
    if N < 2 or q1 < 0 or q2 < 0 or not q1 + q2 > 1 or not q2 < 2:
        raise DomainError("need q1, q2 >= 0, q1 + q2 > 1 and q2 < 2")
    a, b, n = Fraction(q1), Fraction(q2), Fraction(N)
    first = (n - 1) * a + n * b < n + 1
    second = (n - 1) * (a + b - 1) < 2 - b
    assert first == second
    return bool(first)


def growth_exponent(N, q):
    """Exponent ``N - (q + 1)/(q - 1)`` of the ball-growth condition."""
    return N - (q + 1.0) / (q - 1.0)


def _require_supercritical(N, q):
    if not q > critical_exponent_pure(N):
        raise DomainError(f"q must exceed (N+1)/(N-1) = {critical_exponent_pure(N)}; "
                          "otherwise only sigma = 0 admits a solution")


# ---------------------------------------------------------------------------
# ball families
# ---------------------------------------------------------------------------


def _measure_centers(sigma: BoundaryMeasure):
    cs = []
    for comp in sigma.positive:
        if isinstance(comp, Atom):
            cs.append(tuple(comp.location))
        elif isinstance(comp, TabulatedDensity):
            lo, _ = comp.cells()
            cs.append(tuple(lo.mean(axis=0) + 0.5 * comp.spacing))
        else:
            cs.append(tuple(comp.center))
    return list(dict.fromkeys(cs)) or [tuple([0.0] * sigma.domain.boundary_dim)]


def dyadic_family(centers, r_max=1.0, levels=4, first=3):
    """Balls about each center with radii ``r_max 2^-k``, ``k = 0 .. first + levels - 1``."""
    radii = [r_max * 2.0 ** -k for k in range(first + levels)]
    return [(tuple(c), r) for c in centers for r in radii]


def _as_balls(family):
    out = []
    for b in family:
        if isinstance(b, BoundarySet):
            if len(b.balls) != 1 or b.points:
                raise DomainError("ball families need single-ball sets")
            out.append(b.balls[0])
        else:
            c, r = b
            out.append((tuple(float(v) for v in c), float(r)))
    return out


def _refinement_levels(radii, levels=4):
    """Thresholds ``r_min 2^j``, ``j = levels-1 .. 0``: the family refined toward small balls."""
    rmin = min(radii)
    return [rmin * 2.0 ** j for j in range(levels - 1, -1, -1)]


def _sup_by_level(balls, values, levels=4):
    radii = [r for _, r in balls]
    out, wit = [], []
    for thr in _refinement_levels(radii, levels):
        sel = [k for k, r in enumerate(radii) if r >= thr * (1 - 1e-12)]
        k = max(sel, key=lambda i: values[i])
        out.append(values[k])
        wit.append(balls[k])
    return out, wit


# ---------------------------------------------------------------------------
# ball growth and Fefferman-Phong
# ---------------------------------------------------------------------------


def ball_growth_test(sigma: BoundaryMeasure, q: float, N: int | None = None, family=None) -> CriterionReport:
    """``sup sigma(B'_r) / r^(N - (q+1)/(q-1))`` over a family of boundary balls.

    Pass when the supremum is finite and stable as the family is refined
    toward small radii (four dyadic refinements by default).
    """
    N = N or sigma.domain.N
    if N != sigma.domain.N:
        raise DomainError("N does not match the measure's domain")
    _require_supercritical(N, q)
    if not sigma.is_positive:
        raise DomainError("ball_growth_test needs a positive measure")
    e = growth_exponent(N, q)
    params = {"q": q, "N": N, "exponent": e}
    if sigma.is_zero:
        return CriterionReport("ball-growth", "pass", 0.0, None, params, [0.0])
    if family is None:
        r_max = max(1.0, sigma.support_radius(_measure_centers(sigma)[0]))
        family = dyadic_family(_measure_centers(sigma), r_max)
    balls = _as_balls(family)
    vals = [measure_ball(sigma, c, r) / r ** e for c, r in balls]
    levels, wit = _sup_by_level(balls, vals)
    verdict = "pass" if is_stable(levels) else "fail"
    return CriterionReport("ball-growth", verdict, levels[-1] if verdict == "pass" else math.inf,
                           {"center": wit[-1][0], "radius": wit[-1][1]}, params, levels)


def _power_component(f, power):
    """The component ``f^power`` (radial power, uniform or tabulated)."""
    if isinstance(f, RadialPowerDensity):
        return RadialPowerDensity(f.center, f.exponent * power, f.radius, f.coefficient ** power)
    if isinstance(f, UniformBallDensity):
        return UniformBallDensity(f.center, f.radius, f.coefficient ** power)
    if isinstance(f, TabulatedDensity):
        return TabulatedDensity(f.origin, f.spacing, np.abs(f.values) ** power)
    raise DomainError("fefferman_phong_test needs a density component")


def fefferman_phong_test(f, eps: float, q: float, N: int, family=None) -> CriterionReport:
    """``sup (int_{B'_r} f^(1+eps)) / r^(N - 1 - 2(1+eps)/(q-1))`` over boundary balls.

    ``f`` is a single density component on ``R^(N-1)`` (it need not have
    finite mass).  A radial power whose ``(1+eps)``-th power is not locally
    integrable gives the verdict ``"divergent"``.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    _require_supercritical(N, q)
    if isinstance(f, Atom) or not isinstance(f, (RadialPowerDensity, UniformBallDensity, TabulatedDensity)):
        raise DomainError("fefferman_phong_test needs a density component")
    if np.any(np.asarray(getattr(f, "values", getattr(f, "coefficient", 0.0))) < 0):
        raise DomainError("the density must be nonnegative")
    d = N - 1
    e = N - 1 - 2.0 * (1.0 + eps) / (q - 1.0)
    params = {"eps": eps, "q": q, "N": N, "exponent": e}
    g = _power_component(f, 1.0 + eps)
    if isinstance(g, RadialPowerDensity) and g.exponent <= -d:
        return CriterionReport("fefferman-phong", "divergent", math.inf, {"center": f.center}, params,
                               details={"reason": "f^(1+eps) is not locally integrable at the center"})
    mu = BoundaryMeasure(Domain.halfspace(N), (g,), ())
    if family is None:
        c = _measure_centers(mu)[0]
        family = dyadic_family([c], max(1.0, mu.support_radius(c)))
    balls = _as_balls(family)
    vals = [measure_ball(mu, c, r) / r ** e for c, r in balls]
    levels, wit = _sup_by_level(balls, vals)
    verdict = "pass" if is_stable(levels) else "fail"
    return CriterionReport("fefferman-phong", verdict, levels[-1] if verdict == "pass" else math.inf,
                           {"center": wit[-1][0], "radius": wit[-1][1]}, params, levels)


# ---------------------------------------------------------------------------
# pointwise supersolution tests
# ---------------------------------------------------------------------------


def level_specs(base: AxisGridSpec = AxisGridSpec(L=4.0, h=0.5, levels=6), count=4):
    """Grid specs at grading levels ``m .. m + count - 1``."""
    return [replace(base, levels=base.levels + j) for j in range(count)]


def _inner_point(domain, z, t):
    z = domain.embed_boundary(np.asarray(z, float))
    if domain.kind == HALFSPACE:
        return z + t * np.eye(domain.N)[-1]
    return (1.0 - t) * z


def _atom_divergence(sigma, q, model: KernelSpec | None, quad, t0=0.5):
    """Probe ``G[(P[atoms])^q]`` (or its kernel-model analogue) next to every atom.

    Only the atomic part of ``sigma`` is used: it bounds the full integral
    from below, so a divergence found here is a divergence of the test.
    """
    domain = sigma.domain
    atoms = sigma.atoms()
    out = []
    for a in atoms:
        z = domain.embed_boundary(np.asarray(a.location, float))
        x = _inner_point(domain, a.location, t0)
        locs = [domain.embed_boundary(np.asarray(b.location, float)) for b in atoms]
        masses = [b.mass for b in atoms]
        if model is None:
            def src(y):
                return sum(m * poisson_exact(domain, y, zz) for m, zz in zip(masses, locs)) ** q
            run = lambda: green_potential(src, x, domain, quad, atoms=[a.location])  # noqa: E731
        else:
            def src(y):
                return sum(m * n_kernel(model, domain, y, zz) for m, zz in zip(masses, locs)) ** q
            run = lambda: n_potential(model, src, x, domain, quad, atoms=[a.location])  # noqa: E731
        try:
            out.append(("finite", float(run()), tuple(z)))
        except DivergenceError as exc:
            out.append(("divergent", list(exc.history), tuple(z)))
        except ToleranceFailure as exc:
            out.append(("unsettled", exc.value, tuple(z)))
    return out


def _common_index(grid: AxisGrid, j, base=(1, 1)):
    iu, iv = base[0] + j, base[1] + j
    return iu * grid.shape[1] + iv


def ratio_levels(sigma: BoundaryMeasure, q: float, model: KernelSpec | None = None,
                 specs: Sequence[AxisGridSpec] | None = None, quad: QuadratureConfig = DEFAULT_QUAD,
                 threads=1):
    """Sup of the supersolution ratio at the nodes of each grid level.

    With ``model=None`` the ratio is ``G[P[sigma]^q] / P[sigma]``; with a
    kernel model it is ``N[rho^alpha0 N[sigma]^q] / N[sigma]``.  Returns the
    per-level sups, their witnesses ``(s, w)``, and the numerator at one
    fixed physical node common to all levels.
    """
    specs = list(specs or level_specs())
    sups, wits, common = [], [], []
    for j, spec in enumerate(specs):
        grid = AxisGrid.build(sigma.domain, spec, sigma.radial_center())
        if model is None:
            W = kernel_matrices(grid, ("green",), quad, threads)["green"]
            p = nodal_boundary_potential(sigma, grid, "poisson", cfg=quad)
            num = W @ p ** q
        else:
            name = kernel_name_n(model.alpha, model.beta)
            W = kernel_matrices(grid, (name,), quad, threads)[name]
            p = nodal_boundary_potential(sigma, grid, "n", spec=model, cfg=quad)
            num = W @ (grid.rho ** model.alpha0 * p ** q)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(p > 0, num / p, 0.0)
        k = int(np.argmax(r))
        s, w = grid.nodes_sw
        sups.append(float(r[k]))
        wits.append((float(s[k]), float(w[k])))
        common.append(float(num[_common_index(grid, j)]))
    return sups, wits, common


def _pointwise(criterion, sigma, q, model, specs, quad, probes, params, threads):
    if not sigma.is_positive:
        raise DomainError("the pointwise test needs a positive measure")
    if sigma.is_zero:
        return CriterionReport(criterion, "pass", 0.0, None, params, [0.0])
    if probes is not None:
        return _pointwise_probes(criterion, sigma, q, model, probes, quad, params)
    atom_checks = _atom_divergence(sigma, q, model, quad)
    for (status, info, z), a in zip(atom_checks, sigma.atoms()):
        if status == "divergent":
            # the ratio is infinite next to the atom; report how fast it blows up with excision
            slope, ts, ratios = atom_slope(sigma, a.location, q, model, quad=quad)
            return CriterionReport(criterion, "fail", math.inf, {"atom": z}, params, ratios,
                                   details={"divergent_integral": True, "excision_history": info,
                                            "slope": slope, "ts": ts})
    sups, wits, common = ratio_levels(sigma, q, model, specs, quad, threads)
    details = {"common_node_numerator": common}
    if is_divergent(common):
        return CriterionReport(criterion, "divergent", math.inf, {"node_sw": wits[-1]}, params, sups, details)
    if any(st == "unsettled" for st, _, _ in atom_checks):
        verdict = "inconclusive"
    else:
        verdict = "pass" if is_stable(sups) else "fail"
    return CriterionReport(criterion, verdict, sups[-1] if verdict == "pass" else math.inf,
                           {"node_sw": wits[-1]}, params, sups, details)


def _pointwise_probes(criterion, sigma, q, model, probes, quad, params):
    """Ratios at explicit probes, refined three times toward the boundary (``rho`` halved)."""
    from .potentials import n_measure_potential, poisson_potential

    domain = sigma.domain
    probes = np.atleast_2d(np.asarray(probes, float))
    atoms = [a.location for a in sigma.atoms()]
    levels, wit = [], None
    for k in range(4):
        pts = []
        for x in probes:
            r = float(domain.rho(x))
            if domain.kind == HALFSPACE:
                y = x.copy()
                y[-1] = r * 2.0 ** -k
            else:
                y = x / np.linalg.norm(x) * (1.0 - r * 2.0 ** -k)
            pts.append(y)
        vals = []
        for y in pts:
            try:
                if model is None:
                    def src(yy):
                        return np.asarray(poisson_potential(sigma, yy, quad)) ** q
                    num = green_potential(src, y, domain, quad, atoms=atoms)
                    den = float(poisson_potential(sigma, y, quad))
                else:
                    def src(yy):
                        return np.asarray(n_measure_potential(model, sigma, yy, quad)) ** q
                    num = n_potential(model, src, y, domain, quad, atoms=atoms)
                    den = float(n_measure_potential(model, sigma, y, quad))
            except DivergenceError:
                return CriterionReport(criterion, "divergent", math.inf, {"probe": y.tolist()}, params, levels)
            vals.append(num / den)
        i = int(np.argmax(vals))
        levels.append(float(vals[i]))
        wit = pts[i].tolist()
    verdict = "pass" if is_stable(levels) else "fail"
    return CriterionReport(criterion, verdict, levels[-1] if verdict == "pass" else math.inf,
                           {"probe": wit}, params, levels)


def pointwise_test(sigma: BoundaryMeasure, q: float, probes=None, domain: Domain | None = None,
                   specs: Sequence[AxisGridSpec] | None = None, quad: QuadratureConfig = DEFAULT_QUAD,
                   threads=1, model: KernelSpec | None = None) -> CriterionReport:
    """``sup G[P[sigma]^q] / P[sigma]`` with refinement toward the boundary and the atoms.

    Without ``probes`` the ratio is taken at the nodes of the axisymmetric
    grid over four grading levels (``sigma`` must be radially symmetric);
    explicit ``probes`` are evaluated by adaptive quadrature and pushed toward
    the boundary three times.  Atoms are probed for divergence of the
    Green integral first.  With a kernel ``model`` (for instance
    :func:`~potlab.solver.pure_power_model`) the ratio is taken in that model.
    """
    if domain is not None and domain != sigma.domain:
        raise DomainError("measure and domain disagree")
    params = {"q": q} if model is None else {"q": q, "alpha": model.alpha, "beta": model.beta,
                                              "alpha0": model.alpha0}
    return _pointwise("pointwise", sigma, q, model, specs, quad, probes, params, threads)


def hardy_pointwise_model(kappa: float, q: float) -> KernelSpec:
    """Kernel model in which the Hardy supersolution test is evaluated."""
    return hardy_model(kappa, q)


def pointwise_test_hardy(sigma: BoundaryMeasure, q: float, kappa: float, probes=None,
                         specs: Sequence[AxisGridSpec] | None = None, quad: QuadratureConfig = DEFAULT_QUAD,
                         threads=1) -> CriterionReport:
    """Hardy supersolution test through its kernel model.

    With ``a = (1 + sqrt(1 - 4 kappa))/2`` the Green and Poisson kernels of
    the Hardy operator are comparable to ``(rho rho)^a N_{2a,2}`` and
    ``rho^a N_{2a,2}``; after dividing by ``rho^a`` the ratio becomes
    ``N_{2a,2}[rho^((q+1)a) N[sigma]^q] / N_{2a,2}[sigma]``.
    """
    if not 0.0 <= kappa <= 0.25:
        raise DomainError("kappa must lie in [0, 1/4]")
    model = hardy_model(kappa, q)
    params = {"q": q, "kappa": kappa, "alpha": model.alpha, "alpha0": model.alpha0,
              "cap_order": hardy_exponents(HardyParams(kappa), q).cap_order}
    return _pointwise("pointwise-hardy", sigma, q, model, specs, quad, probes, params, threads)


def atom_slope(sigma: BoundaryMeasure, location, q: float, model: KernelSpec | None = None,
               ts=(0.5, 0.25, 0.125, 0.0625), excise_ratio=0.125, quad: QuadratureConfig = DEFAULT_QUAD):
    """Log-log slope of the excised supersolution ratio along the normal ray at an atom.

    Only the atoms of ``sigma`` enter.  The Green integral (or its kernel
    model analogue) excises the ball of radius ``excise_ratio * t`` about
    the atom, which keeps it finite for every ``q`` and, for a lone atom,
    homogeneous in ``t``.  Returns ``(slope, ts, ratios)``.
    """
    domain = sigma.domain
    atoms = sigma.atoms()
    locs = [domain.embed_boundary(np.asarray(b.location, float)) for b in atoms]
    masses = [b.mass for b in atoms]

    def boundary(y, zz):
        return poisson_exact(domain, y, zz) if model is None else n_kernel(model, domain, y, zz)

    def src(y):
        return sum(m * boundary(y, zz) for m, zz in zip(masses, locs)) ** q

    ratios = []
    for t in ts:
        x = _inner_point(domain, location, t)
        try:
            if model is None:
                num = green_potential(src, x, domain, quad, atoms=[location], excise=excise_ratio * t)
            else:
                num = n_potential(model, src, x, domain, quad, atoms=[location], excise=excise_ratio * t)
        except ToleranceFailure as exc:
            # a slope needs far less than the engine's default accuracy
            if not exc.achieved < 0.05:
                raise
            num = float(exc.value)
        ratios.append(float(num / sum(m * boundary(x, zz) for m, zz in zip(masses, locs))))
    slope = float(np.polyfit(np.log(ts), np.log(ratios), 1)[0])
    return slope, list(ts), ratios


def criticality_slope(q: float, N: int = 3, ts=(0.5, 0.25, 0.125, 0.0625), excise_ratio=0.125,
                      quad: QuadratureConfig = DEFAULT_QUAD):
    """:func:`atom_slope` for ``delta_0`` on the half-space; the slope is ``1 + N - q(N - 1)``."""
    o = tuple([0.0] * (N - 1))
    sigma = BoundaryMeasure.from_components(Domain.halfspace(N), [Atom(o, 1.0)])
    return atom_slope(sigma, o, q, None, ts, excise_ratio, quad)


# ---------------------------------------------------------------------------
# capacity comparison
# ---------------------------------------------------------------------------


def capacity_compare_test(sigma: BoundaryMeasure, q: float, family=None,
                          cfg: CapacityConfig = CapacityConfig()) -> CriterionReport:
    """``sup sigma(K) / Cap_{I_{2/q}, q'}(K)`` over boundary balls, refined toward small balls.

    Denominators are dual (lower) capacity estimates.
    """
    if sigma.domain.kind != HALFSPACE:
        raise DomainError("Riesz capacities are defined on the half-space boundary")
    if not sigma.is_positive:
        raise DomainError("capacity comparison needs a positive measure")
    params = {"q": q, "gamma": 2.0 / q, "s": q / (q - 1.0)}
    if sigma.is_zero:
        return CriterionReport("capacity-compare", "pass", 0.0, None, params, [0.0])
    if family is None:
        family = dyadic_family(_measure_centers(sigma), 1.0)
    balls = _as_balls(family)
    sets = [BoundarySet.ball(c, r) for c, r in balls]
    vals = capacity_ratios(sigma, q, sets, cfg)
    levels, wit = _sup_by_level(balls, vals)
    verdict = "pass" if is_stable(levels) else "fail"
    return CriterionReport("capacity-compare", verdict, levels[-1] if verdict == "pass" else math.inf,
                           {"center": wit[-1][0], "radius": wit[-1][1]}, params, levels)


# ---------------------------------------------------------------------------
# solvability by amplitude bisection
# ---------------------------------------------------------------------------


def solvability_test(sigma: BoundaryMeasure, q: float, specs: Sequence[AxisGridSpec] | None = None,
                     model: KernelSpec | None = None, quad: QuadratureConfig = DEFAULT_QUAD,
                     tol=1e-6, max_iter=4000, threads=1) -> CriterionReport:
    """Largest converging amplitude ``eps*`` per grid level.

    The problem ``u = G[u^q] + eps P[sigma]`` (or the kernel model) is
    solvable for some ``eps > 0`` when ``eps*`` stays put as the grid is
    refined toward the boundary and the atoms; a shrinking ``eps*`` means
    the discrete solutions exist only because the grid cannot see the
    obstruction.  ``details["certified"]`` holds the run at ``eps*/2`` on
    the finest level.
    """
    specs = list(specs or level_specs())
    params = {"q": q, "model": None if model is None else vars(model)}
    if sigma.is_zero:
        return CriterionReport("solvability", "pass", math.inf, None, params, [math.inf])
    eps_levels, cert = [], None
    for spec in specs:
        if model is None:
            def run(e, spec=spec):
                return picard_pure(sigma, SolveConfig(q=q, eps=e, grid=spec, tol=tol, max_iter=max_iter,
                                                      threads=threads), quad=quad)
        else:
            def run(e, spec=spec):
                return picard_kernel_model(model, sigma, SolveConfig(q=model.q, eps=e, grid=spec, tol=tol,
                                                                     max_iter=max_iter, threads=threads),
                                           quad=quad)
        search = bisect_amplitude(run, steps=10)
        eps_levels.append(search.eps_star)
        cert = search.certified
    verdict = "pass" if eps_levels[-1] > 0 and is_stable(eps_levels) else "fail"
    details = {"certified": cert}
    return CriterionReport("solvability", verdict, eps_levels[-1], None, params, eps_levels, details)


# ---------------------------------------------------------------------------
# kernel sandwich, quasi-metric and doubling
# ---------------------------------------------------------------------------


def _sample_points(domain: Domain, rng, n, log_lo=-3.0, log_hi=1.0):
    """Sample points whose ``rho`` covers every scale.

    On the half-space ``rho`` and the tangential offset are log-uniform.  On
    the ball half the points have ``rho`` log-uniform in ``[10^log_lo, 1]`` and
    half are uniform in volume, so the bulk is sampled as densely as the
    boundary layer.
    """
    N = domain.N
    if domain.kind == HALFSPACE:
        rho = 10.0 ** rng.uniform(log_lo, log_hi, n)
        dirs = rng.normal(size=(n, N - 1))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        off = 10.0 ** rng.uniform(log_lo, log_hi, n)[:, None] * dirs
        return np.concatenate([off, rho[:, None]], axis=1)
    rad = np.where(np.arange(n) % 2 == 0, 1.0 - 10.0 ** rng.uniform(log_lo, 0.0, n),
                   rng.uniform(0.0, 1.0, n) ** (1.0 / N))
    rad = np.clip(rad, 0.0, 1.0 - 10.0 ** (log_lo - 1))
    dirs = rng.normal(size=(n, N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return rad[:, None] * dirs


def _pairs(domain, rng, n):
    """Point pairs covering near (same scale) and far configurations."""
    x = _sample_points(domain, rng, n)
    if domain.kind == HALFSPACE:
        # relative offsets in units of rho(x), so every ratio rho/|x - y| is sampled
        rx = x[:, -1]
        dirs = rng.normal(size=x.shape)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        y = x + (10.0 ** rng.uniform(-3, 3, n) * rx)[:, None] * dirs
        y[:, -1] = np.abs(y[:, -1])
        y[:, -1] = np.where(y[:, -1] > 0, y[:, -1], rx)
    else:
        y = _sample_points(domain, rng, n, -3.0, 0.0)
    return x, y


def _sandwich_ratio(domain, x, y):
    g = green_exact(domain, x, y)
    nk = n_kernel(KernelSpec(2.0, 2.0, 0.0, 2.0), domain, x, y)
    return g / (domain.rho(x) * domain.rho(y) * nk)


def _inside(domain, p):
    if domain.kind == HALFSPACE:
        return p[-1] > 0
    return np.linalg.norm(p) < 1.0


def _polish(domain, x, y, sign, iters=300):
    """Local search (Nelder-Mead) from one sampled pair toward a more extreme ratio."""

    N = domain.N

    def f(v):
        a, b = v[:N], v[N:]
        if not (_inside(domain, a) and _inside(domain, b)) or np.allclose(a, b):
            return math.inf
        return sign * float(_sandwich_ratio(domain, a, b))

    res = optimize.minimize(f, np.concatenate([x, y]), method="Nelder-Mead",
                            options={"maxiter": iters, "xatol": 1e-10, "fatol": 1e-12})
    return sign * float(res.fun) if math.isfinite(res.fun) else None


def sandwich_constants(domain: Domain, n_pairs=10_000, seed=0, polish=5):
    """``min`` and ``max`` of ``G(x, y) / (rho(x) rho(y) N_{2,2}(x, y))`` over sampled pairs.

    The ``polish`` most extreme pairs at each end seed a short local search,
    so the constants do not depend on how densely the sample happens to hit
    the extremal configurations.  Returns ``(c1, c2, c1_half, c2_half)``,
    the last two computed from the first half of the sample alone.
    """
    rng = np.random.default_rng(seed)
    x, y = _pairs(domain, rng, n_pairs)
    keep = np.linalg.norm(x - y, axis=1) > 0
    x, y = x[keep], y[keep]
    r = _sandwich_ratio(domain, x, y)

    def extremes(m):
        lo, hi = float(r[:m].min()), float(r[:m].max())
        order = np.argsort(r[:m])
        for k in order[:polish]:
            v = _polish(domain, x[k], y[k], 1.0)
            lo = min(lo, v) if v is not None else lo
        for k in order[::-1][:polish]:
            v = _polish(domain, x[k], y[k], -1.0)
            hi = max(hi, v) if v is not None else hi
        return lo, hi

    c1, c2 = extremes(r.size)
    c1h, c2h = extremes(r.size // 2)
    return c1, c2, c1h, c2h


def sandwich_report(domain: Domain, n_pairs=10_000, seed=0, tol=0.05) -> CriterionReport:
    c1, c2, c1h, c2h = sandwich_constants(domain, n_pairs, seed)
    ok = 0 < c1 <= c2 < math.inf and is_stable([c1h, c1], tol) and is_stable([c2h, c2], tol)
    return CriterionReport("sandwich", "pass" if ok else "fail", c2 if ok else math.inf, None,
                           {"pairs": n_pairs, "seed": seed}, [c2h, c2], {"c1": c1, "c2": c2,
                                                                         "c1_half": c1h, "c2_half": c2h})


def _triples(domain, rng, n):
    x, y = _pairs(domain, rng, n)
    lam = rng.uniform(0.0, 1.0, n)[:, None]
    between = x + lam * (y - x)
    jitter = rng.normal(size=x.shape) * (10.0 ** rng.uniform(-3, 0, n) * np.linalg.norm(y - x, axis=1))[:, None]
    z = between + jitter
    if domain.kind == HALFSPACE:
        z[:, -1] = np.abs(z[:, -1])
    else:
        nz = np.linalg.norm(z, axis=1)
        z = np.where((nz < 1.0)[:, None], z, z / nz[:, None] * (2.0 - nz)[:, None])
    # a third of the triples use an independent z
    k = n // 3
    z[:k] = _sample_points(domain, rng, k, -3.0, 1.0 if domain.kind == HALFSPACE else 0.0)
    return x, y, z


def quasi_metric_verify(spec: KernelSpec, domain: Domain, sample_count=10000, seed=0) -> CriterionReport:
    """``max d(x, y) / (d(x, z) + d(z, y))`` over sampled triples, ``d = 1/N_{alpha,beta}``.

    Pass when the maximum is finite and changes by less than 10% when the
    sample doubles (the first half is compared with the whole).
    """
    if sample_count < 10000:
        raise DomainError("use at least 10^4 triples")
    spec.check(domain.N)
    rng = np.random.default_rng(seed)
    x, y, z = _triples(domain, rng, 2 * sample_count)
    dxy = quasi_distance(spec, domain, x, y)
    den = quasi_distance(spec, domain, x, z) + quasi_distance(spec, domain, z, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, dxy / den, np.where(dxy > 0, np.inf, 0.0))
    if not np.all(np.isfinite(r)):
        k = int(np.argmax(~np.isfinite(r)))
        return CriterionReport("quasi-metric", "fail", math.inf, {"x": x[k], "y": y[k], "z": z[k]},
                               {"samples": sample_count, "seed": seed}, details={"reason": "non-finite ratio"})
    half, full = float(r[:sample_count].max()), float(r.max())
    k = int(np.argmax(r))
    verdict = "pass" if is_stable([half, full]) else "fail"
    params = {"alpha": spec.alpha, "beta": spec.beta, "N": domain.N, "samples": sample_count, "seed": seed}
    return CriterionReport("quasi-metric", verdict, full if verdict == "pass" else math.inf,
                           {"x": x[k], "y": y[k], "z": z[k]}, params, [half, full])


def _stratified_log(rng, lo, hi, n):
    """One log-uniform draw in each of ``n`` equal strata of ``[10^lo, 10^hi]``."""
    edges = np.linspace(lo, hi, n + 1)
    return 10.0 ** rng.uniform(edges[:-1], edges[1:])


def _doubling_constants(alpha0, domain, spec, m, rng):
    """Constants from ``m`` stratified samples per free parameter, each extreme polished in ``log s``."""
    N = domain.N
    if domain.kind == HALFSPACE:
        # dilations and tangential translations leave every ratio unchanged: fix rho(x) = 1
        xs = [np.eye(N)[-1]]
        lo, hi = -3.0, 3.0
    else:
        rho = np.minimum(_stratified_log(rng, -3.0, 0.0, m), 1.0 - 1e-9)
        xs = [(1.0 - p) * np.eye(N)[-1] for p in rho]
        lo, hi = -3.0, 0.0
    rs = [_stratified_log(rng, lo, hi, m) for _ in xs]
    width = (hi - lo) / m

    def ratio(x, r):
        return nu_ball(domain, alpha0, x, r) / (max(float(domain.rho(x)), r) ** alpha0 * r ** N)

    def dbl(x, r):
        D = doubling_integrals(spec, domain, alpha0, x, np.concatenate([r, 2 * r]))
        return D[r.size:] / D[:r.size]

    table = []
    for x, r in zip(xs, rs):
        table += [(x, ri, ratio(x, ri), di) for ri, di in zip(r, dbl(x, r))]
    out, witness = {}, None
    for key, col, sign, fn in (("c_low", 2, 1.0, ratio), ("c_high", 2, -1.0, ratio),
                               ("doubling", 3, -1.0, lambda x, r: float(dbl(x, np.array([r]))[0]))):
        x, r = min(table, key=lambda row: sign * row[col])[:2]
        best = min(sign * row[col] for row in table)
        u = math.log10(r)
        if domain.kind == HALFSPACE:
            res = optimize.minimize_scalar(lambda u: sign * fn(x, 10.0 ** u), method="bounded",
                                           bounds=(max(lo, u - width), min(hi, u + width)),
                                           options={"xatol": 1e-3, "maxiter": 25})
            cand = (x, 10.0 ** float(res.x))
        else:
            # the ball has no dilation invariance, so polish jointly in log rho(x) and log s
            def at(z):
                p_, u_ = np.clip(z, [-3.0, lo], [0.0, hi])
                return (1.0 - min(10.0 ** p_, 1.0 - 1e-9)) * np.eye(N)[-1], 10.0 ** u_

            z0 = np.array([math.log10(float(domain.rho(x))), u])
            res = optimize.minimize(lambda z: sign * fn(*at(z)), z0, method="Nelder-Mead",
                                    options={"xatol": 1e-3, "fatol": 1e-6, "maxfev": 40,
                                             "initial_simplex": [z0, z0 + [width, 0], z0 + [0, width]]})
            cand = at(res.x)
        if res.fun < best:
            best, (x, r) = float(res.fun), cand
        out[key] = sign * best
        if key == "doubling":
            witness = (x, r)
    return out, witness


def doubling_verify(alpha0: float, domain: Domain, samples=16, spec: KernelSpec = KernelSpec(2.0, 2.0),
                    seed=0, growth=10) -> CriterionReport:
    """Two-sided constants of ``nu(B_s(x)) / (max(rho, s)^alpha0 s^N)`` and the doubling constant.

    ``nu = rho^alpha0 dx``.  The doubling constant is the largest ratio
    ``D(2r) / D(r)`` with ``D(r) = int_0^r nu(B_s(x)) s^-2 ds`` over balls of
    the quasi-metric of ``spec``.  Samples are stratified in ``log s`` (and
    in ``log rho(x)`` on the ball, where ``samples`` counts pairs and
    ``s <= 1``); each extreme is then polished by a bounded line search.  The
    constants from ``samples`` draws are compared with those from
    ``growth * samples`` draws; pass when each moves by less than 10%.
    """
    if alpha0 < 0:
        raise DomainError("alpha0 must be nonnegative")
    spec.check(domain.N)
    rng = np.random.default_rng(seed)

    def per_axis(n):
        return n if domain.kind == HALFSPACE else max(2, int(math.ceil(math.sqrt(n))))

    small, _ = _doubling_constants(alpha0, domain, spec, per_axis(samples), rng)
    big, (xw, rw) = _doubling_constants(alpha0, domain, spec, per_axis(growth * samples), rng)
    finite = all(math.isfinite(v) and v > 0 for v in big.values())
    stable = all(is_stable([small[k], big[k]]) for k in big)
    verdict = "pass" if finite and stable else "fail"
    params = {"alpha0": alpha0, "N": domain.N, "samples": samples, "growth": growth, "seed": seed,
              "alpha": spec.alpha, "beta": spec.beta}
    return CriterionReport("doubling", verdict, big["doubling"] if verdict == "pass" else math.inf,
                           {"x": xw, "r": rw}, params, [small["doubling"], big["doubling"]],
                           {"small": small, "large": big})


# ---------------------------------------------------------------------------
# the measure battery
# ---------------------------------------------------------------------------


def measure_battery(N: int = 3):
    """Named positive measures radially symmetric about the origin of ``R^(N-1)``.

    Atoms, uniform densities over an amplitude sweep, radial powers over an
    exponent sweep, and mixtures.
    """
    D = Domain.halfspace(N)
    o = tuple([0.0] * (N - 1))

    def bm(*comps):
        return BoundaryMeasure.from_components(D, comps)

    return [
        ("atom", bm(Atom(o, 1.0))),
        ("atom-small", bm(Atom(o, 0.01))),
        ("atom+uniform", bm(Atom(o, 0.1), UniformBallDensity(o, 1.0, 1.0))),
        ("uniform-0.1", bm(UniformBallDensity(o, 1.0, 0.1))),
        ("uniform-1", bm(UniformBallDensity(o, 1.0, 1.0))),
        ("uniform-10", bm(UniformBallDensity(o, 1.0, 10.0))),
        ("uniform-r0.5", bm(UniformBallDensity(o, 0.5, 1.0))),
        ("power-1.5", bm(RadialPowerDensity(o, -1.5, 1.0, 1.0))),
        ("power-1.3", bm(RadialPowerDensity(o, -1.3, 1.0, 1.0))),
        ("power-0.7", bm(RadialPowerDensity(o, -0.7, 1.0, 1.0))),
        ("power-0.5", bm(RadialPowerDensity(o, -0.5, 1.0, 1.0))),
        ("power+0.5", bm(RadialPowerDensity(o, 0.5, 1.0, 1.0))),
    ]


def run_criterion(criterion: str, sigma: BoundaryMeasure | None = None, **kw) -> CriterionReport:
    """Dispatch a criterion by its id (see :data:`CRITERIA`)."""
    if criterion == "ball-growth":
        return ball_growth_test(sigma, kw["q"], family=kw.get("family"))
    if criterion == "fefferman-phong":
        return fefferman_phong_test(kw["density"], kw["eps"], kw["q"], kw.get("N", 3), kw.get("family"))
    if criterion == "pointwise":
        return pointwise_test(sigma, kw["q"], kw.get("probes"), specs=kw.get("specs"),
                              quad=kw.get("quad", DEFAULT_QUAD), threads=kw.get("threads", 1))
    if criterion == "pointwise-hardy":
        return pointwise_test_hardy(sigma, kw["q"], kw.get("kappa", 0.0), kw.get("probes"), specs=kw.get("specs"),
                                    quad=kw.get("quad", DEFAULT_QUAD), threads=kw.get("threads", 1))
    if criterion == "capacity-compare":
        return capacity_compare_test(sigma, kw["q"], kw.get("family"), kw.get("capacity", CapacityConfig()))
    if criterion == "quasi-metric":
        return quasi_metric_verify(kw.get("spec", KernelSpec()), kw["domain"], kw.get("samples", 10000),
                                   kw.get("seed", 0))
    if criterion == "doubling":
        return doubling_verify(kw.get("alpha0", 0.0), kw["domain"], kw.get("samples", 16),
                               kw.get("spec", KernelSpec()), kw.get("seed", 0))
    raise KeyError(f"unknown criterion {criterion!r}; expected one of {', '.join(CRITERIA)}")
