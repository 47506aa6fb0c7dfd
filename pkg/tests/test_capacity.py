import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import integrate

from potlab.capacity import (BoundarySet, CapacityConfig, CapacityEstimate, box_integral, capacity_ratios,
                             cell_matrix, measure_vs_capacity, riesz_capacity, riesz_capacity_dual,
                             riesz_capacity_primal, set_measure, weighted_capacity_dual)
from potlab.errors import DomainError, InvariantViolation
from potlab.kernels import KernelSpec
from potlab.model import Atom, BoundaryMeasure, Domain, UniformBallDensity

CFG = CapacityConfig(n_res=4)
UNIT = BoundarySet.ball((0.0, 0.0), 1.0)
GAMMA, S = 0.5, 4.0 / 3.0  # q = 4


@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(0.1, 2), st.floats(0.2, 0.9))
def test_box_integral_1d_matches_quad(x, lo, width, gamma):
    hi = lo + width
    # quad cannot see the |x - lo|^gamma piece of a probe just outside the interval
    assume(min(abs(x - lo), abs(x - hi)) > 1e-3)
    f = lambda y: abs(x - y) ** (gamma - 1) / (1 - gamma)
    pts = [x] if lo < x < hi else None
    ref, _ = integrate.quad(f, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-11, limit=200)
    got = box_integral([[x]], [[lo]], [[hi]], gamma)[0, 0]
    assert got == pytest.approx(ref, rel=1e-7, abs=1e-12)


@pytest.mark.parametrize("x", [(0.3, 0.2), (1.5, -0.4), (0.0, 0.0), (0.5, 0.5)])
def test_box_integral_2d_matches_polar_quadrature(x):
    # integrate |x - y|^(g - 2) in polar coordinates about x: each ray contributes R(theta)^g / g
    g = 0.7
    lo, hi = np.array([0.0, 0.0]), np.array([1.0, 0.5])
    x = np.array(x, float)
    corners = [np.array(c) for c in ((0, 0), (1, 0), (1, 0.5), (0, 0.5))]

    def reach(th):
        u = np.array([math.cos(th), math.sin(th)])
        ts = []
        for k in range(2):
            for b in (lo[k], hi[k]):
                if abs(u[k]) > 1e-15:
                    t = (b - x[k]) / u[k]
                    p = x + t * u
                    if t > 0 and np.all(p >= lo - 1e-12) and np.all(p <= hi + 1e-12):
                        ts.append(t)
        return max(ts) if ts else 0.0

    inside = np.all(x >= lo) and np.all(x <= hi)
    if inside:
        brk = sorted(math.atan2(*(c - x)[::-1]) % (2 * math.pi) for c in corners)
        ref, _ = integrate.quad(lambda th: reach(th) ** g / g, 0, 2 * math.pi, points=brk, limit=200,
                                epsrel=1e-10)
    else:
        ref = None
    got = box_integral([x], [lo], [hi], g)[0, 0] * (2 - g)
    if ref is not None:
        assert got == pytest.approx(ref, rel=1e-8)
    else:
        # outside the box the integrand is smooth: compare with tensor Gauss
        val, _ = integrate.dblquad(lambda b, a: math.hypot(a - x[0], b - x[1]) ** (g - 2), 0, 1, 0, 0.5,
                                   epsrel=1e-10)
        assert got == pytest.approx(val, rel=1e-8)


def test_box_integral_is_additive():
    x = np.array([[0.2, 0.1], [1.3, 0.7]])
    whole = box_integral(x, [[0.0, 0.0]], [[1.0, 1.0]], 0.8)[:, 0]
    halves = box_integral(x, [[0.0, 0.0], [0.5, 0.0]], [[0.5, 1.0], [1.0, 1.0]], 0.8).sum(axis=1)
    assert np.allclose(whole, halves, rtol=1e-12)


def test_cell_matrix_far_field_agrees_with_exact():
    lo = np.array([[0.0, 0.0], [3.0, 0.0]])
    hi = lo + 0.25
    x = np.array([[0.1, 0.1]])
    exact = box_integral(x, lo, hi, 0.5)
    assert np.allclose(cell_matrix(x, lo, hi, 0.5), exact, rtol=1e-6)


def test_weak_duality_and_gap():
    est = riesz_capacity(UNIT, GAMMA, S, CFG)
    assert 0 < est.dual <= est.primal
    assert est.relative_gap < 0.3


def test_capacity_scaling_law():
    r = 2.0
    big = BoundarySet.ball((0.0, 0.0), r)
    expo = 2 - GAMMA * S
    assert riesz_capacity_primal(big, GAMMA, S, CFG) == pytest.approx(
        r ** expo * riesz_capacity_primal(UNIT, GAMMA, S, CFG), rel=1e-6)
    assert riesz_capacity_dual(big, GAMMA, S, CFG) == pytest.approx(
        r ** expo * riesz_capacity_dual(UNIT, GAMMA, S, CFG), rel=1e-6)


def test_capacity_is_translation_invariant():
    moved = BoundarySet.ball((3.0, -1.0), 1.0)
    assert riesz_capacity_dual(moved, GAMMA, S, CFG) == pytest.approx(riesz_capacity_dual(UNIT, GAMMA, S, CFG),
                                                                       rel=1e-8)


def test_capacity_monotone_on_a_common_frame():
    frame = ((0.0, 0.0), 1.0)
    small = BoundarySet.ball((0.0, 0.0), 0.5)
    assert riesz_capacity_primal(small, GAMMA, S, CFG, frame) <= riesz_capacity_primal(UNIT, GAMMA, S, CFG, frame)


def test_empty_set_and_points():
    assert riesz_capacity_primal(BoundarySet(), GAMMA, S, CFG) == 0.0
    assert riesz_capacity_dual(BoundarySet.point((0.0, 0.0)), GAMMA, S, CFG) == 0.0


def test_parameter_checks():
    with pytest.raises(DomainError):
        riesz_capacity_dual(UNIT, 2.5, S, CFG)
    with pytest.raises(DomainError):
        riesz_capacity_dual(UNIT, GAMMA, 1.0, CFG)
    with pytest.raises(DomainError):
        riesz_capacity_dual(UNIT, 1.5, 2.0, CFG)  # gamma s >= d


def test_estimate_rejects_duality_violation():
    with pytest.raises(InvariantViolation):
        CapacityEstimate(primal=1.0, dual=2.0)


def test_one_dimensional_sets():
    est = riesz_capacity(BoundarySet.ball((0.0,), 1.0), 0.5, 1.5, CFG)
    assert 0 < est.dual <= est.primal


def test_weighted_capacity_scaling():
    spec = KernelSpec(2.0, 2.0, 0.0, 2.0)
    a = weighted_capacity_dual(spec, 2.0, BoundarySet.ball((0.0, 0.0), 1.0), cfg=CFG)
    b = weighted_capacity_dual(spec, 2.0, BoundarySet.ball((0.0, 0.0), 2.0), cfg=CFG)
    # homogeneity: s ((N - beta + alpha) - (N + alpha0) / s') = 3
    assert b / a == pytest.approx(8.0, rel=1e-6)


def test_weighted_capacity_of_point_is_zero():
    spec = KernelSpec(2.0, 2.0, 0.0, 2.0)
    assert weighted_capacity_dual(spec, 2.0, BoundarySet.point((0.0, 0.0)), cfg=CFG) == 0.0


def test_set_measure():
    D = Domain.halfspace(3)
    sigma = BoundaryMeasure.from_components(D, [Atom((0.0, 0.0), 2.0), UniformBallDensity((5.0, 0.0), 1.0, 1.0)])
    assert set_measure(sigma, BoundarySet.point((0.0, 0.0))) == 2.0
    assert set_measure(sigma, BoundarySet.ball((5.0, 0.0), 2.0)) == pytest.approx(math.pi)
    with pytest.raises(DomainError):
        set_measure(sigma, BoundarySet(balls=(((0.0, 0.0), 1.0), ((1.0, 0.0), 1.0))))


def test_capacity_ratios_find_the_worst_set():
    D = Domain.halfspace(3)
    sigma = BoundaryMeasure.from_components(D, [UniformBallDensity((0.0, 0.0), 1.0, 1.0)])
    family = [BoundarySet.ball((0.0, 0.0), r) for r in (0.25, 0.5, 1.0)]
    ratios = capacity_ratios(sigma, 4.0, family, CFG)
    # sigma(B_r) / Cap(B_r) ~ r^2 / r^(4/3) grows with r inside the support
    assert ratios[0] < ratios[1] < ratios[2]
    best = measure_vs_capacity(sigma, 4.0, family, CFG)
    assert best.worst == family[2] and best.sup_ratio == pytest.approx(ratios[2])
    with pytest.raises(DomainError):
        capacity_ratios(sigma, 4.0, [], CFG)


def test_atom_has_infinite_ratio_on_points():
    D = Domain.halfspace(3)
    sigma = BoundaryMeasure.from_components(D, [Atom((0.0, 0.0), 1.0)])
    assert capacity_ratios(sigma, 4.0, [BoundarySet.point((0.0, 0.0))], CFG) == [math.inf]
