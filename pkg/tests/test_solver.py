import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab.axisym import AxisGridSpec
from potlab.errors import DomainError, InvariantViolation
from potlab.model import Atom, BoundaryMeasure, Domain, UniformBallDensity
from potlab.solver import (SolveConfig, SolveResult, bisect_amplitude, fixedpoint_gradient, hardy_model,
                           monotone_iteration, picard_kernel_model, picard_pure, pure_power_model, residual)

GRID = AxisGridSpec(L=4.0, h=1.0, levels=2)
D3 = Domain.halfspace(3)
DISC = BoundaryMeasure.from_components(D3, [UniformBallDensity((0.0, 0.0), 1.0, 1.0)])


@given(st.floats(0.05, 2.0), st.floats(0.01, 0.2))
def test_scalar_iteration_finds_the_minimal_root(a, f):
    # u = a u^2 + f has minimal root (1 - sqrt(1 - 4 a f)) / (2 a) when 4 a f < 1
    if 4 * a * f > 0.8:
        f = 0.2 / a
    u, status, n, hist = monotone_iteration(np.array([[a]]), np.array([f]), 2.0, tol=1e-12, max_iter=10_000)
    assert status == "converged"
    assert u[0] == pytest.approx((1 - math.sqrt(1 - 4 * a * f)) / (2 * a), rel=1e-9)
    assert hist == sorted(hist)


def test_scalar_iteration_diverges_past_the_fold():
    _, status, _, hist = monotone_iteration(np.array([[1.0]]), np.array([0.3]), 2.0)
    assert status == "diverged" and hist == sorted(hist)


def test_iteration_rejects_negative_data():
    with pytest.raises(DomainError):
        monotone_iteration(np.array([[1.0]]), np.array([-0.1]), 2.0)
    with pytest.raises(DomainError):
        monotone_iteration(np.array([[-1.0]]), np.array([0.1]), 2.0)


def test_zero_measure_is_solved_by_zero():
    r = picard_pure(BoundaryMeasure.zero(D3), SolveConfig(grid=GRID))
    assert r.converged and r.iterations == 1 and not np.any(r.u.values)


def test_small_amplitude_converges_with_small_residual():
    cfg = SolveConfig(q=3.0, eps=0.5, grid=GRID, tol=1e-6)
    r = picard_pure(DISC, cfg)
    assert r.converged
    assert r.residual <= 3 * cfg.tol
    assert residual(r, DISC, 3.0, 0.5) == pytest.approx(r.residual, rel=1e-9, abs=1e-15)
    # u >= eps P[sigma] at every node
    assert r.c_low >= 0.5 * (1 - 1e-12)
    assert 0.5 <= r.c_high < 100


def test_large_amplitude_diverges():
    assert picard_pure(DISC, SolveConfig(q=3.0, eps=50.0, grid=GRID)).diverged


def test_solutions_grow_with_the_amplitude():
    u1 = picard_pure(DISC, SolveConfig(q=3.0, eps=0.2, grid=GRID, tol=1e-8)).u.values
    u2 = picard_pure(DISC, SolveConfig(q=3.0, eps=0.4, grid=GRID, tol=1e-8)).u.values
    assert np.all(u2 >= u1)


def test_solver_needs_radial_positive_measures():
    off = BoundaryMeasure.from_components(D3, [Atom((0.0, 0.0), 1.0), Atom((1.0, 0.0), 1.0)])
    with pytest.raises(DomainError):
        picard_pure(off, SolveConfig(grid=GRID))
    neg = BoundaryMeasure.from_components(D3, [Atom((0.0, 0.0), -1.0)])
    with pytest.raises(DomainError):
        picard_pure(neg, SolveConfig(grid=GRID))


def test_kernel_model_converges_for_small_data():
    r = picard_kernel_model(pure_power_model(3.0), DISC, SolveConfig(eps=0.01, grid=GRID, tol=1e-8))
    assert r.converged and r.c_low >= 0.01 * (1 - 1e-12)


def test_hardy_model_at_kappa_zero_is_the_pure_model():
    for q in (1.5, 2.0, 3.0):
        assert hardy_model(0.0, q) == pure_power_model(q)


def test_gradient_solver_stays_in_the_invariant_set():
    r = fixedpoint_gradient(DISC, 1.0, 0.5, SolveConfig(eps=1e-3, grid=GRID, tol=1e-10))
    assert r.converged
    assert r.extras["u_over_bound"] <= r.extras["lambda"] * (1 + 1e-9)
    assert r.extras["grad_over_bound"] <= r.extras["lambda"] * (1 + 1e-9)
    big = fixedpoint_gradient(DISC, 1.0, 0.5, SolveConfig(eps=10 * r.extras["eps_threshold"], grid=GRID))
    assert big.status == "not-applicable"


def test_gradient_parameter_checks():
    with pytest.raises(DomainError):
        fixedpoint_gradient(DISC, 0.5, 0.4, SolveConfig(grid=GRID))
    with pytest.raises(DomainError):
        fixedpoint_gradient(DISC, 0.0, 2.0, SolveConfig(grid=GRID))


def _fake(threshold):
    def run(e):
        status = "converged" if e < threshold else "diverged"
        return SolveResult(status, 1, None, 0.0, 0.0, 0.0)
    return run


@pytest.mark.parametrize("threshold", [3.7, 0.02, 250.0])
def test_bisection_brackets_the_threshold(threshold):
    s = bisect_amplitude(_fake(threshold), steps=20)
    assert s.eps_star < threshold <= s.eps_fail
    assert s.eps_fail / s.eps_star < 1.001


def test_bisection_detects_non_monotone_convergence():
    def run(e):
        ok = 0.8 < e < 1.2
        return SolveResult("converged" if ok else "diverged", 1, None, 0.0, 0.0, 0.0)

    with pytest.raises(InvariantViolation):
        bisect_amplitude(run, eps0=1.0)


def test_config_validation():
    with pytest.raises(DomainError):
        SolveConfig(tol=0.0)
    with pytest.raises(DomainError):
        SolveConfig(eps=-1.0)


def test_result_json_is_plain():
    r = picard_pure(DISC, SolveConfig(q=3.0, eps=0.5, grid=GRID))
    data = json.loads(r.to_json())
    assert data["status"] == "converged"
    assert data["grid_spec"]["h"] == 1.0
