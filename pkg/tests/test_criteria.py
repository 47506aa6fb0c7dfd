import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab.capacity import CapacityConfig
from potlab.criteria import (CriterionReport, ball_growth_test, capacity_compare_test, critical_exponent_pure,
                             doubling_verify, fefferman_phong_test, is_divergent, is_stable, measure_battery,
                             pointwise_test, quasi_metric_verify, run_criterion, sandwich_constants,
                             subcritical_mixed)
from potlab.errors import DomainError
from potlab.kernels import KernelSpec, quasi_distance
from potlab.model import Atom, BoundaryMeasure, Domain, RadialPowerDensity, UniformBallDensity

O = (0.0, 0.0)


def _bm(*comps):
    return BoundaryMeasure.from_components(Domain.halfspace(3), comps)


# exponents -----------------------------------------------------------------


def test_critical_exponents():
    assert critical_exponent_pure(3) == 2.0
    assert critical_exponent_pure(5) == 1.5
    with pytest.raises(DomainError):
        critical_exponent_pure(2)


def test_subcritical_mixed_examples():
    assert subcritical_mixed(3, 1.2, 0.0)
    assert not subcritical_mixed(3, 2.0, 0.0)
    assert not subcritical_mixed(3, 0.0, 1.4)
    with pytest.raises(DomainError):
        subcritical_mixed(3, 0.5, 0.2)


@given(st.integers(3, 8), st.floats(1.01, 4.0))
def test_subcritical_mixed_reduces_to_pure_exponent(N, q1):
    assert subcritical_mixed(N, q1, 0.0) == (q1 < critical_exponent_pure(N))


# operational rules ---------------------------------------------------------


def test_stability_and_divergence_rules():
    assert is_stable([1.0, 1.05])
    assert not is_stable([1.0, 1.2])
    assert not is_stable([1.0, math.inf])
    assert not is_stable([1.0])
    assert is_divergent([1.0, 2.0, 4.0, 8.0])
    assert not is_divergent([1.0, 1.5, 1.75, 1.875])  # increments halve
    assert not is_divergent([1.0, 2.0, 4.0])  # too few refinements
    assert is_divergent([1.0, math.inf])


# ball growth and Fefferman-Phong -------------------------------------------


def test_ball_growth_uniform_disc():
    c, R = 0.5, 1.0
    rep = ball_growth_test(_bm(UniformBallDensity(O, R, c)), 3.0)
    # exponent N - (q+1)/(q-1) = 1: sigma(B_r)/r = c pi r, largest at r = R
    assert rep.verdict == "pass"
    assert rep.constant == pytest.approx(c * math.pi * R, rel=1e-10)


def test_ball_growth_atom_fails():
    rep = ball_growth_test(_bm(Atom(O, 1.0)), 3.0)
    assert rep.verdict == "fail" and rep.constant == math.inf
    assert rep.levels == sorted(rep.levels)


def test_ball_growth_rejects_subcritical_q():
    with pytest.raises(DomainError):
        ball_growth_test(_bm(Atom(O, 1.0)), 2.0)


def test_fefferman_phong_power_passes_with_exact_constant():
    f = RadialPowerDensity(O, -1.0, 1.0, 1.0)
    rep = fefferman_phong_test(f, 0.1, 3.0, 3)
    # int_{B_r} |z|^-1.1 = 2 pi r^0.9 / 0.9 and the exponent is 2 - 2.2/2 = 0.9
    assert rep.verdict == "pass"
    assert rep.constant == pytest.approx(2 * math.pi / 0.9, rel=1e-8)


def test_fefferman_phong_non_integrable_power_is_divergent():
    rep = fefferman_phong_test(RadialPowerDensity(O, -2.0, 1.0, 1.0), 0.1, 3.0, 3)
    assert rep.verdict == "divergent"


@pytest.mark.parametrize("p", [-1.2, -0.5, 0.0, 0.5])
def test_fefferman_phong_pass_implies_ball_growth_pass(p):
    f = RadialPowerDensity(O, p, 1.0, 1.0)
    fp = fefferman_phong_test(f, 0.1, 3.0, 3)
    if fp.passed:
        assert ball_growth_test(_bm(f), 3.0).passed


def test_fefferman_phong_rejects_atoms_and_bad_eps():
    with pytest.raises(DomainError):
        fefferman_phong_test(Atom(O, 1.0), 0.1, 3.0, 3)
    with pytest.raises(DomainError):
        fefferman_phong_test(UniformBallDensity(O, 1.0, 1.0), 0.0, 3.0, 3)


# quasi-metric, sandwich, doubling ------------------------------------------


def test_quasi_distance_triangle_with_z_equal_x(rng):
    D = Domain.halfspace(3)
    spec = KernelSpec(2.0, 2.0)
    x = np.abs(rng.normal(size=(50, 3)))
    y = np.abs(rng.normal(size=(50, 3)))
    r = quasi_distance(spec, D, x, y) / (quasi_distance(spec, D, x, x) + quasi_distance(spec, D, x, y))
    assert np.all(r <= 1.0 + 1e-12)


def test_quasi_metric_alpha_zero_is_a_metric():
    rep = quasi_metric_verify(KernelSpec(0.0, 2.0), Domain.halfspace(3))
    assert rep.verdict == "pass" and rep.constant <= 1.0 + 1e-9


def test_quasi_metric_constant_finite_for_the_pure_model(ball3):
    rep = quasi_metric_verify(KernelSpec(2.0, 2.0), ball3)
    assert rep.verdict == "pass" and 1.0 <= rep.constant < 100


def test_quasi_metric_needs_enough_triples(half3):
    with pytest.raises(DomainError):
        quasi_metric_verify(KernelSpec(2.0, 2.0), half3, sample_count=100)


def test_sandwich_constants_bracket_the_limits(half3):
    # near the diagonal the ratio tends to 1/(4 pi); far apart to 1/(2 pi)
    c1, c2, c1h, c2h = sandwich_constants(half3, n_pairs=2000, seed=3)
    assert 0 < c1 <= 1 / (4 * math.pi) + 1e-9
    assert c2 >= 1 / (2 * math.pi) - 1e-9
    assert c1 <= c1h and c2 >= c2h


def test_doubling_halfspace_lebesgue(half3):
    rep = doubling_verify(0.0, half3, samples=8)
    assert rep.verdict == "pass"
    # nu(B_s)/s^3 is |B| = 4 pi / 3 for balls inside the half-space
    assert rep.details["large"]["c_high"] == pytest.approx(4 * math.pi / 3, rel=1e-9)
    assert 1.0 < rep.constant < 8.0


def test_doubling_rejects_negative_weight(half3):
    with pytest.raises(DomainError):
        doubling_verify(-1.0, half3)


# pointwise and capacity ------------------------------------------------------


def test_pointwise_atom_fails_with_slope():
    rep = pointwise_test(_bm(Atom(O, 1.0)), 3.0)
    assert rep.verdict == "fail"
    assert rep.details["divergent_integral"]
    # the slope of the excised ratio is 1 + N - q (N - 1) = -2
    assert rep.details["slope"] == pytest.approx(-2.0, abs=0.1)


def test_pointwise_zero_measure_passes():
    rep = pointwise_test(BoundaryMeasure.zero(Domain.halfspace(3)), 3.0)
    assert rep.verdict == "pass" and rep.constant == 0.0


def test_capacity_compare_uniform_passes_and_atom_fails():
    cfg = CapacityConfig(n_res=4)
    assert capacity_compare_test(_bm(UniformBallDensity(O, 1.0, 1.0)), 4.0, cfg=cfg).verdict == "pass"
    assert capacity_compare_test(_bm(Atom(O, 1.0)), 4.0, cfg=cfg).verdict == "fail"


def test_battery_has_twelve_positive_measures():
    battery = measure_battery()
    assert len(battery) >= 12
    assert len({name for name, _ in battery}) == len(battery)
    assert all(s.is_positive and not s.is_zero for _, s in battery)


# reports ---------------------------------------------------------------------


def test_report_serialization_roundtrip():
    rep = ball_growth_test(_bm(UniformBallDensity(O, 1.0, 1.0)), 3.0)
    data = json.loads(rep.to_json())
    assert data["criterion"] == "ball-growth" and data["verdict"] == "pass"
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == "criterion,level,constant,verdict"
    assert lines[-1].startswith("ball-growth,final,") and lines[-1].endswith(",pass")
    inf = ball_growth_test(_bm(Atom(O, 1.0)), 3.0).to_dict()
    assert inf["constant"] == "inf"
    json.dumps(inf, allow_nan=False)


def test_report_invariants():
    with pytest.raises(ValueError):
        CriterionReport("x", "maybe", 1.0)
    with pytest.raises(ValueError):
        CriterionReport("x", "pass", math.inf)


def test_run_criterion_dispatch():
    sigma = _bm(UniformBallDensity(O, 1.0, 1.0))
    assert run_criterion("ball-growth", sigma, q=3.0).criterion == "ball-growth"
    with pytest.raises(KeyError):
        run_criterion("nonsense", sigma)
