import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab.errors import DomainError
from potlab.model import Atom, BoundaryMeasure, Domain, RadialPowerDensity, TabulatedDensity, \
    UniformBallDensity, lens_volume, measure_ball, rho


def test_domain_validation():
    with pytest.raises(DomainError):
        Domain.halfspace(2)
    with pytest.raises(DomainError):
        Domain("cube", 3)


def test_rho_half_space_and_ball(half3, ball3):
    assert rho(half3, [1.0, 2.0, 0.25]) == pytest.approx(0.25)
    assert rho(ball3, [0.0, 0.6, 0.0]) == pytest.approx(0.4)
    with pytest.raises(DomainError):
        rho(half3, [0.0, 0.0, -1.0])


def test_components_split_by_sign(half3):
    o = (0.0, 0.0)
    s = BoundaryMeasure.from_components(half3, [Atom(o, 2.0), UniformBallDensity((1.0, 0.0), 0.5, -1.0)])
    assert not s.is_positive
    assert len(s.positive) == 1 and len(s.negative) == 1
    assert s.abs().is_positive
    assert s.total_variation() == pytest.approx(2.0 + math.pi * 0.25)


def test_power_density_must_have_finite_mass(half3):
    with pytest.raises(DomainError):
        BoundaryMeasure.from_components(half3, [RadialPowerDensity((0.0, 0.0), -2.0, 1.0, 1.0)])


def test_ball_boundary_points_must_be_unit(ball3):
    with pytest.raises(DomainError):
        BoundaryMeasure.from_components(ball3, [Atom((0.0, 0.0, 0.9), 1.0)])


@given(st.floats(0.05, 3.0), st.floats(-1.4, 0.5))
def test_measure_ball_radial_power_closed_form(r, p):
    D = Domain.halfspace(3)
    s = BoundaryMeasure.from_components(D, [RadialPowerDensity((0.0, 0.0), p, 1.0, 2.0)])
    rr = min(r, 1.0)
    assert measure_ball(s, (0.0, 0.0), r) == pytest.approx(2.0 * 2 * math.pi * rr ** (p + 2) / (p + 2), rel=1e-8)


def test_measure_ball_off_center_uniform_is_lens_area(half3):
    s = BoundaryMeasure.from_components(half3, [UniformBallDensity((0.0, 0.0), 1.0, 3.0)])
    got = measure_ball(s, (0.8, 0.0), 0.5)
    assert got == pytest.approx(3.0 * lens_volume(1.0, 0.5, 0.8, 2), rel=1e-7)


def test_measure_ball_atom_is_closed(half3):
    s = BoundaryMeasure.from_components(half3, [Atom((1.0, 0.0), 0.7)])
    assert measure_ball(s, (0.0, 0.0), 1.0) == pytest.approx(0.7)
    assert measure_ball(s, (0.0, 0.0), 0.999) == 0.0


def test_tabulated_density_ball_mass(half3):
    t = TabulatedDensity((-1.0, -1.0), 0.5, np.ones((4, 4)))
    s = BoundaryMeasure.from_components(half3, [t])
    assert s.total_variation() == pytest.approx(4.0)
    assert measure_ball(s, (0.0, 0.0), 10.0) == pytest.approx(4.0, rel=1e-6)


def test_sphere_cap_mass_of_uniform_density(ball3):
    # uniform density on a cap of chordal radius 2 covers the sphere: mass 4 pi
    n = (0.0, 0.0, 1.0)
    s = BoundaryMeasure.from_components(ball3, [UniformBallDensity(n, 2.0, 1.0)])
    assert s.total_variation() == pytest.approx(4 * math.pi, rel=1e-8)
    # chordal radius r about the pole: area pi r^2 on the unit sphere
    assert measure_ball(s, n, 0.6) == pytest.approx(math.pi * 0.36, rel=1e-8)


def test_radial_center(half3):
    a = BoundaryMeasure.from_components(half3, [Atom((1.0, 1.0), 1.0), UniformBallDensity((1.0, 1.0), 1.0, 1.0)])
    assert a.radial_center() == (1.0, 1.0)
    b = BoundaryMeasure.from_components(half3, [Atom((1.0, 1.0), 1.0), Atom((0.0, 0.0), 1.0)])
    assert b.radial_center() is None
