import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from potlab.errors import DivergenceError, DomainError
from potlab.kernels import KernelSpec, green_exact, poisson_exact
from potlab.model import Atom, BoundaryMeasure, Domain, RadialPowerDensity, UniformBallDensity
from potlab.potentials import doubling_integral, doubling_integrals, green_potential, n_measure_potential, \
    nu_ball, nu_quasi_ball, poisson_potential, riesz_convolution, riesz_potential
from potlab.quadrature import ball_volume

O = (0.0, 0.0)


def _bm(D, *comps):
    return BoundaryMeasure.from_components(D, comps)


def test_poisson_of_atom_is_the_kernel(half3):
    s = _bm(half3, Atom((0.5, 0.0), 2.0))
    x = np.array([0.1, 0.2, 0.3])
    assert poisson_potential(s, x) == pytest.approx(2 * poisson_exact(half3, x, (0.5, 0.0)), rel=1e-12)


@given(st.floats(0.05, 4.0), st.floats(0.2, 3.0))
def test_poisson_of_uniform_disc_on_axis(t, R):
    D = Domain.halfspace(3)
    s = _bm(D, UniformBallDensity(O, R, 1.0))
    assert poisson_potential(s, [0.0, 0.0, t]) == pytest.approx(1 - t / math.hypot(R, t), rel=1e-6)


def test_poisson_of_uniform_on_sphere_is_constant(ball3):
    # the Poisson kernel integrates to one against surface measure
    s = _bm(ball3, UniformBallDensity((0.0, 0.0, 1.0), 2.0, 1.0 / (4 * math.pi)))
    for x in ([0.0, 0.0, 0.5], [0.3, -0.2, 0.1], [0.0, 0.0, -0.9]):
        assert poisson_potential(s, x) == pytest.approx(1 / (4 * math.pi), rel=1e-5)


def test_poisson_requires_interior(half3):
    with pytest.raises(DomainError):
        poisson_potential(_bm(half3, Atom(O, 1.0)), [0.0, 0.0, 0.0])


def test_green_potential_of_constant_in_ball(ball3):
    # -Lap u = 1 in B, u = 0 on the sphere: u = (1 - |x|^2) / 6
    for x in ([0.0, 0.0, 0.0], [0.4, 0.2, -0.3]):
        x = np.array(x)
        got = green_potential(lambda y: np.ones(np.shape(y)[:-1]), x, ball3)
        assert got == pytest.approx((1 - x @ x) / 6, rel=1e-3)


@pytest.mark.parametrize("x", [(0.0, 0.0, 0.7), (0.5, -0.3, 0.2), (1.0, 0.0, 1.5)])
def test_green_potential_of_manufactured_source(half3, x):
    # u = t exp(-|y|^2) vanishes on the boundary and decays; f = -Lap u
    def f(y):
        r2 = np.sum(y * y, axis=-1)
        return y[..., -1] * np.exp(-r2) * (10 - 4 * r2)

    x = np.array(x)
    assert green_potential(f, x, half3) == pytest.approx(x[-1] * math.exp(-x @ x), rel=1e-5)


def test_green_of_poisson_power_diverges_at_supercritical_atom(half3):
    s = _bm(half3, Atom(O, 1.0))
    with pytest.raises(DivergenceError):
        green_potential(lambda y: np.asarray(poisson_potential(s, y)) ** 3, np.array([0.0, 0.0, 1.0]), half3,
                        atoms=[O])


def test_green_of_poisson_power_finite_below_critical(half3):
    s = _bm(half3, Atom(O, 1.0))
    v = green_potential(lambda y: np.asarray(poisson_potential(s, y)) ** 1.5, np.array([0.0, 0.0, 1.0]), half3,
                        atoms=[O])
    assert 0 < v < math.inf


def test_n_potential_of_atom(half3):
    spec = KernelSpec(2.0, 2.0)
    s = _bm(half3, Atom(O, 1.0))
    x = np.array([0.3, 0.0, 0.4])
    r = 0.5
    assert n_measure_potential(spec, s, x) == pytest.approx(1 / (r * r ** 2), rel=1e-10)


@settings(max_examples=15)
@given(st.floats(0.2, 1.8), st.floats(-1.2, 1.0))
def test_riesz_layer_cake_agrees_with_convolution(gamma, p):
    D = Domain.halfspace(3)
    s = _bm(D, RadialPowerDensity(O, p, 1.0, 1.0))
    y = np.array([0.4, 0.3])
    assert riesz_potential(s, gamma, y) == pytest.approx(riesz_convolution(s, gamma, y), rel=1e-4)


def test_riesz_of_uniform_disc_at_center(half3):
    # int_{|z|<R} |z|^(g-2) dz / (2-g) = 2 pi R^g / (g (2-g))
    g, R = 0.8, 1.5
    s = _bm(half3, UniformBallDensity(O, R, 1.0))
    assert riesz_potential(s, g, np.zeros(2)) == pytest.approx(2 * math.pi * R ** g / (g * (2 - g)), rel=1e-6)


def test_riesz_of_atom_at_atom_is_infinite(half3):
    s = _bm(half3, Atom(O, 1.0))
    assert riesz_convolution(s, 1.0, np.zeros(2)) == math.inf


@given(st.floats(0.01, 0.99), st.floats(0.0, 4.0))
def test_nu_ball_inside_domain(t, alpha0):
    D = Domain.halfspace(3)
    x = np.array([0.0, 0.0, 1.0])
    s = t  # ball inside the half-space
    if alpha0 == 0:
        assert nu_ball(D, 0.0, x, s) == pytest.approx(ball_volume(3) * s ** 3, rel=1e-9)
    else:
        v = nu_ball(D, alpha0, x, s)
        lo, hi = (1 - s) ** alpha0, (1 + s) ** alpha0
        assert lo * ball_volume(3) * s ** 3 <= v * (1 + 1e-9) and v <= hi * ball_volume(3) * s ** 3 * (1 + 1e-9)


def test_nu_ball_whole_unit_ball(ball3):
    # int_B (1-|x|)^a dx = 4 pi * 2 / ((a+1)(a+2)(a+3))
    a = 2.0
    v = nu_ball(ball3, a, np.array([0.0, 0.0, 0.1]), 2.5)
    assert v == pytest.approx(4 * math.pi * 2 / ((a + 1) * (a + 2) * (a + 3)), rel=1e-8)


def test_nu_ball_tiny_radius_keeps_relative_accuracy(ball3):
    x = np.array([0.0, 0.0, 0.7])
    for s in (1e-14, 1e-8):
        assert nu_ball(ball3, 2.0, x, s) == pytest.approx(0.09 * ball_volume(3) * s ** 3, rel=1e-6)


def test_quasi_ball_small_radius_is_euclidean_scaled(half3):
    # d(x, y) ~ |x - y| rho(x)^alpha near x, so the quasi ball of radius s is a ball of radius s / t^2
    spec = KernelSpec(2.0, 2.0)
    t = 0.5
    x = np.array([0.0, 0.0, t])
    s = 1e-9
    assert nu_quasi_ball(spec, half3, 0.0, x, s) == pytest.approx(ball_volume(3) * (s / t ** 2) ** 3, rel=1e-6)


def test_quasi_ball_matches_ball_when_alpha_zero(half3, ball3):
    spec = KernelSpec(0.0, 2.0)
    for D, x in ((half3, np.array([0.0, 0.0, 0.5])), (ball3, np.array([0.0, 0.0, 0.4]))):
        for s in (0.1, 0.7, 1.5):
            assert nu_quasi_ball(spec, D, 1.0, x, s) == pytest.approx(nu_ball(D, 1.0, x, s), rel=1e-8)


def test_doubling_integrals_single_and_batched_agree(half3):
    spec = KernelSpec(2.0, 2.0)
    x = np.array([0.0, 0.0, 1.0])
    r = np.array([0.1, 1.0, 10.0])
    batch = doubling_integrals(spec, half3, 0.0, x, r)
    for ri, bi in zip(r, batch):
        assert doubling_integral(spec, half3, 0.0, x, ri) == pytest.approx(bi, rel=1e-8)
    assert np.all(np.diff(batch) > 0)


def test_doubling_integral_small_radius_closed_form(half3):
    # quasi ball = Euclidean ball of radius s (rho = 1): D(r) = |B| r^2 / 2
    spec = KernelSpec(2.0, 2.0)
    x = np.array([0.0, 0.0, 1.0])
    r = 1e-6
    assert doubling_integral(spec, half3, 0.0, x, r) == pytest.approx(ball_volume(3) * r ** 2 / 2, rel=1e-5)
