import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab.errors import DomainError
from potlab.kernels import HardyParams, KernelSpec, grad_green_exact, grad_poisson_exact, green_exact, \
    hardy_exponents, n_kernel, poisson_exact, quasi_distance
from potlab.model import Domain

coord = st.floats(-3, 3)
height = st.floats(0.01, 3)


def _images_3d(x, y):
    ys = np.array([y[0], y[1], -y[2]])
    return (1 / np.linalg.norm(x - y) - 1 / np.linalg.norm(x - ys)) / (4 * math.pi)


def _kelvin_3d(x, y):
    ny = np.linalg.norm(y)
    ystar = y / ny ** 2
    return (1 / np.linalg.norm(x - y) - 1 / (ny * np.linalg.norm(x - ystar))) / (4 * math.pi)


@given(coord, coord, height, coord, coord, height)
def test_green_half_space_matches_images(a, b, c, d, e, f):
    x, y = np.array([a, b, c]), np.array([d, e, f])
    if np.linalg.norm(x - y) < 1e-3:
        return
    D = Domain.halfspace(3)
    assert green_exact(D, x, y) == pytest.approx(_images_3d(x, y), rel=1e-10)
    assert green_exact(D, x, y) == pytest.approx(green_exact(D, y, x), rel=1e-12)
    assert green_exact(D, x, y) > 0


def test_green_ball_matches_kelvin(rng):
    D = Domain.ball(3)
    for _ in range(50):
        x, y = rng.normal(size=(2, 3))
        x *= rng.uniform(0.01, 0.99) / np.linalg.norm(x)
        y *= rng.uniform(0.05, 0.99) / np.linalg.norm(y)
        assert green_exact(D, x, y) == pytest.approx(_kelvin_3d(x, y), rel=1e-10)


def test_green_vanishes_on_boundary(half3):
    assert green_exact(half3, [0.1, 0.2, 0.5], [1.0, 0.0, 0.0]) == 0.0


@given(coord, coord, height, coord, coord)
def test_poisson_half_space_closed_form(a, b, t, z1, z2):
    D = Domain.halfspace(3)
    x = np.array([a, b, t])
    z = np.array([z1, z2])
    r2 = (a - z1) ** 2 + (b - z2) ** 2 + t * t
    assert poisson_exact(D, x, z) == pytest.approx(t / (2 * math.pi * r2 ** 1.5), rel=1e-12)


def test_poisson_is_normal_derivative_of_green(half3):
    # P(x, z) = d/dy_N G(x, y) at y = z
    x = np.array([0.3, -0.4, 0.8])
    z = np.array([0.5, 0.1])
    h = 1e-5
    fd = green_exact(half3, x, [z[0], z[1], h]) / h
    assert fd == pytest.approx(poisson_exact(half3, x, z), rel=1e-4)


def test_poisson_normalization_ball_by_quadrature(ball3):
    x = np.array([0.2, -0.1, 0.5])
    th, wt = np.polynomial.legendre.leggauss(200)
    th = 0.5 * math.pi * (th + 1)
    wt = 0.5 * math.pi * wt
    ph = np.linspace(0, 2 * math.pi, 400, endpoint=False)
    T, P = np.meshgrid(th, ph, indexing="ij")
    z = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1)
    vals = poisson_exact(ball3, x[None, None, :], z)
    total = np.sum(vals * np.sin(T) * wt[:, None]) * (2 * math.pi / 400)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_gradients_match_finite_differences(half3):
    x = np.array([0.2, 0.1, 0.6])
    y = np.array([0.5, -0.3, 0.9])
    h = 1e-6
    fd = [(green_exact(half3, x + h * e, y) - green_exact(half3, x - h * e, y)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(grad_green_exact(half3, x, y), fd, rtol=1e-6)
    z = np.array([0.4, 0.0])
    fd = [(poisson_exact(half3, x + h * e, z) - poisson_exact(half3, x - h * e, z)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(grad_poisson_exact(half3, x, z), fd, rtol=1e-6)


def test_n_kernel_formula(half3):
    spec = KernelSpec(2.0, 2.0)
    x, y = np.array([0.0, 0.0, 0.5]), np.array([1.0, 0.0, 0.25])
    r = math.sqrt(1 + 0.0625)
    assert n_kernel(spec, half3, x, y) == pytest.approx(1 / (r * max(r, 0.5, 0.25) ** 2))
    assert quasi_distance(spec, half3, x, y) == pytest.approx(r * r ** 2)


def test_kernel_spec_validation():
    with pytest.raises(DomainError):
        KernelSpec(3.0, 2.0)
    with pytest.raises(DomainError):
        KernelSpec(2.0, 3.0).check(3)


def test_hardy_exponents_at_zero_and_quarter():
    h0 = hardy_exponents(HardyParams(0.0), 3.0)
    assert h0.a == 1.0 and h0.alpha_h == 2.0 and h0.alpha0_h == 4.0
    assert h0.cap_order == 2.0 / 3.0
    h = hardy_exponents(HardyParams(0.25), 3.0)
    assert h.a == 0.5
    # (q + 3 - (q - 1) sqrt(1 - 4 kappa)) / (2 q) with kappa = 1/4
    assert h.cap_order == pytest.approx(6.0 / 6.0)


@given(st.floats(1.01, 10.0))
def test_hardy_cap_order_exact_at_kappa_zero(q):
    assert hardy_exponents(HardyParams(0.0), q).cap_order == 2.0 / q
