import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from potlab.quadrature import ball_volume, composite_gauss, endpoint_graded, exp_graded, gauss_interval, \
    sphere_area


def test_sphere_area_and_ball_volume_known_values():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)
    # |S^(d-1)| = d |B^d|
    for d in range(2, 7):
        assert sphere_area(d - 1) == pytest.approx(d * ball_volume(d))


@given(st.floats(-5, 5), st.floats(0.1, 5), st.integers(1, 6))
def test_gauss_interval_integrates_polynomials_exactly(a, width, k):
    x, w = gauss_interval(a, a + width, 6)
    b = a + width
    assert np.sum(w * x ** k) == pytest.approx((b ** (k + 1) - a ** (k + 1)) / (k + 1), rel=1e-10, abs=1e-10)


def test_composite_gauss_weights_sum_to_length():
    x, w = composite_gauss([0.0, 0.3, 1.0, 2.5], 5)
    assert w.sum() == pytest.approx(2.5)
    assert np.all(np.diff(x) > 0)


def test_exp_graded_resolves_an_endpoint_singularity():
    # int_0^1 x^-1/2 = 2
    x, w = exp_graded(0.0, 1.0, 0.0, panels=4, order=8, floor=1e-14)
    assert np.sum(w / np.sqrt(x)) == pytest.approx(2.0, rel=1e-6)


def test_endpoint_graded_log_singularity():
    x, w = endpoint_graded(0.0, 1.0, panels=3, order=10)
    assert np.sum(w * np.log(x)) == pytest.approx(-1.0, rel=1e-8)
