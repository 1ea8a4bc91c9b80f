import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrperc.errors import DomainError
from lrperc.kernel import Kernel, Norm, ball_count, cutoff_value, edge_probability, kernel_value, unit_ball_volume


def test_norm_scale_makes_unit_ball_unit_volume():
    assert Kernel(d=1).norm_scale == pytest.approx(2.0)
    for d in (1, 2, 3):
        for base in Norm:
            k = Kernel(d=d, norm_base=base)
            # volume of the scaled unit ball = V_base / scale^d = 1
            assert unit_ball_volume(d, base) / k.norm_scale**d == pytest.approx(1.0)


def test_nearest_neighbours_at_distance_two_in_one_dimension():
    assert Kernel().norm(1) == pytest.approx(2.0)
    assert Kernel().norm([-3]) == pytest.approx(6.0)


def test_derivative_matches_kernel():
    k = Kernel(d=2, alpha=0.8)
    s, h = 3.7, 1e-5
    fd = (kernel_value(k, s + h) - kernel_value(k, s - h)) / (2 * h)
    assert abs(fd) == pytest.approx(k.derivative_magnitude(s), rel=1e-7)


@given(st.floats(0.1, 50.0), st.floats(0.1, 60.0))
def test_cutoff_is_integral_of_derivative(s, r):
    from scipy.integrate import quad

    k = Kernel()
    val = cutoff_value(k, s, r)
    if s >= r:
        assert val == 0.0
    else:
        ref = quad(k.derivative_magnitude, s, r, epsrel=1e-11)[0]
        assert val == pytest.approx(ref, rel=1e-8, abs=1e-300)


def test_cutoff_infinite_is_full_kernel():
    k = Kernel()
    assert cutoff_value(k, 3.0, math.inf) == kernel_value(k, 3.0)


def test_edge_probability_small_and_bounds():
    k = Kernel()
    assert edge_probability(k, 0.0, 2.0) == 0.0
    p = edge_probability(k, 1e-12, 2.0)
    assert p == pytest.approx(1e-12 * kernel_value(k, 2.0), rel=1e-9)
    assert edge_probability(k, 1e9, 2.0) == pytest.approx(1.0)
    assert edge_probability(k, 1.0, 5.0, r=4.0) == 0.0


def test_nearest_neighbour_kernel():
    k = Kernel(nearest_neighbour=True)
    assert edge_probability(k, 1.0, 2.0) == pytest.approx(1 - math.exp(-1))
    assert edge_probability(k, 1.0, 4.0) == 0.0


def test_domain_errors():
    with pytest.raises(DomainError):
        Kernel(alpha=0.0)
    with pytest.raises(DomainError):
        kernel_value(Kernel(), 0.0)
    with pytest.raises(DomainError):
        edge_probability(Kernel(), -1.0, 2.0)
    with pytest.raises(DomainError):
        cutoff_value(Kernel(), 1.0, 0.0)


def test_ball_count():
    assert ball_count(Kernel(), 16.0) == 17
    k2 = Kernel(d=2)
    brute = sum(1 for x in range(-20, 21) for y in range(-20, 21) if k2.norm([x, y]) <= 10.0 + 1e-12)
    assert ball_count(k2, 10.0) == brute
    k3 = Kernel(d=3, norm_base="sup")
    brute = sum(1 for x in range(-9, 10) for y in range(-9, 10) for z in range(-9, 10)
                if k3.norm([x, y, z]) <= 10.0 + 1e-12)
    assert ball_count(k3, 10.0) == brute
