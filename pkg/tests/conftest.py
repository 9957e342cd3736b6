"""Shared fixtures: the worked example systems and random system generators."""

import numpy as np
import pytest

from lowrank_sysid import ratfun
from lowrank_sysid.ratfun import RatTF, reduce


@pytest.fixture
def ex1_w1():
    # z^3 / ((z-0.5)(z+0.5)(z-0.2))
    return reduce([0.0, 0.0, 0.0, 1.0], [0.05, -0.25, -0.2, 1.0])


@pytest.fixture
def ex1_w2():
    # z^3 / ((z-0.5)(z-0.2)(z+0.1))
    return reduce([0.0, 0.0, 0.0, 1.0], [0.01, 0.03, -0.6, 1.0])


@pytest.fixture
def ex2_w1():
    return reduce([2.0, 1.0], [-0.2, 1.0])  # (z+2)/(z-0.2)


@pytest.fixture
def ex2_w2():
    return reduce([-2.0, 1.0], [-0.2, 1.0])  # (z-2)/(z-0.2)


@pytest.fixture
def grid64():
    return ratfun.circle_grid(64)


def assert_tf_equal(actual: RatTF, num, den, atol=1e-9):
    """Compare against the canonical form of num/den coefficient-wise."""
    expected = reduce(num, den)
    np.testing.assert_allclose(actual.num, expected.num, atol=atol, rtol=0,
                               err_msg=f"num mismatch: {actual} vs {expected}")
    np.testing.assert_allclose(actual.den, expected.den, atol=atol, rtol=0,
                               err_msg=f"den mismatch: {actual} vs {expected}")


def random_poly_from_radii(rng, degree, r_lo, r_hi, gain_lo=0.5, gain_hi=2.0):
    """Real polynomial with roots in the annulus [r_lo, r_hi], random gain."""
    reals, pairs = [], []
    remaining = degree
    while remaining > 0:
        radius = rng.uniform(r_lo, r_hi)
        if remaining >= 2 and rng.random() < 0.5:
            angle = rng.uniform(0.1, np.pi - 0.1)
            pairs.append(radius * np.exp(1j * angle))
            remaining -= 2
        else:
            reals.append(radius * rng.choice([-1.0, 1.0]))
            remaining -= 1
    gain = rng.uniform(gain_lo, gain_hi) * rng.choice([-1.0, 1.0])
    return ratfun.poly_from_root_groups(reals, pairs, lead=gain)


def random_stable_tf(rng, max_order=3, min_phase=False, strictly_causal=False,
                     pole_hi=0.85, zero_out_lo=1.25, zero_out_hi=2.5):
    """Random stable causal transfer function with well-separated roots."""
    dn = rng.integers(1, max_order + 1)
    den = random_poly_from_radii(rng, dn, 0.1, pole_hi, gain_lo=1.0, gain_hi=1.0)
    top = dn - 1 if strictly_causal else dn
    nn = int(rng.integers(0, top + 1))
    if min_phase or nn == 0:
        num = random_poly_from_radii(rng, nn, 0.05, 0.8)
    else:
        n_out = int(rng.integers(0, nn + 1))
        inside = random_poly_from_radii(rng, nn - n_out, 0.05, 0.8, gain_lo=1.0, gain_hi=1.0)
        outside = random_poly_from_radii(rng, n_out, zero_out_lo, zero_out_hi)
        num = np.polynomial.polynomial.polymul(inside, outside)
    return reduce(num, den)
