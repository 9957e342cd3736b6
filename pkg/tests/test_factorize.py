"""Factorization tests: outer-inner split, inner gcd, causal projection
against an FFT Laurent-coefficient oracle, and polynomial stabilization."""

import numpy as np
import pytest
from numpy.polynomial import polynomial as npoly

from lowrank_sysid import ratfun
from lowrank_sysid.errors import (
    IndeterminateZeroError,
    InvalidInputError,
    SingularProjectionError,
)
from lowrank_sysid.factorize import (
    blaschke,
    causal_project,
    inner_gcd,
    outer_inner,
    stabilize_poly,
)
from lowrank_sysid.ratfun import circle_grid, eval_circle, reduce
from lowrank_sysid.simulate import filter_series

from conftest import assert_tf_equal, random_poly_from_radii, random_stable_tf

GRID = circle_grid(64)


def fft_causal_coeffs(w, count, n_points=4096):
    """Laurent coefficients of z^-k, k >= 0, sampled on the circle via FFT."""
    theta = 2.0 * np.pi * np.arange(n_points) / n_points
    values = w(np.exp(1j * theta))
    coeffs = np.fft.ifft(values)
    return coeffs[:count].real


def impulse_response(w, count):
    pulse = np.zeros(count)
    pulse[0] = 1.0
    return filter_series(w, pulse).samples


class TestOuterInner:
    def test_example2_w1(self, ex2_w1):
        pair = outer_inner(ex2_w1)
        assert_tf_equal(pair.outer, [1.0, 2.0], [-0.2, 1.0], atol=1e-10)  # (2z+1)/(z-0.2)
        assert_tf_equal(pair.inner, [2.0, 1.0], [1.0, 2.0], atol=1e-10)  # (z+2)/(2z+1)

    def test_minimum_phase_passthrough(self, ex1_w1):
        pair = outer_inner(ex1_w1)
        assert pair.inner.is_one()
        np.testing.assert_array_equal(pair.outer.num, ex1_w1.num)

    def test_example2_w2_magnitude(self, ex2_w2):
        pair = outer_inner(ex2_w2)
        _, zeros = ratfun.poles_zeros(pair.outer)
        np.testing.assert_allclose(zeros.real, [0.5], atol=1e-10)
        assert abs(abs(pair.outer.num[-1] / pair.outer.den[-1]) - 2.0) < 1e-10
        mags = np.abs(eval_circle(pair.outer, GRID))
        np.testing.assert_allclose(mags, np.abs(eval_circle(ex2_w2, GRID)), atol=1e-10)

    def test_random_suite(self):
        rng = np.random.default_rng(101)
        done = 0
        while done < 100:
            w = random_stable_tf(rng)
            if w.is_zero():
                continue
            pair = outer_inner(w)
            q_mag = np.abs(eval_circle(pair.inner, GRID))
            assert np.max(np.abs(q_mag - 1.0)) <= 1e-10
            recon = eval_circle(pair.outer, GRID) * eval_circle(pair.inner, GRID)
            direct = eval_circle(w, GRID)
            assert np.max(np.abs(recon - direct)) <= 1e-10 * max(1.0, np.max(np.abs(direct)))
            assert ratfun.classify(pair.outer).minimum_phase
            assert float(pair.inner(1.0).real) > 0.0
            done += 1

    def test_unstable_rejected(self):
        with pytest.raises(InvalidInputError):
            outer_inner(reduce([1.0], [-2.0, 1.0]))

    def test_circle_zero_rejected(self):
        with pytest.raises(IndeterminateZeroError):
            outer_inner(reduce([-1.0, 1.0], [0.2, 1.0]))


class TestInnerGcd:
    def test_example2_pair_coprime(self):
        q1 = reduce([2.0, 1.0], [1.0, 2.0])
        q2 = reduce([-2.0, 1.0], [-1.0, 2.0])
        assert inner_gcd(q1, q2).is_one()

    def test_gcd_with_itself(self):
        q = reduce([2.0, 1.0], [1.0, 2.0])
        got = inner_gcd(q, q)
        assert_tf_equal(got, q.num, q.den, atol=1e-10)

    def test_partial_overlap(self):
        qa = blaschke([-2.0, 3.0])
        qb = blaschke([3.0, 4.0])
        expected = blaschke([3.0])
        got = inner_gcd(qa, qb)
        assert_tf_equal(got, expected.num, expected.den, atol=1e-8)

    def test_quotients_stay_inner(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            shared = [float(rng.uniform(1.3, 3.0))]
            qa = blaschke(shared + [float(rng.uniform(1.3, 3.0))])
            qb = blaschke(shared + [-float(rng.uniform(1.3, 3.0))])
            g = inner_gcd(qa, qb)
            for q in (qa / g, qb / g):
                mags = np.abs(eval_circle(q, GRID))
                assert np.max(np.abs(mags - 1.0)) <= 1e-8

    def test_non_inner_rejected(self):
        with pytest.raises(InvalidInputError):
            inner_gcd(reduce([1.0], [-0.5, 1.0]), reduce([2.0, 1.0], [1.0, 2.0]))


class TestCausalProject:
    def test_stable_causal_identity(self, ex1_w1):
        got = causal_project(ex1_w1)
        np.testing.assert_array_equal(got.num, ex1_w1.num)
        np.testing.assert_array_equal(got.den, ex1_w1.den)

    def test_shifted_example1(self, ex1_w1):
        # [z*w1]_+ = z*(0.2 z^2 + 0.25 z - 0.05)/den; drives the predictor chain
        got = causal_project(ratfun.Z * ex1_w1)
        assert_tf_equal(got, [0.0, -0.05, 0.25, 0.2], [0.05, -0.25, -0.2, 1.0], atol=1e-12)

    def test_mixed_poles_fft_oracle(self):
        w = reduce([1.0], npoly.polymul([-0.5, 1.0], [-2.0, 1.0]))  # 1/((z-0.5)(z-2))
        got = causal_project(w)
        np.testing.assert_allclose(
            impulse_response(got, 50), fft_causal_coeffs(w, 50), atol=1e-8
        )

    def test_random_fft_oracle_suite(self):
        rng = np.random.default_rng(202)
        for _ in range(100):
            den_in = random_poly_from_radii(rng, int(rng.integers(1, 3)), 0.15, 0.85, 1.0, 1.0)
            den_out = random_poly_from_radii(rng, int(rng.integers(1, 3)), 1.2, 2.5, 1.0, 1.0)
            den = npoly.polymul(den_in, den_out)
            deg = ratfun.poly_degree(den)
            num = rng.uniform(-1.5, 1.5, int(rng.integers(1, deg + 2)))  # may be improper by one
            w = reduce(num, den)
            got = causal_project(w)
            flags = ratfun.classify(got)
            assert flags.stable and flags.causal
            np.testing.assert_allclose(
                impulse_response(got, 40), fft_causal_coeffs(w, 40), atol=1e-8
            )

    def test_linearity(self):
        rng = np.random.default_rng(57)
        for _ in range(25):
            den_a = random_poly_from_radii(rng, 2, 0.2, 0.8, 1.0, 1.0)
            den_b = random_poly_from_radii(rng, 1, 1.3, 2.0, 1.0, 1.0)
            wa = reduce(rng.uniform(-1, 1, 2), den_a)
            wb = reduce(rng.uniform(-1, 1, 2), den_b)
            a, b = rng.uniform(-2, 2, 2)
            combo = causal_project(a * wa + b * wb)
            parts = a * causal_project(wa) + b * causal_project(wb)
            lhs = eval_circle(combo, GRID)
            rhs = eval_circle(parts, GRID)
            assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(lhs)))

    def test_idempotence(self):
        rng = np.random.default_rng(58)
        for _ in range(25):
            den = npoly.polymul(
                random_poly_from_radii(rng, 1, 0.2, 0.8, 1.0, 1.0),
                random_poly_from_radii(rng, 1, 1.3, 2.2, 1.0, 1.0),
            )
            w = reduce(rng.uniform(-1, 1, 2), den)
            once = causal_project(w)
            twice = causal_project(once)
            np.testing.assert_allclose(twice.num, once.num, atol=1e-12)
            np.testing.assert_allclose(twice.den, once.den, atol=1e-12)

    def test_completeness_and_anticausal_remainder(self):
        rng = np.random.default_rng(59)
        for _ in range(25):
            den = npoly.polymul(
                random_poly_from_radii(rng, 1, 0.2, 0.8, 1.0, 1.0),
                random_poly_from_radii(rng, 1, 1.3, 2.2, 1.0, 1.0),
            )
            num = rng.uniform(-1, 1, 3)
            w = reduce(num, den)
            causal, anti = split_causal(w)
            # remainder is strictly anticausal: poles outside, zero constant term
            if not anti.is_zero():
                poles, _ = ratfun.poles_zeros(anti)
                assert np.all(np.abs(poles) > 1.0)
                assert abs(complex(anti(0.0))) < 1e-9
            back = causal + anti
            lhs = eval_circle(back, GRID)
            rhs = eval_circle(w, GRID)
            assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(rhs)))

    def test_pole_on_circle_rejected(self):
        with pytest.raises(SingularProjectionError):
            causal_project(reduce([1.0], [-1.0, 1.0]))


class TestStabilizePoly:
    def test_stable_unchanged(self):
        coeffs = npoly.polymul([-0.5, 1.0], [-0.2, 1.0])
        np.testing.assert_array_equal(stabilize_poly(coeffs), ratfun.poly_trim(coeffs))

    def test_single_reflection(self):
        got = stabilize_poly([-2.0, 1.0])
        np.testing.assert_allclose(got, [-1.0, 2.0], atol=1e-12)  # 2z - 1

    def test_double_root_after_reflection(self):
        coeffs = npoly.polymul([-2.0, 1.0], [-0.5, 1.0])
        got = stabilize_poly(coeffs)
        roots = ratfun.poly_roots(got)
        np.testing.assert_allclose(sorted(roots.real), [0.5, 0.5], atol=1e-8)
        assert abs(got[-1] - 2.0) < 1e-12

    def test_magnitude_preserved_random(self):
        rng = np.random.default_rng(404)
        z = np.exp(1j * GRID)
        for _ in range(100):
            inside = random_poly_from_radii(rng, int(rng.integers(0, 3)), 0.1, 0.8, 1.0, 1.0)
            outside = random_poly_from_radii(rng, int(rng.integers(1, 3)), 1.2, 3.0, 1.0, 1.0)
            coeffs = npoly.polymul(inside, outside) * rng.uniform(0.5, 2.0)
            got = stabilize_poly(coeffs)
            roots = ratfun.poly_roots(got)
            assert np.all(np.abs(roots) < 1.0)
            mag_in = np.abs(npoly.polyval(z, coeffs))
            mag_out = np.abs(npoly.polyval(z, got))
            assert np.max(np.abs(mag_in - mag_out)) <= 1e-10 * max(1.0, mag_in.max())

    def test_circle_root_rejected(self):
        with pytest.raises(IndeterminateZeroError):
            stabilize_poly([-1.0, 1.0])
