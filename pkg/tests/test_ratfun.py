"""Rational-algebra unit tests, including the worked-example values."""

import numpy as np
import pytest

from lowrank_sysid import ratfun
from lowrank_sysid.errors import (
    InvalidInputError,
    SingularEvaluationError,
)
from lowrank_sysid.ratfun import (
    arith,
    circle_grid,
    classify,
    closed_loop,
    eval_circle,
    from_delay_form,
    from_json_dict,
    para_conjugate,
    poles_zeros,
    reduce,
    spectrum,
    to_delay_form,
    to_json_dict,
)

from conftest import assert_tf_equal, random_stable_tf


class TestReduce:
    def test_common_factor_cancellation(self):
        num = np.polynomial.polynomial.polymul([0.5, 1.0], [-0.2, 1.0])  # (z+0.5)(z-0.2)
        den = np.polynomial.polynomial.polymul([-0.2, 1.0], [0.1, 1.0])  # (z-0.2)(z+0.1)
        assert_tf_equal(reduce(num, den), [0.5, 1.0], [0.1, 1.0], atol=1e-12)

    def test_coprime_unchanged(self, ex1_w1):
        assert_tf_equal(ex1_w1, [0, 0, 0, 1.0], [0.05, -0.25, -0.2, 1.0], atol=1e-15)

    def test_zero_numerator(self):
        w = reduce([0.0], [3.0, 1.0])
        assert w.is_zero()
        assert list(w.den) == [1.0]

    def test_zero_denominator_rejected(self):
        with pytest.raises(InvalidInputError):
            reduce([1.0], [0.0])

    def test_monic_denominator(self):
        w = reduce([2.0, 1.0], [1.0, 2.0])
        assert w.den[-1] == 1.0

    def test_idempotent_exactly(self):
        w = reduce([3.0, 2.0, 1.0], [0.3, -0.1, 0.5, 1.0])
        again = reduce(w.num, w.den)
        assert np.array_equal(w.num, again.num)
        assert np.array_equal(w.den, again.den)


class TestArith:
    def test_div_gives_feedback_channel(self, ex1_w1, ex1_w2):
        h = arith(ex1_w2, ex1_w1, "div")
        assert_tf_equal(h, [0.5, 1.0], [0.1, 1.0], atol=1e-12)

    def test_mul_recovers_w2(self, ex1_w1, ex1_w2):
        h = ex1_w2 / ex1_w1
        assert_tf_equal(h * ex1_w1, ex1_w2.num, ex1_w2.den, atol=1e-10)

    def test_identity(self):
        rng = np.random.default_rng(7)
        w = random_stable_tf(rng)
        assert_tf_equal(w * 1, w.num, w.den, atol=1e-15)

    def test_division_by_zero_rejected(self):
        with pytest.raises(InvalidInputError):
            reduce([1.0], [1.0]) / reduce([0.0], [1.0])

    def test_field_axioms_on_grid(self, grid64):
        rng = np.random.default_rng(42)

        def draw():
            num = rng.uniform(-1, 1, rng.integers(1, 4))
            den = rng.uniform(-1, 1, rng.integers(1, 4))
            while abs(den[-1]) < 1e-3:
                den = rng.uniform(-1, 1, len(den))
            return reduce(num, den)

        for _ in range(100):
            a, b, c = draw(), draw(), draw()
            lhs = eval_circle((a + b) * c, grid64)
            rhs = eval_circle(a * c + b * c, grid64)
            scale = max(1.0, np.max(np.abs(lhs)))
            assert np.max(np.abs(lhs - rhs)) <= 1e-9 * scale


class TestParaConjugate:
    def test_constant(self):
        assert para_conjugate(reduce([3.0], [1.0])).constant_value() == 3.0

    def test_inner_times_conjugate_is_one(self, grid64):
        q1 = reduce([2.0, 1.0], [1.0, 2.0])  # (z+2)/(2z+1)
        prod = q1 * para_conjugate(q1)
        vals = eval_circle(prod, grid64)
        assert np.max(np.abs(vals - 1.0)) < 1e-12

    def test_circle_values_conjugate(self, grid64):
        rng = np.random.default_rng(3)
        for _ in range(50):
            w = random_stable_tf(rng)
            direct = eval_circle(w, grid64)
            conj = eval_circle(para_conjugate(w), grid64)
            assert np.max(np.abs(conj - np.conj(direct))) < 1e-9 * max(1.0, np.max(np.abs(direct)))

    def test_involution(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            w = random_stable_tf(rng)
            back = para_conjugate(para_conjugate(w))
            np.testing.assert_allclose(back.num, w.num, atol=1e-12, rtol=0)
            np.testing.assert_allclose(back.den, w.den, atol=1e-12, rtol=0)

    def test_magnitude_squared_oracle(self, grid64):
        rng = np.random.default_rng(5)
        for _ in range(20):
            w = random_stable_tf(rng)
            prod = eval_circle(w * para_conjugate(w), grid64)
            direct = np.abs(eval_circle(w, grid64)) ** 2
            assert np.max(np.abs(np.abs(prod) - direct)) < 1e-9 * max(1.0, direct.max())


class TestEvalCircle:
    def test_unity(self):
        assert eval_circle(reduce([1.0], [1.0]), [0.3])[0] == 1.0

    def test_h_at_zero_angle(self):
        h = reduce([0.5, 1.0], [0.1, 1.0])
        assert abs(eval_circle(h, [0.0])[0] - 1.5 / 1.1) < 1e-14

    def test_horner_oracle(self, ex1_w1, grid64):
        # independent Horner evaluation of num and den separately
        def horner(coeffs, z):
            acc = np.zeros_like(z)
            for c in reversed(coeffs):
                acc = acc * z + c
            return acc

        z = np.exp(1j * grid64)
        expected = horner(list(ex1_w1.num), z) / horner(list(ex1_w1.den), z)
        got = eval_circle(ex1_w1, grid64)
        assert np.max(np.abs(got - expected)) < 1e-12

    def test_pole_on_grid_raises(self):
        w = reduce([1.0], [-1.0, 1.0])  # 1/(z-1)
        with pytest.raises(SingularEvaluationError) as err:
            eval_circle(w, [0.0, 0.5])
        assert err.value.angle == 0.0


class TestPolesZeros:
    def test_example2_w1(self, ex2_w1):
        poles, zeros = poles_zeros(ex2_w1)
        np.testing.assert_allclose(sorted(poles.real), [0.2], atol=1e-12)
        np.testing.assert_allclose(sorted(zeros.real), [-2.0], atol=1e-12)

    def test_example1_w1(self, ex1_w1):
        poles, zeros = poles_zeros(ex1_w1)
        np.testing.assert_allclose(sorted(poles.real), [-0.5, 0.2, 0.5], atol=1e-10)
        np.testing.assert_allclose(zeros, np.zeros(3), atol=1e-10)

    def test_constant(self):
        poles, zeros = poles_zeros(reduce([3.0], [1.0]))
        assert len(poles) == 0 and len(zeros) == 0

    def test_root_residual_contract(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            degree = int(rng.integers(1, 9))
            coeffs = rng.uniform(-1, 1, degree + 1)
            coeffs[-1] = rng.uniform(0.5, 1.0)
            monic = coeffs / coeffs[-1]
            roots = ratfun.poly_roots(monic)
            residual = np.abs(np.polynomial.polynomial.polyval(roots, monic))
            assert np.all(residual <= 1e-10 * max(1.0, np.linalg.norm(monic)))


class TestClassify:
    def test_unstable_feedback_channel(self, ex2_w1, ex2_w2):
        h = ex2_w2 / ex2_w1  # (z-2)/(z+2)
        flags = classify(h)
        assert flags.causal and not flags.stable

    def test_example1_minimum_phase(self, ex1_w1):
        flags = classify(ex1_w1)
        assert flags.causal and flags.stable and flags.minimum_phase

    def test_pure_delay(self):
        flags = classify(reduce([1.0], [0.0, 1.0]))
        assert flags.strictly_causal and flags.stable and flags.minimum_phase

    def test_circle_zero_indeterminate(self):
        w = reduce([-1.0, 1.0], [0.5, 1.0])  # zero exactly at 1
        flags = classify(w)
        assert flags.indeterminate and not flags.minimum_phase


class TestClosedLoop:
    def test_open_loop(self):
        h = reduce([0.5, 1.0], [0.1, 1.0])
        loop = closed_loop(reduce([0.0], [1.0]), h)
        assert loop.p.is_one()
        assert loop.t[0][1].is_zero()
        assert_tf_equal(loop.t[1][0], h.num, h.den, atol=1e-12)

    def test_example1_third_pair(self, ex1_w1):
        # forward loop whose sensitivity equals w1 itself (noise map constant)
        f3_num = np.polynomial.polynomial.polymul([-0.05, 0.25, 0.2], [0.1, 1.0])
        f3_den = np.polynomial.polynomial.polymul([0.5, 1.0], [0.0, 0.0, 0.0, 1.0])
        f3 = reduce(f3_num, f3_den)
        h = reduce([0.5, 1.0], [0.1, 1.0])
        loop = closed_loop(f3, h)
        assert loop.internally_stable
        assert_tf_equal(loop.p, ex1_w1.num, ex1_w1.den, atol=1e-9)

    def test_consistency_identity(self, grid64):
        rng = np.random.default_rng(21)
        for _ in range(25):
            f = random_stable_tf(rng, strictly_causal=True)
            h = random_stable_tf(rng)
            try:
                loop = closed_loop(f, h)
            except InvalidInputError:
                continue
            vals = eval_circle(loop.p * (1 - f * h), grid64)
            assert np.max(np.abs(vals - 1.0)) < 1e-10

    def test_neither_strictly_causal_rejected(self):
        h = reduce([0.5, 1.0], [0.1, 1.0])
        with pytest.raises(InvalidInputError):
            closed_loop(h, h)


class TestSpectrum:
    def test_rank_one_determinant(self, ex1_w1, ex1_w2, grid64):
        grid = spectrum(ex1_w1, ex1_w2, grid64)
        assert np.max(np.abs(grid.det_phi)) < 1e-10

    def test_feedback_channel_from_spectrum(self, ex1_w1, ex1_w2, grid64):
        grid = spectrum(ex1_w1, ex1_w2, grid64)
        assert_tf_equal(grid.h, [0.5, 1.0], [0.1, 1.0], atol=1e-10)
        # pointwise ratio agrees with the rational h
        ratio = grid.phi21 / grid.phi11
        np.testing.assert_allclose(ratio, eval_circle(grid.h, grid64), atol=1e-9)

    def test_auto_spectrum_value(self, ex2_w1, ex2_w2):
        grid = spectrum(ex2_w1, ex2_w2, [0.0])
        assert abs(grid.phi11[0] - abs(3.0 / 0.8) ** 2) < 1e-10

    def test_hermitian_symmetry(self, ex1_w1, ex1_w2, grid64):
        grid = spectrum(ex1_w1, ex1_w2, grid64)
        assert np.array_equal(grid.phi12, np.conj(grid.phi21))
        assert np.all(grid.phi11 >= -1e-12)
        assert np.all(grid.phi22 >= -1e-12)


class TestDelayForm:
    def test_round_trip(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            w = random_stable_tf(rng)
            b, a = to_delay_form(w)
            back = from_delay_form(b, a)
            np.testing.assert_allclose(back.num, w.num, atol=1e-12, rtol=0)
            np.testing.assert_allclose(back.den, w.den, atol=1e-12, rtol=0)

    def test_known_conversion(self):
        h = from_delay_form([1.0, 0.5], [1.0, 0.1])
        assert_tf_equal(h, [0.5, 1.0], [0.1, 1.0], atol=1e-15)

    def test_improper_rejected(self):
        with pytest.raises(InvalidInputError):
            to_delay_form(reduce([0.0, 1.0], [1.0]))


class TestJson:
    def test_round_trip(self, ex1_w1):
        doc = to_json_dict(ex1_w1)
        assert set(doc) == {"num", "den"}
        back = from_json_dict(doc)
        np.testing.assert_array_equal(back.num, ex1_w1.num)
        np.testing.assert_array_equal(back.den, ex1_w1.den)

    def test_bad_document(self):
        with pytest.raises(InvalidInputError):
            from_json_dict({"num": [1.0]})
