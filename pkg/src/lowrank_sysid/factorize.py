"""Structural factorizations of scalar rational transfer functions.

Outer-inner split, greatest common inner divisor, causal projection, and
spectrally equivalent polynomial stabilization.  All routines reject roots
inside the unit-circle guard band (``ratfun.CIRCLE_TOL``) instead of guessing
a classification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import ratfun
from .errors import (
    IndeterminateZeroError,
    InvalidInputError,
    SingularProjectionError,
)
from .ratfun import CANCEL_TOL, CIRCLE_TOL, RatTF

_INNER_GRID = ratfun.circle_grid(128)


@dataclass(frozen=True)
class OuterInnerPair:
    outer: RatTF
    inner: RatTF


def _split_by_circle(roots, context):
    """Partition roots into (inside, outside); roots in the band are errors."""
    inside, outside = [], []
    for r in roots:
        m = abs(r)
        if abs(m - 1.0) <= CIRCLE_TOL:
            raise IndeterminateZeroError(f"{context}: root {r:.6g} lies on the unit circle (within tolerance)")
        (inside if m < 1.0 else outside).append(r)
    return inside, outside


def blaschke(zeros_outside) -> RatTF:
    """All-pass function with the given zeros (all outside the unit circle).

    Real coefficients (conjugate pairs reflected together); normalized to a
    positive value at z = 1.  An empty zero set gives the constant 1.
    """
    zeros_outside = list(zeros_outside)
    if not zeros_outside:
        return ratfun.ONE
    reals, pairs = ratfun.group_conjugate_roots(np.asarray(zeros_outside, dtype=complex))
    num = np.array([1.0])
    den = np.array([1.0])
    for a in reals:
        if abs(abs(a) - 1.0) <= CIRCLE_TOL:
            raise IndeterminateZeroError(f"all-pass zero {a:.6g} lies on the unit circle")
        num = npoly.polymul(num, [-a, 1.0])
        den = npoly.polymul(den, [-1.0, a])
    for c in pairs:
        if abs(abs(c) - 1.0) <= CIRCLE_TOL:
            raise IndeterminateZeroError(f"all-pass zero {c:.6g} lies on the unit circle")
        num = npoly.polymul(num, [abs(c) ** 2, -2.0 * c.real, 1.0])
        den = npoly.polymul(den, [1.0, -2.0 * c.real, abs(c) ** 2])
    q = ratfun.reduce(num, den)
    if float(q(1.0).real) < 0.0:
        q = ratfun.reduce(-np.asarray(q.num), q.den)
    return q


def outer_inner(w: RatTF) -> OuterInnerPair:
    """Factor w = outer * inner with |inner| = 1 on the circle.

    Zeros outside the circle move to their reciprocal-conjugate locations in
    the outer factor; the inner factor is the corresponding real-coefficient
    all-pass, positive at z = 1.
    """
    if w.is_zero():
        raise InvalidInputError("cannot factor the zero transfer function")
    flags = ratfun.classify(w)
    if flags.indeterminate:
        raise IndeterminateZeroError("outer_inner: root on the unit circle (within tolerance)")
    if not (flags.stable and flags.causal):
        raise InvalidInputError("outer_inner requires a stable causal function")
    zeros = ratfun.poly_roots(w.num)
    _, outside = _split_by_circle(zeros, "outer_inner")
    if not outside:
        return OuterInnerPair(outer=w, inner=ratfun.ONE)
    q = blaschke(outside)
    num_inside = ratfun.poly_trim(ratfun._deflate(w.num, outside))
    outer = ratfun.reduce(npoly.polymul(num_inside, q.den), w.den)
    # the canonical rescaling inside blaschke leaves a constant factor;
    # w / (outer * q) is that constant, so one probe restores outer * q == w
    probe = 1.0
    scale = float((w(probe) / (outer(probe) * q(probe))).real)
    outer = outer * scale
    return OuterInnerPair(outer=outer, inner=q)


def _check_inner(q: RatTF, name, tol=1e-8):
    vals = np.abs(ratfun.eval_circle(q, _INNER_GRID))
    if np.max(np.abs(vals - 1.0)) > tol:
        raise InvalidInputError(f"{name} is not inner: modulus deviates from 1 by {np.max(np.abs(vals - 1.0)):.3e}")


def inner_gcd(qa: RatTF, qb: RatTF) -> RatTF:
    """Greatest common inner divisor of two inner functions.

    The all-pass over zeros common to both (multiplicity = min); inner
    functions are coprime exactly when the result is 1.
    """
    _check_inner(qa, "qa")
    _check_inner(qb, "qb")
    za = list(ratfun.poly_roots(qa.num))
    zb = list(ratfun.poly_roots(qb.num))
    common = []
    used = [False] * len(zb)
    for r in sorted(za, key=lambda c: (c.real, c.imag)):
        best, best_dist = -1, np.inf
        for j, s in enumerate(zb):
            if used[j]:
                continue
            dist = abs(r - s)
            if dist < best_dist:
                best, best_dist = j, dist
        if best >= 0 and best_dist <= CANCEL_TOL * max(1.0, abs(r)):
            used[best] = True
            common.append(r)
    return blaschke(common)


def split_causal(w: RatTF):
    """Split w into (causal, anticausal) parts of its circle Laurent expansion.

    Partial-fraction split by pole location: terms with poles inside the
    circle are causal; terms with poles outside contribute only their
    constant (value at z = 0) to the causal side; powers z^k with k >= 1 from
    an improper part are strictly anticausal.  Both parts are exact rational
    functions (no truncated series), the anticausal one with all poles
    strictly outside the circle and zero constant term.
    """
    poles = ratfun.poly_roots(w.den)
    for p in poles:
        if abs(abs(p) - 1.0) <= CIRCLE_TOL:
            raise SingularProjectionError(f"pole {p:.6g} on the unit circle")
    zero = ratfun.reduce([0.0], [1.0])
    if w.num_degree >= w.den_degree and w.den_degree >= 1:
        quo, rem = npoly.polydiv(w.num, w.den)
        quo = ratfun.poly_trim(quo)
        rem = ratfun.poly_trim(rem)
    elif w.den_degree == 0:
        scaled = np.asarray(w.num) / w.den[0]
        tail = scaled.copy()
        tail[0] = 0.0
        return ratfun.constant(scaled[0]), ratfun.reduce(tail, [1.0])
    else:
        quo, rem = np.zeros(1), np.asarray(w.num)
    tail = quo.copy()
    tail[0] = 0.0
    anti = ratfun.reduce(tail, [1.0])
    const = float(quo[0])
    inside, outside = _split_by_circle(poles, "causal_project")
    if not inside:
        if not ratfun.poly_is_zero(ratfun.poly_trim(rem)):
            r_out = ratfun.reduce(rem, w.den)
            c_out = float(r_out(0.0).real)
            const += c_out
            anti = anti + (r_out - c_out)
        return ratfun.constant(const), anti
    if not outside:
        causal = ratfun.reduce(npoly.polyadd(rem, const * np.asarray(w.den)), w.den)
        return causal, anti
    den_in = ratfun.poly_from_root_groups(*ratfun.group_conjugate_roots(np.asarray(inside)))
    den_out = ratfun.poly_from_root_groups(*ratfun.group_conjugate_roots(np.asarray(outside)))
    d_in, d_out = ratfun.poly_degree(den_in), ratfun.poly_degree(den_out)
    size = d_in + d_out
    system = np.zeros((size, size))
    for j in range(d_in):
        col = npoly.polymul(np.eye(1, j + 1, j).ravel(), den_out)
        system[: len(col), j] = col
    for j in range(d_out):
        col = npoly.polymul(np.eye(1, j + 1, j).ravel(), den_in)
        system[: len(col), d_in + j] = col
    rhs = np.zeros(size)
    rhs[: len(rem)] = rem
    solution = np.linalg.solve(system, rhs)
    num_in = solution[:d_in]
    num_out = solution[d_in:]
    c_out = float(num_out[0] / den_out[0])
    const += c_out
    causal = ratfun.reduce(npoly.polyadd(num_in, const * den_in), den_in)
    anti = anti + (ratfun.reduce(num_out, den_out) - c_out)
    return causal, anti


def causal_project(w: RatTF) -> RatTF:
    """Causal part of the Laurent expansion of w on the unit circle."""
    return split_causal(w)[0]


def stabilize_poly(coeffs):
    """Spectrally equivalent stable polynomial (roots reflected into the disc).

    Each root a with |a| > 1 moves to 1/conj(a) with the gain scaled by |a|
    (pairs together, keeping real coefficients); |output| = |input| on the
    unit circle.  A stable input is returned unchanged.
    """
    arr = ratfun.as_poly(coeffs, "coeffs")
    if ratfun.poly_is_zero(arr):
        raise InvalidInputError("cannot stabilize the zero polynomial")
    roots = ratfun.poly_roots(arr)
    inside, outside = _split_by_circle(roots, "stabilize_poly")
    if not outside:
        return arr
    gain = float(arr[-1])
    new_roots = list(inside)
    for r in outside:
        new_roots.append(1.0 / np.conj(r))
        gain *= abs(r)
    reals, pairs = ratfun.group_conjugate_roots(np.asarray(new_roots)) if new_roots else ([], [])
    return ratfun.poly_from_root_groups(reals, pairs, lead=gain)
