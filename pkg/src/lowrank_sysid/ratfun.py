"""Rational transfer-function algebra over real coefficients.

Scalar discrete-time transfer functions are stored as ratios of real
polynomials in the forward shift z, with coefficient arrays ascending in
powers of z (``coeffs[k]`` multiplies ``z**k``).  Canonical form: common
numerator/denominator roots cancelled within a relative tolerance and the
denominator made monic.

Delay-operator parameter vectors (polynomials in z^-1, the form used by the
estimators) convert to and from this basis by degree reversal; see
:func:`from_delay_form` / :func:`to_delay_form`.

Classification against the unit circle uses a guard band of half-width
``CIRCLE_TOL``: roots inside the band make the stable/minimum-phase flags
indeterminate, and the factorization routines reject such functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    InvalidInputError,
    NumericError,
    SingularEvaluationError,
    SingularLoopError,
)

#: relative tolerance for treating two roots as a common (cancelling) pair
CANCEL_TOL = 1e-8
#: half-width of the unit-circle indeterminacy band
CIRCLE_TOL = 1e-9
#: relative tolerance for trimming trailing coefficients
TRIM_REL = 1e-12

_IMAG_TOL = 1e-9


# ---------------------------------------------------------------------------
# polynomial helpers (ascending coefficient arrays)


def as_poly(coeffs, name="poly"):
    """Validate and trim a coefficient sequence; returns a fresh float array."""
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name}: expected a non-empty 1-D coefficient sequence")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: coefficients must be finite")
    return poly_trim(arr)


def poly_trim(arr, rel=TRIM_REL):
    """Drop trailing coefficients below ``rel * max|coeff|``."""
    scale = np.max(np.abs(arr))
    if scale == 0.0:
        return np.zeros(1)
    keep = len(arr)
    while keep > 1 and abs(arr[keep - 1]) <= rel * scale:
        keep -= 1
    return np.array(arr[:keep], dtype=float)


def poly_is_zero(arr):
    return len(arr) == 1 and arr[0] == 0.0


def poly_degree(arr):
    """Degree of a trimmed coefficient array (0 for the zero polynomial)."""
    return len(arr) - 1


def poly_roots(arr):
    """Roots via companion-matrix eigenvalues, on the monic-scaled polynomial."""
    arr = poly_trim(np.asarray(arr, dtype=float))
    if len(arr) <= 1:
        return np.array([], dtype=complex)
    try:
        roots = npoly.polyroots(arr)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericError(f"root finding failed: {exc}") from exc
    monic = arr / arr[-1]
    residual = np.abs(npoly.polyval(roots, monic))
    # scale by the evaluated term magnitudes so large roots are judged fairly
    powers = np.abs(roots[:, None]) ** np.arange(len(monic))[None, :]
    scale = powers @ np.abs(monic)
    if np.any(residual > 1e-6 * np.maximum(scale, 1.0)):  # pragma: no cover - defensive
        raise NumericError("root finder did not converge: residual %.3e" % residual.max())
    return np.asarray(roots, dtype=complex)


def real_cast(arr, rel=1e-9):
    """Drop imaginary parts, asserting they are negligible."""
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        scale = max(1.0, float(np.max(np.abs(arr))) if arr.size else 1.0)
        if np.max(np.abs(arr.imag)) > rel * scale:
            raise NumericError("expected a real result, imaginary residue %.3e" % np.max(np.abs(arr.imag)))
        return np.array(arr.real, dtype=float)
    return np.array(arr, dtype=float)


def _deflate(coeffs, roots):
    """Divide out linear factors (z - r) by synthetic division, then re-realify.

    Root estimates for ill-conditioned clusters are only conjugate-symmetric
    to about the cancellation tolerance, so the imaginary residue bound is
    correspondingly loose.
    """
    work = np.asarray(coeffs, dtype=complex)
    for r in roots:
        desc = work[::-1]
        out = np.empty(len(desc) - 1, dtype=complex)
        acc = desc[0]
        out[0] = acc
        for k in range(1, len(desc) - 1):
            acc = desc[k] + r * acc
            out[k] = acc
        work = out[::-1]
    return real_cast(work, rel=1e-7)


def _match_common_roots(roots_num, roots_den, tol=CANCEL_TOL):
    """Greedy pairing of nearly equal roots; returns (matched_num, matched_den)."""
    used = np.zeros(len(roots_den), dtype=bool)
    matched_n, matched_d = [], []
    order = sorted(range(len(roots_num)), key=lambda i: (-abs(roots_num[i]), roots_num[i].real, roots_num[i].imag))
    for i in order:
        rn = roots_num[i]
        best, best_dist = -1, np.inf
        for j in range(len(roots_den)):
            if used[j]:
                continue
            dist = abs(rn - roots_den[j])
            if dist < best_dist:
                best, best_dist = j, dist
        if best >= 0 and best_dist <= tol * max(1.0, abs(rn)):
            used[best] = True
            matched_n.append(rn)
            matched_d.append(roots_den[best])
    return matched_n, matched_d


def _cancel_points(num, den, matched_n, matched_d):
    """Pick one deflation point per matched pair, the same for both sides.

    A root estimate from an ill-conditioned cluster (e.g. a double root) can
    be off by ~sqrt(eps); deflating each side at its own estimate then leaves
    that error behind.  Deflating both sides at the estimate with the smaller
    polynomial residual keeps structurally exact cancellations exact.
    """
    nn = max(1.0, float(np.max(np.abs(num))))
    nd = max(1.0, float(np.max(np.abs(den))))
    points = []
    for rn, rd in zip(matched_n, matched_d):
        score_n = max(abs(npoly.polyval(rn, num)) / nn, abs(npoly.polyval(rn, den)) / nd)
        score_d = max(abs(npoly.polyval(rd, num)) / nn, abs(npoly.polyval(rd, den)) / nd)
        points.append(rn if score_n <= score_d else rd)
    return points


def group_conjugate_roots(roots, imag_tol=_IMAG_TOL):
    """Split a conjugate-closed root set into real roots and Im>0 pair reps."""
    reals, pairs = [], []
    remaining = list(roots)
    remaining.sort(key=lambda r: (r.real, abs(r.imag)))
    while remaining:
        r = remaining.pop(0)
        if abs(r.imag) <= imag_tol * max(1.0, abs(r)):
            reals.append(float(r.real))
            continue
        # find the conjugate partner
        best, best_dist = -1, np.inf
        for j, s in enumerate(remaining):
            dist = abs(np.conj(r) - s)
            if dist < best_dist:
                best, best_dist = j, dist
        if best < 0 or best_dist > 1e-6 * max(1.0, abs(r)):
            raise NumericError("unpaired complex root %s in a real polynomial" % r)
        remaining.pop(best)
        pairs.append(complex(r.real, abs(r.imag)))
    return reals, pairs


def poly_from_root_groups(reals, pairs, lead=1.0):
    """Real polynomial with the given real roots and conjugate pairs (ascending)."""
    out = np.array([float(lead)])
    for a in reals:
        out = npoly.polymul(out, [-a, 1.0])
    for c in pairs:
        out = npoly.polymul(out, [abs(c) ** 2, -2.0 * c.real, 1.0])
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# the transfer-function value type


@dataclass(frozen=True, eq=False)
class RatTF:
    """Canonical scalar rational transfer function num(z)/den(z)."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        self.num.setflags(write=False)
        self.den.setflags(write=False)

    # --- structure -------------------------------------------------------
    @property
    def num_degree(self):
        return poly_degree(self.num)

    @property
    def den_degree(self):
        return poly_degree(self.den)

    def is_zero(self):
        return poly_is_zero(self.num)

    def is_one(self):
        return len(self.num) == 1 and len(self.den) == 1 and self.num[0] == 1.0

    def constant_value(self):
        """Value when the function is a constant, else None."""
        if len(self.num) == 1 and len(self.den) == 1:
            return float(self.num[0] / self.den[0])
        return None

    # --- arithmetic --------------------------------------------------------
    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return reduce(
            npoly.polyadd(npoly.polymul(self.num, other.den), npoly.polymul(other.num, self.den)),
            npoly.polymul(self.den, other.den),
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __neg__(self):
        return reduce(-np.asarray(self.num), self.den)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return reduce(npoly.polymul(self.num, other.num), npoly.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero():
            raise InvalidInputError("division by the zero transfer function")
        return reduce(npoly.polymul(self.num, other.den), npoly.polymul(self.den, other.num))

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __call__(self, z):
        """Raw evaluation at complex points (no pole proximity check)."""
        z = np.asarray(z, dtype=complex)
        return npoly.polyval(z, self.num) / npoly.polyval(z, self.den)

    def at_infinity(self):
        """Limit for z -> inf (inf if improper)."""
        if self.num_degree > self.den_degree:
            return np.inf
        if self.num_degree < self.den_degree:
            return 0.0
        return float(self.num[-1] / self.den[-1])

    def __repr__(self):
        return f"RatTF(num={np.array2string(self.num, separator=', ')}, den={np.array2string(self.den, separator=', ')})"


def _coerce(value):
    if isinstance(value, RatTF):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return reduce([float(value)], [1.0])
    return NotImplemented


ONE = None  # populated below
Z = None  # the shift z
Z_INV = None  # one-step delay 1/z


# ---------------------------------------------------------------------------
# construction and canonicalization


def reduce(num, den) -> RatTF:
    """Canonical transfer function equal to num/den wherever defined.

    Common roots within ``CANCEL_TOL`` are cancelled and the denominator is
    made monic.  Raises for a zero denominator.
    """
    n = as_poly(num, "num")
    d = as_poly(den, "den")
    if poly_is_zero(d):
        raise InvalidInputError("zero denominator")
    if poly_is_zero(n):
        return RatTF(np.zeros(1), np.ones(1))
    # iterate cancellation to a fixpoint: estimates from ill-conditioned root
    # clusters may miss a copy on the first pass but are simple (accurate)
    # roots on the next
    while len(n) > 1 and len(d) > 1:
        rn = poly_roots(n)
        rd = poly_roots(d)
        matched_n, matched_d = _match_common_roots(rn, rd)
        if not matched_n:
            break
        points = _cancel_points(n, d, matched_n, matched_d)
        n = poly_trim(_deflate(n, points))
        d = poly_trim(_deflate(d, points))
    lead = d[-1]
    n = n / lead
    d = d / lead
    d[-1] = 1.0  # exact monic
    return RatTF(poly_trim(n), d)


def constant(value) -> RatTF:
    return reduce([float(value)], [1.0])


def from_delay_form(num_delay, den_delay) -> RatTF:
    """Build a RatTF from polynomials in the delay operator z^-1.

    ``num_delay[k]`` multiplies z^-k.  The conversion multiplies both sides by
    z^L with L the larger degree (degree reversal with an explicit shift).
    """
    b = as_poly(num_delay, "num_delay")
    a = as_poly(den_delay, "den_delay")
    span = max(len(b), len(a))
    num = np.zeros(span)
    den = np.zeros(span)
    num[span - len(b):] = b[::-1]
    den[span - len(a):] = a[::-1]
    return reduce(num, den)


def to_delay_form(w: RatTF):
    """Delay-operator coefficient vectors (b, a) with ``a[0] = 1``.

    Requires a causal function; ``b[k]``/``a[k]`` multiply z^-k in
    B(z^-1)/A(z^-1) = w(z).
    """
    if w.num_degree > w.den_degree:
        raise InvalidInputError("delay form requires a causal (proper) function")
    d = w.den_degree
    padded = np.zeros(d + 1)
    padded[: len(w.num)] = w.num
    b = padded[::-1].copy()
    a = np.asarray(w.den)[::-1].copy()
    return poly_trim(b), poly_trim(a)


# ---------------------------------------------------------------------------
# operations


def arith(lhs: RatTF, rhs: RatTF, op: str) -> RatTF:
    """Pointwise arithmetic in canonical form; op in {add, sub, mul, div}."""
    table = {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": lambda a, b: a * b,
        "div": lambda a, b: a / b,
    }
    if op not in table:
        raise InvalidInputError(f"unknown operation {op!r}")
    return table[op](lhs, rhs)


def para_conjugate(w: RatTF) -> RatTF:
    """The substitution z -> 1/z in canonical form.

    For real coefficients this evaluates on the unit circle to the complex
    conjugate of w.
    """
    span = max(len(w.num), len(w.den))
    num = np.zeros(span)
    den = np.zeros(span)
    num[: len(w.num)] = w.num
    den[: len(w.den)] = w.den
    return reduce(num[::-1], den[::-1])


def eval_circle(w: RatTF, angles):
    """Evaluate at z = exp(i*theta) for each angle; errors on a pole."""
    theta = np.atleast_1d(np.asarray(angles, dtype=float))
    z = np.exp(1j * theta)
    dv = npoly.polyval(z, w.den)
    guard = 1e-10 * max(1.0, float(np.sum(np.abs(w.den))))
    bad = np.abs(dv) <= guard
    if np.any(bad):
        angle = float(theta[np.argmax(bad)])
        raise SingularEvaluationError(f"pole on the evaluation grid at angle {angle:.6g}", angle=angle)
    return npoly.polyval(z, w.num) / dv


def poles_zeros(w: RatTF):
    """(poles, zeros) of a canonical nonzero function."""
    if w.is_zero():
        raise InvalidInputError("the zero transfer function has no pole/zero structure")
    return poly_roots(w.den), poly_roots(w.num)


@dataclass(frozen=True)
class TFClass:
    causal: bool
    strictly_causal: bool
    stable: bool
    minimum_phase: bool
    indeterminate: bool


def classify(w: RatTF) -> TFClass:
    """Causality/stability/minimum-phase flags with a circle guard band."""
    causal = w.num_degree <= w.den_degree or w.is_zero()
    strictly = w.is_zero() or w.num_degree < w.den_degree
    poles = poly_roots(w.den)
    zeros = poly_roots(w.num) if not w.is_zero() else np.array([])
    pole_mag = np.abs(poles) if len(poles) else np.zeros(0)
    zero_mag = np.abs(zeros) if len(zeros) else np.zeros(0)
    band = lambda mags: bool(np.any(np.abs(mags - 1.0) <= CIRCLE_TOL)) if len(mags) else False
    indeterminate = band(pole_mag) or band(zero_mag)
    stable = bool(np.all(pole_mag < 1.0 - CIRCLE_TOL)) if len(pole_mag) else True
    min_phase = (
        stable
        and not w.is_zero()
        and (bool(np.all(zero_mag < 1.0 - CIRCLE_TOL)) if len(zero_mag) else True)
        and not band(zero_mag)
    )
    return TFClass(causal, strictly, stable, min_phase, indeterminate)


@dataclass(frozen=True)
class ClosedLoop:
    p: RatTF
    q: RatTF
    t: tuple
    internally_stable: bool


def closed_loop(f: RatTF, h: RatTF) -> ClosedLoop:
    """Loop transfer matrix for the pair (forward f, feedback h).

    Scalar case: P = Q = 1/(1 - f*h); T = [[P, P*f], [P*h, P]].  Well posed
    only when at least one of f, h is strictly causal.
    """
    cf, ch = classify(f), classify(h)
    if not (cf.strictly_causal or ch.strictly_causal):
        raise InvalidInputError("ill-posed loop: neither transfer function is strictly causal")
    denom = 1 - f * h
    if denom.is_zero():
        raise SingularLoopError("1 - f*h vanishes identically")
    p = 1 / denom
    t = ((p, p * f), (p * h, p))
    stable = all(classify(entry).stable for row in t for entry in row)
    return ClosedLoop(p=p, q=p, t=t, internally_stable=stable)


@dataclass(frozen=True)
class SpectrumGrid:
    angles: np.ndarray
    phi11: np.ndarray
    phi12: np.ndarray
    phi21: np.ndarray
    phi22: np.ndarray
    det_phi: np.ndarray
    h: RatTF


def spectrum(w1: RatTF, w2: RatTF, angles) -> SpectrumGrid:
    """Joint 2x2 spectrum of the rank-one process (w1, w2) on a grid.

    phi_ij(theta) = w_i(e^{i theta}) * conj(w_j(e^{i theta})); the rational
    feedback-channel function h = w2/w1 is returned alongside.
    """
    if w1.is_zero():
        raise InvalidInputError("w1 must be nonzero (full-rank first channel)")
    for name, w in (("w1", w1), ("w2", w2)):
        flags = classify(w)
        if not (flags.stable and flags.causal):
            raise InvalidInputError(f"{name} must be stable and causal")
    theta = np.atleast_1d(np.asarray(angles, dtype=float))
    v1 = eval_circle(w1, theta)
    v2 = eval_circle(w2, theta)
    phi11 = np.abs(v1) ** 2
    phi22 = np.abs(v2) ** 2
    phi21 = v2 * np.conj(v1)
    phi12 = np.conj(phi21)
    det = phi11 * phi22 - phi12 * phi21
    return SpectrumGrid(theta, phi11, phi12, phi21, phi22, det, h=w2 / w1)


def circle_grid(count, upper=np.pi):
    """Uniform angle grid on [0, upper]."""
    return np.linspace(0.0, upper, count)


# ---------------------------------------------------------------------------
# serialization


def to_json_dict(w: RatTF):
    return {"num": [float(c) for c in w.num], "den": [float(c) for c in w.den]}


def from_json_dict(obj) -> RatTF:
    if not isinstance(obj, dict) or "num" not in obj or "den" not in obj:
        raise InvalidInputError('transfer function JSON must be {"num": [...], "den": [...]}')
    return reduce(obj["num"], obj["den"])


ONE = reduce([1.0], [1.0])
Z = RatTF(np.array([0.0, 1.0]), np.array([1.0]))
Z_INV = RatTF(np.array([1.0]), np.array([0.0, 1.0]))
