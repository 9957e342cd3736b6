"""Identification pipeline for rank-deficient pairs of time series.

The data-driven steps are sklearn-style estimators (``fit`` returns ``self``,
fitted attributes carry a trailing underscore, ``get_params`` works for
composition); the exact-arithmetic steps (predictor construction, the
equivalent forward-loop family, inner-factor recovery) are plain functions on
transfer functions, so closed-form results can be reproduced without
Monte-Carlo noise.

Conventions
-----------
The deterministic relation between the two channels is fitted as

    y2(t) = -sum_{k=1..q} a_k y2(t-k) + sum_{k=0..r} b_k y1(t-k)

giving h = B(z^-1)/A(z^-1) with monic A.  ``pin_b0`` moves y1(t) to the left
side, pinning b_0 = 1.  AR/ARMA models use y(t) + sum a_k y(t-k) = e(t) (+ MA
terms), and the fitted innovation model embeds the innovation gain in the
numerator: g = lambda * C(z^-1)/A(z^-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import factorize, ratfun
from .errors import (
    InconsistencyError,
    IndeterminateZeroError,
    InvalidInputError,
    NumericError,
)
from .ratfun import RatTF, Z, Z_INV
from .validation import check_equal_length, check_order, check_samples

LSTSQ_RCOND = 1e-10
BIC_RSS_FLOOR = 1e-24


def _lagged_columns(y, lags, t0, n, sign=1.0):
    if not lags:
        return np.empty((n - t0, 0))
    return np.column_stack([sign * y[t0 - k : n - k] for k in lags])


def _solve_ls(X, target):
    theta, _, rank, _ = np.linalg.lstsq(X, target, rcond=LSTSQ_RCOND)
    resid = target - X @ theta
    rss = float(resid @ resid)
    return theta, rss, int(rank)


# ---------------------------------------------------------------------------
# deterministic relation between the channels


class RelationEstimator(BaseEstimator):
    """Least-squares fit of the deterministic channel relation y2 = h(z) y1.

    The regression is batch-only (one shot over the whole record), which keeps
    the fit consistent whether or not the relation is stable.

    Parameters
    ----------
    q, r : int
        Denominator and numerator orders of the fitted relation.
    pin_b0 : bool
        Pin b_0 = 1 by regressing y2 - y1 on the remaining lags.
    """

    def __init__(self, q=1, r=1, pin_b0=False):
        self.q = q
        self.r = r
        self.pin_b0 = pin_b0

    def fit(self, y1, y2):
        q = check_order(self.q, "q")
        r = check_order(self.r, "r")
        y1 = check_samples(y1, "y1")
        y2 = check_samples(y2, "y2")
        check_equal_length(y1, y2)
        n = len(y1)
        t0 = max(q, r)
        min_n = (q + r + 1) + t0
        if n <= min_n:
            raise InvalidInputError(f"need more than {min_n} samples for orders ({q}, {r}), got {n}")
        b_lags = list(range(1 if self.pin_b0 else 0, r + 1))
        X = np.hstack(
            [
                _lagged_columns(y2, list(range(1, q + 1)), t0, n, sign=-1.0),
                _lagged_columns(y1, b_lags, t0, n),
            ]
        )
        target = y2[t0:] - y1[t0:] if self.pin_b0 else y2[t0:]
        theta, rss, rank = _solve_ls(X, target)
        self.a_ = theta[:q].copy()
        b = theta[q:]
        self.b_ = np.concatenate([[1.0], b]) if self.pin_b0 else b.copy()
        self.h_ = ratfun.from_delay_form(self.b_, np.concatenate([[1.0], self.a_]))
        self.rss_ = rss
        self.n_rows_ = len(target)
        self.residual_rms_ = math.sqrt(rss / len(target))
        self.rank_ = rank
        self.rank_deficient_ = rank < X.shape[1]
        return self

    def to_report(self):
        check_is_fitted(self, "h_")
        return {
            "operation": "fit_relation",
            "orders": {"q": int(self.q), "r": int(self.r)},
            "coefficients": {
                "a": [float(v) for v in self.a_],
                "b": [float(v) for v in self.b_],
            },
            "residual_rms": self.residual_rms_,
            "flags": {"pin_b0": bool(self.pin_b0)},
            "rank_warnings": ["rank-deficient regressor (pseudo-inverse solution)"] if self.rank_deficient_ else [],
        }


def fit_relation(y1, y2, q, r, pin_b0=False) -> RelationEstimator:
    return RelationEstimator(q=q, r=r, pin_b0=pin_b0).fit(y1, y2)


@dataclass(frozen=True)
class BicTable:
    entries: dict
    best: tuple


def _bic_value(rss, rows, n_params):
    rss_c = max(rss, rows * BIC_RSS_FLOOR)
    return rows * math.log(rss_c / rows) + n_params * math.log(rows)


def _bic_scan(fit_one, q_max, r_max):
    entries = {}
    for q in range(q_max + 1):
        for r in range(r_max + 1):
            est = fit_one(q, r)
            entries[(q, r)] = _bic_value(est.rss_, est.n_rows_, q + r + 1)
    best = min(entries, key=lambda qr: (entries[qr], qr[0] + qr[1], qr[0]))
    return BicTable(entries=entries, best=best)


def scan_bic(y1, y2, q_max, r_max, pin_b0=False) -> BicTable:
    """BIC order scan for the channel relation; ties break toward small orders."""
    return _bic_scan(lambda q, r: RelationEstimator(q=q, r=r, pin_b0=pin_b0).fit(y1, y2), q_max, r_max)


# ---------------------------------------------------------------------------
# innovation models for a single channel


class AREstimator(BaseEstimator):
    """Conditional least-squares AR fit: y(t) + sum a_k y(t-k) = e(t)."""

    def __init__(self, order=1):
        self.order = order

    def fit(self, y):
        p = check_order(self.order, "order")
        y = check_samples(y, "y", min_len=3 * p + 1)
        n = len(y)
        X = _lagged_columns(y, list(range(1, p + 1)), p, n, sign=-1.0)
        target = y[p:]
        theta, rss, rank = _solve_ls(X, target)
        self.ar_ = theta.copy()
        self.rss_ = rss
        self.n_rows_ = len(target)
        self.innovation_variance_ = rss / len(target)
        self.g_ = ratfun.from_delay_form([1.0], np.concatenate([[1.0], self.ar_]))
        self.rank_ = rank
        self.rank_deficient_ = rank < X.shape[1]
        self.minimum_phase_ = ratfun.classify(self.g_).minimum_phase
        return self

    def residuals(self, y):
        check_is_fitted(self, "ar_")
        y = check_samples(y, "y")
        return lfilter(np.concatenate([[1.0], self.ar_]), [1.0], y)

    def to_report(self):
        check_is_fitted(self, "ar_")
        return {
            "operation": "fit_ar",
            "orders": {"order": int(self.order)},
            "coefficients": {"ar": [float(v) for v in self.ar_]},
            "residual_rms": math.sqrt(self.innovation_variance_),
            "flags": {"minimum_phase": bool(self.minimum_phase_)},
            "rank_warnings": ["rank-deficient regressor (pseudo-inverse solution)"] if self.rank_deficient_ else [],
        }


def fit_ar(y, order) -> AREstimator:
    return AREstimator(order=order).fit(y)


def _stabilized_ma(c_vec):
    """Return an invertible monic MA vector plus the squared gain it absorbs."""
    z_form = ratfun.poly_trim(np.asarray(c_vec, dtype=float)[::-1])
    stab = factorize.stabilize_poly(z_form)
    changed = len(stab) != len(z_form) or not np.allclose(stab, z_form, rtol=0, atol=1e-12)
    delay = np.zeros(len(c_vec))
    delay[: len(stab)] = stab[::-1]
    gain = delay[0]
    if gain == 0.0:
        raise NumericError("stabilized MA polynomial lost its leading coefficient")
    delay = delay / gain
    return delay, float(gain) ** 2, changed


class ARMAEstimator(BaseEstimator):
    """Hannan-Rissanen ARMA fit with one refinement pass.

    Stage 1 fits a long AR model for residual proxies, stage 2 regresses on
    lagged outputs and lagged proxies, stage 3 re-filters the residuals with
    the stage-2 model and regresses once more.  A non-invertible MA estimate
    is replaced by its spectrally equivalent stable version (the innovation
    variance absorbs the gain), and the fitted innovation model embeds the
    gain in the numerator: g = lambda * C/A.
    """

    def __init__(self, p=1, q=1, refine=True):
        self.p = p
        self.q = q
        self.refine = refine

    def _regress(self, y, eproxy, t0):
        p, q = check_order(self.p, "p"), check_order(self.q, "q")
        n = len(y)
        X = np.hstack(
            [
                _lagged_columns(y, list(range(1, p + 1)), t0, n, sign=-1.0),
                _lagged_columns(eproxy, list(range(1, q + 1)), t0, n),
            ]
        )
        theta, rss, rank = _solve_ls(X, y[t0:])
        return theta[:p], theta[p:], rss, len(y[t0:]), rank, X.shape[1]

    def fit(self, y):
        p = check_order(self.p, "p")
        q = check_order(self.q, "q")
        y = check_samples(y, "y", min_len=10 * (p + q + 1))
        n = len(y)
        self.ma_stabilized_ = False
        if p == 0 and q == 0:
            self.ar_ = np.zeros(0)
            self.ma_ = np.zeros(0)
            self.rss_ = float(y @ y)
            self.n_rows_ = n
            self.innovation_variance_ = self.rss_ / n
            self.rank_ = 0
            self.rank_deficient_ = False
        elif q == 0:
            ar = AREstimator(order=p).fit(y)
            self.ar_, self.ma_ = ar.ar_, np.zeros(0)
            self.rss_, self.n_rows_ = ar.rss_, ar.n_rows_
            self.innovation_variance_ = ar.innovation_variance_
            self.rank_, self.rank_deficient_ = ar.rank_, ar.rank_deficient_
        else:
            n_long = min(20, n // 10)
            long_ar = AREstimator(order=n_long).fit(y)
            eproxy = np.full(n, np.nan)
            eproxy[n_long:] = y[n_long:] - _lagged_columns(y, list(range(1, n_long + 1)), n_long, n) @ long_ar.ar_
            t0 = max(p, n_long + q)
            a, c, rss, rows, rank, cols = self._regress(y, eproxy, t0)
            if self.refine:
                c_vec, gain_sq, changed = _stabilized_ma(np.concatenate([[1.0], c]))
                efull = lfilter(np.concatenate([[1.0], a]), c_vec, y)
                a, c, rss, rows, rank, cols = self._regress(y, efull, max(p, q))
            self.ar_ = a.copy()
            lam_sq = rss / rows
            c_vec, gain_sq, changed = _stabilized_ma(np.concatenate([[1.0], c]))
            if changed:
                self.ma_stabilized_ = True
                lam_sq = lam_sq * gain_sq
                self.ma_ = c_vec[1:].copy()
            else:
                self.ma_ = c.copy()
            self.rss_ = rss
            self.n_rows_ = rows
            self.innovation_variance_ = lam_sq
            self.rank_ = rank
            self.rank_deficient_ = rank < cols
        lam = math.sqrt(self.innovation_variance_)
        self.g_ = ratfun.from_delay_form(
            lam * np.concatenate([[1.0], self.ma_]),
            np.concatenate([[1.0], self.ar_]),
        )
        self.invertible_ = ratfun.classify(self.g_).minimum_phase
        return self

    def to_report(self):
        check_is_fitted(self, "g_")
        return {
            "operation": "fit_arma",
            "orders": {"p": int(self.p), "q": int(self.q)},
            "coefficients": {
                "ar": [float(v) for v in self.ar_],
                "ma": [float(v) for v in self.ma_],
                "innovation_variance": float(self.innovation_variance_),
            },
            "residual_rms": math.sqrt(self.innovation_variance_),
            "flags": {"ma_stabilized": bool(self.ma_stabilized_), "invertible": bool(self.invertible_)},
            "rank_warnings": ["rank-deficient regressor (pseudo-inverse solution)"] if self.rank_deficient_ else [],
        }


def fit_arma(y, p, q, refine=True) -> ARMAEstimator:
    return ARMAEstimator(p=p, q=q, refine=refine).fit(y)


# ---------------------------------------------------------------------------
# exact-arithmetic chain: recovery, predictor, equivalent family


@dataclass(frozen=True)
class RecoveredFactors:
    w1: RatTF
    w2: RatTF
    q1: RatTF


def recover_w1_w2(g1: RatTF, h: RatTF) -> RecoveredFactors:
    """Recover the joint spectral-factor blocks from (g1, h).

    Scalar procedure: the all-pass q1 collects the poles of h*g1 outside the
    unit circle as zeros; w2 = h*g1*q1 is stable by construction and
    w1 = g1*q1.
    """
    flags = ratfun.classify(g1)
    if not (flags.stable and flags.minimum_phase):
        raise InvalidInputError("g1 must be a stable minimum-phase innovation model")
    t = h * g1
    poles = ratfun.poly_roots(t.den)
    outside = []
    for pole in poles:
        if abs(abs(pole) - 1.0) <= ratfun.CIRCLE_TOL:
            raise IndeterminateZeroError(f"h*g1 has a pole {pole:.6g} on the unit circle")
        if abs(pole) > 1.0:
            outside.append(pole)
    q1 = factorize.blaschke(outside)
    w2 = t * q1
    if not ratfun.classify(w2).stable:
        raise InconsistencyError("w2 is unstable after cancellation; inputs are inconsistent with a rank-one model")
    w1 = g1 * q1
    return RecoveredFactors(w1=w1, w2=w2, q1=q1)


@dataclass(frozen=True)
class WienerPair:
    f_plus: RatTF
    k: RatTF
    outer2: RatTF
    inner2: RatTF
    joint_minimum_phase: bool
    reconstruction_error: float


def wiener_predictor(w1: RatTF, w2: RatTF) -> WienerPair:
    """One-step predictor of channel 1 from the strict past of channel 2.

    f_plus = [z * w1 * conj(q2)]_+ / g2 with (g2, q2) the outer-inner split of
    w2, and k = w1 - z^-1 f_plus w2 is the error transfer function, orthogonal
    to the strict past of channel 2.  k is a constant exactly when w2 is
    minimum phase.
    """
    for name, w in (("w1", w1), ("w2", w2)):
        flags = ratfun.classify(w)
        if not (flags.stable and flags.causal):
            raise InvalidInputError(f"{name} must be stable and causal")
    if w2.is_zero():
        raise InvalidInputError("w2 must be nonzero")
    pair2 = factorize.outer_inner(w2)
    try:
        inner1 = factorize.outer_inner(w1).inner
        gcd = factorize.inner_gcd(inner1, pair2.inner)
        joint_min_phase = gcd.num_degree == 0
    except (IndeterminateZeroError, InvalidInputError):
        joint_min_phase = False
    proj = factorize.causal_project(Z * w1 * ratfun.para_conjugate(pair2.inner))
    f_plus = proj / pair2.outer
    flags_f = ratfun.classify(f_plus)
    if not (flags_f.stable and flags_f.causal):
        raise NumericError("predictor transfer function is not stable-causal after cancellation")
    k = w1 - Z_INV * f_plus * w2
    h = w2 / w1
    grid = ratfun.circle_grid(64)
    rhs = (1 - Z_INV * f_plus * h)
    recon = np.max(np.abs(ratfun.eval_circle(w1 * rhs - k, grid)))
    scale = max(1.0, float(np.max(np.abs(ratfun.eval_circle(w1, grid)))))
    if recon > 1e-6 * scale:
        raise NumericError(f"predictor reconstruction residual {recon:.3e} exceeds tolerance")
    return WienerPair(
        f_plus=f_plus,
        k=k,
        outer2=pair2.outer,
        inner2=pair2.inner,
        joint_minimum_phase=joint_min_phase,
        reconstruction_error=float(recon),
    )


@dataclass(frozen=True)
class FamilyMember:
    f: RatTF
    k: RatTF
    internally_stable: bool


def f_family(h: RatTF, w1: RatTF, s: RatTF) -> FamilyMember:
    """One member of the equivalent forward-loop family for a stable h.

    f = s/(1 + s h) for a stable proper s; k = w1/(1 + s h).  Every member
    realizes the same w1 through the loop.
    """
    if not ratfun.classify(h).stable:
        raise InvalidInputError("f_family requires a stable h (the coprime-factor route is unsupported)")
    s_flags = ratfun.classify(s)
    if not (s_flags.stable and s_flags.causal):
        raise InvalidInputError("s must be stable and proper")
    p = 1 + s * h
    if p.is_zero():
        raise InvalidInputError("1 + s*h vanishes identically")
    f = s / p
    k = w1 / p
    entries = (p, p * f, p * h)
    internally_stable = all(ratfun.classify(entry).stable for entry in entries)
    return FamilyMember(f=f, k=k, internally_stable=internally_stable)


# ---------------------------------------------------------------------------
# external-input two-stage scheme


class InputChannelEstimator(BaseEstimator):
    """Stage-1 regression of one output channel on its lags and lagged input.

    Fits y(t) = -sum_{k=1..q} a_k y(t-k) + sum_{k=0..r} b_k u(t-1-k) and
    exposes the strictly causal input map f = z^-1 B(z^-1)/A(z^-1).
    """

    def __init__(self, q=1, r=1):
        self.q = q
        self.r = r

    def fit(self, y, u):
        q = check_order(self.q, "q")
        r = check_order(self.r, "r")
        y = check_samples(y, "y")
        u = check_samples(u, "u")
        check_equal_length(y, u, "y", "u")
        n = len(y)
        t0 = max(q, r + 1)
        if n <= t0 + (q + r + 1):
            raise InvalidInputError(f"need more than {t0 + q + r + 1} samples for orders ({q}, {r})")
        X = np.hstack(
            [
                _lagged_columns(y, list(range(1, q + 1)), t0, n, sign=-1.0),
                _lagged_columns(u, list(range(1, r + 2)), t0, n),
            ]
        )
        theta, rss, rank = _solve_ls(X, y[t0:])
        self.a_ = theta[:q].copy()
        self.b_ = theta[q:].copy()
        self.f_ = ratfun.from_delay_form(self.b_, np.concatenate([[1.0], self.a_])) * Z_INV
        self.rss_ = rss
        self.n_rows_ = len(y[t0:])
        self.residual_rms_ = math.sqrt(rss / self.n_rows_)
        self.rank_ = rank
        self.rank_deficient_ = rank < X.shape[1]
        from .simulate import filter_series  # local import to avoid a cycle

        self.residual_series_ = y - filter_series(self.f_, u).samples
        return self

    def to_report(self):
        check_is_fitted(self, "f_")
        return {
            "operation": "fit_input_channel",
            "orders": {"q": int(self.q), "r": int(self.r)},
            "coefficients": {
                "a": [float(v) for v in self.a_],
                "b": [float(v) for v in self.b_],
            },
            "residual_rms": self.residual_rms_,
            "flags": {},
            "rank_warnings": ["low input excitation: rank-deficient regressor"] if self.rank_deficient_ else [],
        }


def scan_bic_input(y, u, q_max, r_max) -> BicTable:
    """BIC order scan for the stage-1 input regression of one channel."""
    return _bic_scan(lambda q, r: InputChannelEstimator(q=q, r=r).fit(y, u), q_max, r_max)


class InputModelEstimator(BaseEstimator):
    """Two-stage identification of y_i = f_i u + k_i e with shared scalar noise.

    Stage 1 regresses each channel on its own lags and the lagged input
    (orders given or chosen per channel by BIC) and forms the residual pair;
    stage 2 fits the deterministic relation between the residuals, an ARMA
    innovation model for the first residual channel, and k2 = h * k1.
    """

    def __init__(
        self,
        stage1_orders="bic",
        q_max=3,
        r_max=5,
        relation_orders=(2, 2),
        k1_orders=(2, 2),
        pin_b0=False,
    ):
        self.stage1_orders = stage1_orders
        self.q_max = q_max
        self.r_max = r_max
        self.relation_orders = relation_orders
        self.k1_orders = k1_orders
        self.pin_b0 = pin_b0

    def fit(self, y1, y2, u):
        y1 = check_samples(y1, "y1")
        y2 = check_samples(y2, "y2")
        u = check_samples(u, "u")
        check_equal_length(y1, y2)
        check_equal_length(y1, u, "y1", "u")
        if self.stage1_orders == "bic":
            orders = [scan_bic_input(y, u, self.q_max, self.r_max).best for y in (y1, y2)]
        else:
            orders = [tuple(o) for o in self.stage1_orders]
        self.stage1_orders_ = orders
        self.channel1_ = InputChannelEstimator(*orders[0]).fit(y1, u)
        self.channel2_ = InputChannelEstimator(*orders[1]).fit(y2, u)
        self.f1_, self.f2_ = self.channel1_.f_, self.channel2_.f_
        self.ytilde1_ = self.channel1_.residual_series_
        self.ytilde2_ = self.channel2_.residual_series_
        self.relation_ = RelationEstimator(
            q=self.relation_orders[0], r=self.relation_orders[1], pin_b0=self.pin_b0
        ).fit(self.ytilde1_, self.ytilde2_)
        self.h_ = self.relation_.h_
        self.k1_model_ = ARMAEstimator(p=self.k1_orders[0], q=self.k1_orders[1]).fit(self.ytilde1_)
        self.k1_ = self.k1_model_.g_
        self.k2_ = self.h_ * self.k1_
        return self

    def to_report(self):
        check_is_fitted(self, "h_")
        return {
            "operation": "identify_with_input",
            "orders": {
                "stage1": [list(o) for o in self.stage1_orders_],
                "relation": list(self.relation_orders),
                "k1": list(self.k1_orders),
            },
            "coefficients": {
                "f1_a": [float(v) for v in self.channel1_.a_],
                "f1_b": [float(v) for v in self.channel1_.b_],
                "f2_a": [float(v) for v in self.channel2_.a_],
                "f2_b": [float(v) for v in self.channel2_.b_],
                "h_a": [float(v) for v in self.relation_.a_],
                "h_b": [float(v) for v in self.relation_.b_],
                "k1_ar": [float(v) for v in self.k1_model_.ar_],
                "k1_ma": [float(v) for v in self.k1_model_.ma_],
                "k1_variance": float(self.k1_model_.innovation_variance_),
            },
            "residual_rms": self.relation_.residual_rms_,
            "flags": {"ma_stabilized": bool(self.k1_model_.ma_stabilized_)},
            "rank_warnings": (
                self.channel1_.to_report()["rank_warnings"]
                + self.channel2_.to_report()["rank_warnings"]
                + self.relation_.to_report()["rank_warnings"]
            ),
        }


def identify_with_input(y1, y2, u, orders="bic", **kwargs) -> InputModelEstimator:
    return InputModelEstimator(stage1_orders=orders, **kwargs).fit(y1, y2, u)
