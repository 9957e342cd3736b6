"""Seeded stochastic simulation of rank-one vector processes.

White-noise generation, rational filtering through the difference equation
(zero initial conditions), and the scenario generators for the rank-deficient
and external-input models.  Everything is pure given (config, seed), so
Monte-Carlo runs can execute in parallel workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import ratfun
from .errors import ConfigError, InvalidInputError, NumericError
from .ratfun import RatTF
from .validation import check_samples

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class TimeSeries:
    """Finite real sample sequence with a channel label."""

    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", arr)
        arr.setflags(write=False)

    @property
    def n(self):
        return len(self.samples)


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian white-noise description: variance and a 64-bit seed."""

    variance: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise InvalidInputError("noise variance must be nonnegative")


def mix_seed(master_seed: int, run_index: int) -> int:
    """Derive a child seed for run ``run_index`` from a master seed.

    SplitMix64 finalizer applied to ``master + (run_index + 1) * golden``;
    distinct run indices give statistically independent streams and the
    derivation is bit-stable across platforms.
    """
    x = (int(master_seed) + (int(run_index) + 1) * _GOLDEN) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def gen_noise(n: int, spec: NoiseSpec) -> TimeSeries:
    """n i.i.d. Gaussian(0, variance) samples; bit-reproducible per (spec, n)."""
    if n < 1:
        raise InvalidInputError("need at least one sample")
    rng = np.random.default_rng(spec.seed)
    samples = rng.standard_normal(n) * np.sqrt(spec.variance)
    return TimeSeries(samples, label="e")


def filter_series(w: RatTF, u) -> TimeSeries:
    """Response of w to input u through its difference equation, zero pre-history."""
    flags = ratfun.classify(w)
    if not flags.causal:
        raise InvalidInputError("filtering requires a causal transfer function")
    data = check_samples(u, "u")
    b, a = ratfun.to_delay_form(w)
    out = lfilter(b, a, data)
    if not np.all(np.isfinite(out)):
        raise NumericError("filter output is not finite (unstable transfer function on long input)")
    label = getattr(u, "label", "")
    return TimeSeries(out, label=label)


def sim_low_rank(w1: RatTF, w2: RatTF, n: int, spec: NoiseSpec, burn_in: int = 500):
    """Simulate the rank-one pair y_i = w_i e from one shared noise path.

    The first ``burn_in`` samples are discarded identically from both
    channels, removing the zero-initial-condition transient.
    """
    if n < 1:
        raise InvalidInputError("need at least one retained sample")
    for name, w in (("w1", w1), ("w2", w2)):
        flags = ratfun.classify(w)
        if not (flags.stable and flags.causal):
            raise InvalidInputError(f"{name} must be stable and causal for simulation")
    e = gen_noise(burn_in + n, spec)
    y1 = filter_series(w1, e).samples[burn_in:]
    y2 = filter_series(w2, e).samples[burn_in:]
    return TimeSeries(y1, label="y1"), TimeSeries(y2, label="y2")


def sim_with_input(
    f1: RatTF,
    f2: RatTF,
    k1: RatTF,
    k2: RatTF,
    n: int,
    u_spec: NoiseSpec,
    e_spec: NoiseSpec,
    burn_in: int = 500,
):
    """Simulate y_i = f_i u + k_i e with independent white inputs u and e."""
    if u_spec.seed == e_spec.seed:
        raise ConfigError(["noise.u/e: u and e must use distinct seeds (independence)"])
    for name, w in (("f1", f1), ("f2", f2)):
        flags = ratfun.classify(w)
        if not (flags.stable and flags.strictly_causal):
            raise InvalidInputError(f"{name} must be stable and strictly causal")
    for name, w in (("k1", k1), ("k2", k2)):
        flags = ratfun.classify(w)
        if not (flags.stable and flags.causal):
            raise InvalidInputError(f"{name} must be stable and causal")
    total = burn_in + n
    u = gen_noise(total, u_spec)
    e = gen_noise(total, e_spec)
    y1 = filter_series(f1, u).samples + filter_series(k1, e).samples
    y2 = filter_series(f2, u).samples + filter_series(k2, e).samples
    return (
        TimeSeries(y1[burn_in:], label="y1"),
        TimeSeries(y2[burn_in:], label="y2"),
        TimeSeries(u.samples[burn_in:], label="u"),
    )


def write_series_csv(path, series):
    """Combined CSV export ``t,<label>,...`` with one row per time index."""
    series = list(series)
    if not series:
        raise InvalidInputError("nothing to export")
    n = series[0].n
    for s in series:
        if s.n != n:
            raise InvalidInputError("all exported channels must share one length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [s.label or "y" for s in series])
        for t in range(n):
            writer.writerow([t] + [repr(float(s.samples[t])) for s in series])


def read_series_csv(path):
    """Read a combined series CSV back into {column: TimeSeries}."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if not header or header[0] != "t":
        raise InvalidInputError(f"{path}: expected a combined series CSV with a leading 't' column")
    columns = header[1:]
    data = np.array([[float(v) for v in row[1:]] for row in rows])
    return {name: TimeSeries(data[:, j], label=name) for j, name in enumerate(columns)}
