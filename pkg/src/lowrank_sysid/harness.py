"""Monte-Carlo experiment engine: derived seeds, box-plot statistics,
Bode comparisons and deterministic CSV/JSON writers.

Runs are independent; child seeds come from :func:`simulate.mix_seed`, so the
output is byte-identical for a given (scenario, runs, master_seed) regardless
of worker count.  Individual run failures are recorded and excluded; a batch
with more than 5% failures marks the summary invalid.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import estimate, ratfun, simulate
from .errors import InvalidInputError, LowRankError

FAILURE_FRACTION_LIMIT = 0.05


@dataclass(frozen=True)
class BoxStats:
    median: float
    q25: float
    q75: float
    minimum: float
    maximum: float
    variance: float
    outlier_count: int
    count: int


def boxplot_stats(samples) -> BoxStats:
    """Median, quartiles (linear interpolation), extremes, unbiased variance
    and 1.5*IQR outlier count."""
    arr = np.asarray(list(samples), dtype=float)
    if arr.size == 0:
        raise InvalidInputError("boxplot_stats requires a nonempty sample")
    q25, median, q75 = np.percentile(arr, [25.0, 50.0, 75.0])
    iqr = q75 - q25
    lo, hi = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    outliers = int(np.sum((arr < lo) | (arr > hi)))
    variance = float(np.var(arr, ddof=1)) if arr.size > 1 else 0.0
    return BoxStats(
        median=float(median),
        q25=float(q25),
        q75=float(q75),
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        variance=variance,
        outlier_count=outliers,
        count=int(arr.size),
    )


@dataclass(frozen=True)
class BodeComparison:
    angles: np.ndarray
    mag_a: np.ndarray
    mag_b: np.ndarray
    max_rel_err: float
    mean_rel_err: float


def compare_magnitudes(angles, mag_a, mag_b) -> BodeComparison:
    angles = np.asarray(angles, dtype=float)
    mag_a = np.asarray(mag_a, dtype=float)
    mag_b = np.asarray(mag_b, dtype=float)
    rel = np.abs(mag_a - mag_b) / np.maximum(mag_a, 1e-12)
    return BodeComparison(
        angles=angles,
        mag_a=mag_a,
        mag_b=mag_b,
        max_rel_err=float(rel.max()),
        mean_rel_err=float(rel.mean()),
    )


def bode_compare(wa: ratfun.RatTF, wb: ratfun.RatTF, angles) -> BodeComparison:
    """Magnitude-only comparison of two transfer functions on a grid."""
    mag_a = np.abs(ratfun.eval_circle(wa, angles))
    mag_b = np.abs(ratfun.eval_circle(wb, angles))
    return compare_magnitudes(angles, mag_a, mag_b)


@dataclass(frozen=True)
class McSummary:
    scenario_id: str
    runs: int
    failures: int
    invalid: bool
    params: dict

    def to_json_dict(self):
        return {
            "scenario_id": self.scenario_id,
            "runs": self.runs,
            "failures": self.failures,
            "invalid": self.invalid,
            "params": {
                name: {
                    "true_value": rec.get("true_value"),
                    "median": rec["stats"].median,
                    "q25": rec["stats"].q25,
                    "q75": rec["stats"].q75,
                    "min": rec["stats"].minimum,
                    "max": rec["stats"].maximum,
                    "variance": rec["stats"].variance,
                    "outlier_count": rec["stats"].outlier_count,
                }
                for name, rec in self.params.items()
            },
        }


def _execute_run(scenario, run_index):
    from .scenarios import execute_run  # deferred: scenarios imports this module

    return execute_run(scenario, run_index)


def run_monte_carlo(scenario, runs=None, master_seed=None, workers=1):
    """Execute a scenario ``runs`` times with derived child seeds.

    Returns (summary, rows, extras) where ``rows`` holds one parameter dict
    per run (None for failed runs) and ``extras`` carries per-run Bode
    magnitude grids keyed by comparison name.
    """
    from .scenarios import ScenarioConfig  # deferred import, circular otherwise

    if runs is None:
        runs = scenario.runs
    if master_seed is None:
        master_seed = scenario.master_seed
    if runs < 1:
        raise InvalidInputError("runs must be >= 1")
    scenario = scenario.with_overrides(runs=runs, master_seed=master_seed)

    indices = list(range(runs))
    results = [None] * runs
    errors = [None] * runs
    if workers and workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_execute_run, scenario, r): r for r in indices}
            for fut in concurrent.futures.as_completed(futures):
                r = futures[fut]
                try:
                    results[r] = fut.result()
                except LowRankError as exc:
                    errors[r] = exc
    else:
        for r in indices:
            try:
                results[r] = _execute_run(scenario, r)
            except LowRankError as exc:
                errors[r] = exc

    rows = []
    param_names = None
    for r in indices:
        seed = simulate.mix_seed(scenario.master_seed, r)
        if results[r] is not None:
            if param_names is None:
                param_names = [k for k in results[r] if not k.startswith("_")]
            rows.append({"run_index": r, "seed": seed, "status": "ok", **results[r]})
        else:
            rows.append({"run_index": r, "seed": seed, "status": f"failed:{type(errors[r]).__name__}"})
    if param_names is None:
        param_names = []

    failures = sum(1 for r in indices if results[r] is None)
    stats = {}
    truths = scenario.true_values()
    for name in param_names:
        values = [row[name] for row in rows if row["status"] == "ok"]
        if not values:
            continue
        rec = {"stats": boxplot_stats(values)}
        if name in truths:
            rec["true_value"] = truths[name]
        stats[name] = rec
    summary = McSummary(
        scenario_id=scenario.scenario_id,
        runs=runs,
        failures=failures,
        invalid=failures > FAILURE_FRACTION_LIMIT * runs,
        params=stats,
    )

    extras = {}
    for spec in scenario.bode_specs():
        grids = [results[r][f"_bode_{spec.name}"] for r in indices if results[r] is not None]
        if not grids:
            continue
        angles = ratfun.circle_grid(spec.angles)
        mag_est = np.mean(np.vstack(grids), axis=0)
        mag_true = np.abs(ratfun.eval_circle(spec.truth, angles))
        extras[spec.name] = compare_magnitudes(angles, mag_true, mag_est)
    return summary, rows, extras


# ---------------------------------------------------------------------------
# deterministic writers


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_runs_csv(path, rows, param_names):
    """One row per run: run_index, seed, parameter columns, status."""
    header = ["run_index", "seed"] + list(param_names) + ["status"]
    lines = [",".join(header)]
    for row in rows:
        cells = [str(row["run_index"]), str(row["seed"])]
        for name in param_names:
            value = row.get(name)
            cells.append(_format(float(value)) if value is not None else "nan")
        cells.append(row["status"])
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(path, summary: McSummary):
    with open(path, "w") as fh:
        json.dump(summary.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_bode_csv(path, comparison: BodeComparison):
    lines = ["theta,mag_true,mag_est"]
    for theta, a, b in zip(comparison.angles, comparison.mag_a, comparison.mag_b):
        lines.append(f"{theta!r},{a!r},{b!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
