"""Scenario configuration, the per-run estimation pipelines, and the three
built-in experiment presets.

A scenario is a declarative JSON document (validated here) naming the true
system, sample sizes, noise variances, the estimation steps to run and the
Monte-Carlo batch shape.  ``execute_run`` turns one (scenario, run_index)
pair into a flat parameter dict; the harness aggregates those.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from . import estimate, harness, ratfun, simulate
from .errors import ConfigError, InvalidInputError
from .ratfun import RatTF

DEFAULT_MASTER_SEED = 8675309
_KINDS = ("low_rank", "with_input")
_SYSTEM_KEYS = {"low_rank": ("w1", "w2"), "with_input": ("f1", "f2", "k1", "k2")}


@dataclass(frozen=True)
class BodeSpec:
    name: str
    angles: int
    truth: RatTF


@dataclass(frozen=True)
class EstimationPlan:
    ar_orders: tuple | None = None
    arma_orders: tuple | None = None
    relation_orders: object = None  # (q, r) or "bic"
    relation_scan: tuple = (3, 3)
    pin_b0: bool = False
    recover: bool = False
    wiener: bool = False
    stage1_orders: object = "bic"  # ((q1, r1), (q2, r2)) or "bic"
    stage1_scan: tuple = (3, 5)
    k1_orders: tuple = (2, 2)
    bode: tuple = ()  # of (target, angles)


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    scenario_id: str
    system: dict
    n: int
    estimation: EstimationPlan
    burn_in: int = 500
    e_variance: float = 1.0
    u_variance: float | None = None
    runs: int = 1
    master_seed: int = DEFAULT_MASTER_SEED
    output_dir: str = "out"

    # -- helpers used by the harness ------------------------------------
    def with_overrides(self, **kwargs):
        return dataclasses.replace(self, **kwargs)

    def bode_specs(self):
        return [BodeSpec(name=t, angles=a, truth=self.system[t]) for t, a in self.estimation.bode]

    def resolved(self):
        """Pin any "bic" order choices using the run-0 dataset.

        Order selection is data driven but deterministic given the seed, so
        resolving once keeps Monte-Carlo parameter columns consistent.
        """
        plan = self.estimation
        if plan.relation_orders != "bic" and plan.stage1_orders != "bic":
            return self
        changes = {}
        if self.kind == "low_rank" and plan.relation_orders == "bic":
            y1, y2 = _simulate_low_rank(self, 0)
            table = estimate.scan_bic(y1, y2, *plan.relation_scan, pin_b0=plan.pin_b0)
            changes["relation_orders"] = table.best
        if self.kind == "with_input":
            y1, y2, u = _simulate_with_input(self, 0)
            if plan.stage1_orders == "bic":
                best = tuple(estimate.scan_bic_input(y, u, *plan.stage1_scan).best for y in (y1, y2))
                changes["stage1_orders"] = best
            if plan.relation_orders == "bic":
                raise ConfigError(["estimation.relation: with_input scenarios need explicit relation orders"])
        if not changes:
            return self
        return self.with_overrides(estimation=dataclasses.replace(plan, **changes))

    def true_values(self):
        """Best-effort map of parameter names to their true values."""
        out = {}
        plan = self.estimation
        if self.kind == "low_rank":
            if plan.ar_orders:
                for i, order in enumerate(plan.ar_orders, start=1):
                    w = self.system[f"w{i}"]
                    coeffs = _true_ar_coeffs(w, order)
                    if coeffs is not None:
                        out.update({f"a{i}_{k + 1}": coeffs[k] for k in range(order)})
            if isinstance(plan.relation_orders, tuple):
                h = self.system["w2"] / self.system["w1"]
                _add_relation_truth(out, h, plan.relation_orders, "rel")
        else:
            k1, k2 = self.system["k1"], self.system["k2"]
            if isinstance(plan.relation_orders, tuple):
                _add_relation_truth(out, k2 / k1, plan.relation_orders, "h")
            b, a = ratfun.to_delay_form(k1)
            for k in range(1, len(a)):
                out[f"k1_ar_{k}"] = float(a[k])
            for k in range(1, len(b)):
                out[f"k1_ma_{k}"] = float(b[k])
            out["k1_variance"] = 1.0 * self.e_variance
            if isinstance(plan.stage1_orders, tuple):
                for i, (q, r) in enumerate(plan.stage1_orders, start=1):
                    coeffs = _true_input_coeffs(self.system[f"f{i}"], q, r)
                    if coeffs is not None:
                        ta, tb = coeffs
                        out.update({f"f{i}_a_{k + 1}": ta[k] for k in range(q)})
                        out.update({f"f{i}_b_{k}": tb[k] for k in range(r + 1)})
        return out

    # -- serialization ----------------------------------------------------
    def to_json_dict(self):
        plan = self.estimation
        est = {}
        if plan.ar_orders:
            est["ar_orders"] = list(plan.ar_orders)
        if plan.arma_orders:
            est["arma_orders"] = list(plan.arma_orders)
        if plan.relation_orders is not None:
            if plan.relation_orders == "bic":
                est["relation"] = {"orders": "bic", "q_max": plan.relation_scan[0], "r_max": plan.relation_scan[1]}
            else:
                est["relation"] = {"orders": list(plan.relation_orders)}
        if plan.pin_b0:
            est["pin_b0"] = True
        if plan.recover:
            est["recover"] = True
        if plan.wiener:
            est["wiener"] = True
        if self.kind == "with_input":
            if plan.stage1_orders == "bic":
                est["stage1"] = {"orders": "bic", "q_max": plan.stage1_scan[0], "r_max": plan.stage1_scan[1]}
            else:
                est["stage1"] = {"orders": [list(o) for o in plan.stage1_orders]}
            est["k1_orders"] = list(plan.k1_orders)
        if plan.bode:
            est["bode"] = [{"target": t, "angles": a} for t, a in plan.bode]
        noise = {"e_variance": self.e_variance}
        if self.u_variance is not None:
            noise["u_variance"] = self.u_variance
        return {
            "kind": self.kind,
            "scenario_id": self.scenario_id,
            "system": {k: ratfun.to_json_dict(w) for k, w in sorted(self.system.items())},
            "n": self.n,
            "burn_in": self.burn_in,
            "noise": noise,
            "estimation": est,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
        }


def _true_ar_coeffs(w: RatTF, order):
    """Delay-form AR coefficients when w is an all-pole model of that order."""
    num = np.asarray(w.num)
    if w.den_degree != order or len(num) != order + 1 or np.any(num[:-1] != 0.0):
        return None
    b, a = ratfun.to_delay_form(w / float(num[-1]))
    return [float(v) for v in a[1:]]


def _add_relation_truth(out, h: RatTF, orders, prefix):
    q, r = orders
    if h.num_degree > r or h.den_degree > q or not ratfun.classify(h).causal:
        return
    b, a = ratfun.to_delay_form(h)
    for k in range(1, q + 1):
        out[f"{prefix}_a_{k}"] = float(a[k]) if k < len(a) else 0.0
    for k in range(r + 1):
        out[f"{prefix}_b_{k}"] = float(b[k]) if k < len(b) else 0.0


def _true_input_coeffs(f: RatTF, q, r):
    """True (a, b) for the stage-1 regression when f fits inside orders (q, r)."""
    b, a = ratfun.to_delay_form(f)
    if len(b) and b[0] != 0.0:
        return None  # not strictly causal
    b = b[1:]  # strip the z^-1 factor
    if len(b) > r + 1 or len(a) - 1 > q:
        return None
    ta = [float(a[k]) if k < len(a) else 0.0 for k in range(1, q + 1)]
    tb = [float(b[k]) if k < len(b) else 0.0 for k in range(r + 1)]
    return ta, tb


# ---------------------------------------------------------------------------
# per-run pipelines


def _simulate_low_rank(scenario: ScenarioConfig, run_index):
    child = simulate.mix_seed(scenario.master_seed, run_index)
    return simulate.sim_low_rank(
        scenario.system["w1"],
        scenario.system["w2"],
        scenario.n,
        simulate.NoiseSpec(scenario.e_variance, child),
        burn_in=scenario.burn_in,
    )


def _simulate_with_input(scenario: ScenarioConfig, run_index):
    child = simulate.mix_seed(scenario.master_seed, run_index)
    e_spec = simulate.NoiseSpec(scenario.e_variance, simulate.mix_seed(child, 0))
    u_spec = simulate.NoiseSpec(scenario.u_variance, simulate.mix_seed(child, 1))
    return simulate.sim_with_input(
        scenario.system["f1"],
        scenario.system["f2"],
        scenario.system["k1"],
        scenario.system["k2"],
        scenario.n,
        u_spec,
        e_spec,
        burn_in=scenario.burn_in,
    )


def _padded(values, count):
    out = [0.0] * count
    for i, v in enumerate(values[:count]):
        out[i] = float(v)
    return out


def execute_run(scenario: ScenarioConfig, run_index):
    """Run the scenario's estimation pipeline once; returns a flat param dict."""
    plan = scenario.estimation
    params = {}
    if scenario.kind == "low_rank":
        y1, y2 = _simulate_low_rank(scenario, run_index)
        g1_hat = None
        if plan.ar_orders:
            for i, (y, order) in enumerate(zip((y1, y2), plan.ar_orders), start=1):
                ar = estimate.AREstimator(order=order).fit(y)
                for k in range(order):
                    params[f"a{i}_{k + 1}"] = float(ar.ar_[k])
                if i == 1:
                    g1_hat = ar.g_
        if plan.arma_orders:
            arma = estimate.ARMAEstimator(p=plan.arma_orders[0], q=plan.arma_orders[1]).fit(y1)
            for k, v in enumerate(arma.ar_, start=1):
                params[f"arma_ar_{k}"] = float(v)
            for k, v in enumerate(arma.ma_, start=1):
                params[f"arma_ma_{k}"] = float(v)
            params["arma_variance"] = float(arma.innovation_variance_)
            g1_hat = arma.g_
        rel = None
        if isinstance(plan.relation_orders, tuple):
            q, r = plan.relation_orders
            rel = estimate.RelationEstimator(q=q, r=r, pin_b0=plan.pin_b0).fit(y1, y2)
            for k in range(1, q + 1):
                params[f"rel_a_{k}"] = float(rel.a_[k - 1])
            for k in range(r + 1):
                params[f"rel_b_{k}"] = float(rel.b_[k])
            params["residual_rms"] = float(rel.residual_rms_)
        w1_hat = None
        if plan.recover:
            if g1_hat is None or rel is None:
                raise ConfigError(["estimation.recover: needs an innovation fit and a relation fit"])
            rec = estimate.recover_w1_w2(g1_hat, rel.h_)
            w1_hat = rec.w1
        if plan.wiener:
            if g1_hat is None or rel is None:
                raise ConfigError(["estimation.wiener: needs an innovation fit and a relation fit"])
            base = w1_hat if w1_hat is not None else g1_hat
            pair = estimate.wiener_predictor(base, rel.h_ * base)
            fb, fa = ratfun.to_delay_form(pair.f_plus)
            nb = (plan.ar_orders[0] + 1) if plan.ar_orders else len(fb)
            na = plan.relation_orders[1] if isinstance(plan.relation_orders, tuple) else max(len(fa) - 1, 0)
            for k, v in enumerate(_padded(list(fb), nb)):
                params[f"fplus_b_{k}"] = v
            for k, v in enumerate(_padded(list(fa[1:]), na), start=1):
                params[f"fplus_a_{k}"] = v
            params["kplus"] = float(pair.k.at_infinity())
        for spec in scenario.bode_specs():
            if spec.name == "w1" and w1_hat is not None:
                grid = ratfun.circle_grid(spec.angles)
                params[f"_bode_{spec.name}"] = np.abs(ratfun.eval_circle(w1_hat, grid))
            else:
                raise ConfigError([f"estimation.bode: no estimate available for target {spec.name!r}"])
        return params

    # with_input
    y1, y2, u = _simulate_with_input(scenario, run_index)
    if plan.stage1_orders == "bic" or not isinstance(plan.relation_orders, tuple):
        raise ConfigError(["estimation: with_input runs need resolved stage1/relation orders"])
    model = estimate.InputModelEstimator(
        stage1_orders=plan.stage1_orders,
        relation_orders=plan.relation_orders,
        k1_orders=plan.k1_orders,
        pin_b0=plan.pin_b0,
    ).fit(y1, y2, u)
    for i, channel in enumerate((model.channel1_, model.channel2_), start=1):
        for k, v in enumerate(channel.a_, start=1):
            params[f"f{i}_a_{k}"] = float(v)
        for k, v in enumerate(channel.b_):
            params[f"f{i}_b_{k}"] = float(v)
    for k, v in enumerate(model.relation_.a_, start=1):
        params[f"h_a_{k}"] = float(v)
    for k, v in enumerate(model.relation_.b_):
        params[f"h_b_{k}"] = float(v)
    for k, v in enumerate(model.k1_model_.ar_, start=1):
        params[f"k1_ar_{k}"] = float(v)
    for k, v in enumerate(model.k1_model_.ma_, start=1):
        params[f"k1_ma_{k}"] = float(v)
    params["k1_variance"] = float(model.k1_model_.innovation_variance_)
    params["residual_rms"] = float(model.relation_.residual_rms_)
    for spec in scenario.bode_specs():
        source = {"k1": model.k1_, "k2": model.k2_}.get(spec.name)
        if source is None:
            raise ConfigError([f"estimation.bode: no estimate available for target {spec.name!r}"])
        grid = ratfun.circle_grid(spec.angles)
        params[f"_bode_{spec.name}"] = np.abs(ratfun.eval_circle(source, grid))
    return params


# ---------------------------------------------------------------------------
# JSON parsing / validation


def _parse_tf(obj, field, errors):
    try:
        return ratfun.from_json_dict(obj)
    except InvalidInputError as exc:
        errors.append(f"{field}: {exc}")
        return None


def _expect(cond, errors, message):
    if not cond:
        errors.append(message)
    return cond


def scenario_from_json_dict(doc) -> ScenarioConfig:
    """Validate and build a ScenarioConfig, listing every offending field."""
    errors = []
    if not isinstance(doc, dict):
        raise ConfigError(["document: expected a JSON object"])
    kind = doc.get("kind")
    _expect(kind in _KINDS, errors, f"kind: expected one of {_KINDS}, got {kind!r}")
    scenario_id = doc.get("scenario_id", "scenario")
    _expect(isinstance(scenario_id, str) and scenario_id, errors, "scenario_id: expected a nonempty string")

    system = {}
    sys_doc = doc.get("system")
    if _expect(isinstance(sys_doc, dict), errors, "system: expected an object of transfer functions") and kind in _KINDS:
        for key in _SYSTEM_KEYS[kind]:
            if key not in sys_doc:
                errors.append(f"system.{key}: missing")
                continue
            w = _parse_tf(sys_doc[key], f"system.{key}", errors)
            if w is not None:
                system[key] = w

    n = doc.get("n")
    _expect(isinstance(n, int) and n >= 1, errors, f"n: expected a positive integer, got {n!r}")
    burn_in = doc.get("burn_in", 500)
    _expect(isinstance(burn_in, int) and burn_in >= 0, errors, f"burn_in: expected a nonnegative integer, got {burn_in!r}")
    runs = doc.get("runs", 1)
    _expect(isinstance(runs, int) and runs >= 1, errors, f"runs: expected a positive integer, got {runs!r}")
    master_seed = doc.get("master_seed", DEFAULT_MASTER_SEED)
    _expect(isinstance(master_seed, int) and master_seed >= 0, errors, f"master_seed: expected a nonnegative integer, got {master_seed!r}")
    output_dir = doc.get("output_dir", "out")

    noise = doc.get("noise", {})
    e_variance = noise.get("e_variance", 1.0) if isinstance(noise, dict) else 1.0
    u_variance = noise.get("u_variance") if isinstance(noise, dict) else None
    _expect(isinstance(e_variance, (int, float)) and e_variance >= 0, errors, "noise.e_variance: expected a nonnegative number")
    if kind == "with_input":
        _expect(
            isinstance(u_variance, (int, float)) and u_variance >= 0,
            errors,
            "noise.u_variance: required for with_input scenarios",
        )

    est_doc = doc.get("estimation", {})
    plan = EstimationPlan()
    if _expect(isinstance(est_doc, dict), errors, "estimation: expected an object"):
        changes = {}
        if "ar_orders" in est_doc:
            val = est_doc["ar_orders"]
            if _expect(isinstance(val, list) and len(val) == 2, errors, "estimation.ar_orders: expected [p1, p2]"):
                changes["ar_orders"] = tuple(int(v) for v in val)
        if "arma_orders" in est_doc:
            val = est_doc["arma_orders"]
            if _expect(isinstance(val, list) and len(val) == 2, errors, "estimation.arma_orders: expected [p, q]"):
                changes["arma_orders"] = tuple(int(v) for v in val)
        if "relation" in est_doc:
            rel = est_doc["relation"]
            if isinstance(rel, dict) and rel.get("orders") == "bic":
                changes["relation_orders"] = "bic"
                changes["relation_scan"] = (int(rel.get("q_max", 3)), int(rel.get("r_max", 3)))
            elif isinstance(rel, dict) and isinstance(rel.get("orders"), list) and len(rel["orders"]) == 2:
                changes["relation_orders"] = tuple(int(v) for v in rel["orders"])
            else:
                errors.append('estimation.relation: expected {"orders": [q, r]} or {"orders": "bic", ...}')
        changes["pin_b0"] = bool(est_doc.get("pin_b0", False))
        changes["recover"] = bool(est_doc.get("recover", False))
        changes["wiener"] = bool(est_doc.get("wiener", False))
        if "stage1" in est_doc:
            st = est_doc["stage1"]
            if isinstance(st, dict) and st.get("orders") == "bic":
                changes["stage1_orders"] = "bic"
                changes["stage1_scan"] = (int(st.get("q_max", 3)), int(st.get("r_max", 5)))
            elif isinstance(st, dict) and isinstance(st.get("orders"), list) and len(st["orders"]) == 2:
                try:
                    changes["stage1_orders"] = tuple((int(o[0]), int(o[1])) for o in st["orders"])
                except (TypeError, IndexError):
                    errors.append('estimation.stage1: expected {"orders": [[q1, r1], [q2, r2]]}')
            else:
                errors.append('estimation.stage1: expected {"orders": [[q1, r1], [q2, r2]]} or {"orders": "bic", ...}')
        if "k1_orders" in est_doc:
            val = est_doc["k1_orders"]
            if _expect(isinstance(val, list) and len(val) == 2, errors, "estimation.k1_orders: expected [p, q]"):
                changes["k1_orders"] = tuple(int(v) for v in val)
        if "bode" in est_doc:
            specs = []
            val = est_doc["bode"]
            if _expect(isinstance(val, list), errors, "estimation.bode: expected a list"):
                for i, item in enumerate(val):
                    if not isinstance(item, dict) or "target" not in item:
                        errors.append(f"estimation.bode[{i}]: expected {{'target': ..., 'angles': ...}}")
                        continue
                    specs.append((str(item["target"]), int(item.get("angles", 128))))
            changes["bode"] = tuple(specs)
        plan = dataclasses.replace(plan, **changes)

    # generator-side stability requirements, naming the offending pole
    for key, w in sorted(system.items()):
        flags = ratfun.classify(w)
        if not flags.stable:
            poles, _ = ratfun.poles_zeros(w)
            worst = poles[np.argmax(np.abs(poles))]
            errors.append(f"system.{key}: generator requires stability; pole at {worst:.6g}")
        if not flags.causal:
            errors.append(f"system.{key}: generator requires a causal transfer function")
        if kind == "with_input" and key in ("f1", "f2") and not flags.strictly_causal:
            errors.append(f"system.{key}: input map must be strictly causal (at least one delay)")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        kind=kind,
        scenario_id=scenario_id,
        system=system,
        n=n,
        estimation=plan,
        burn_in=burn_in,
        e_variance=float(e_variance),
        u_variance=float(u_variance) if u_variance is not None else None,
        runs=runs,
        master_seed=master_seed,
        output_dir=output_dir,
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"document: invalid JSON ({exc})"]) from exc
    return scenario_from_json_dict(doc)


# ---------------------------------------------------------------------------
# presets: the three built-in experiments


def preset(name: str) -> ScenarioConfig:
    """Built-in experiment configurations by name."""
    if name == "example1":
        w1 = ratfun.reduce([0.0, 0.0, 0.0, 1.0], [0.05, -0.25, -0.2, 1.0])
        w2 = ratfun.reduce([0.0, 0.0, 0.0, 1.0], [0.01, 0.03, -0.6, 1.0])
        plan = EstimationPlan(
            ar_orders=(3, 3),
            relation_orders=(1, 1),
            pin_b0=True,
            wiener=True,
        )
        return ScenarioConfig(
            kind="low_rank",
            scenario_id="example1",
            system={"w1": w1, "w2": w2},
            n=500,
            estimation=plan,
            runs=100,
            master_seed=DEFAULT_MASTER_SEED,
            output_dir="out/example1",
        )
    if name == "example2":
        w1 = ratfun.reduce([2.0, 1.0], [-0.2, 1.0])
        w2 = ratfun.reduce([-2.0, 1.0], [-0.2, 1.0])
        plan = EstimationPlan(
            arma_orders=(1, 1),
            relation_orders=(1, 1),
            pin_b0=True,
            recover=True,
            bode=(("w1", 128),),
        )
        return ScenarioConfig(
            kind="low_rank",
            scenario_id="example2",
            system={"w1": w1, "w2": w2},
            n=500,
            estimation=plan,
            runs=1,
            master_seed=20260603,
            output_dir="out/example2",
        )
    if name == "example3":
        f1 = ratfun.reduce([0.3, 0.7, 0.3], [0.0, 0.0, 0.0, 1.0])
        f2 = ratfun.reduce([-0.5, 0.9, 0.15], [0.0, 0.0, 0.0, 1.0])
        k1 = ratfun.reduce([0.4, 0.1, 1.0], [0.4, 0.3, 1.0])
        k2 = ratfun.reduce([0.4, 0.1, 1.0], [0.1, -0.2, 1.0])
        plan = EstimationPlan(
            relation_orders=(2, 2),
            stage1_orders=((1, 3), (2, 4)),
            k1_orders=(2, 2),
            bode=(("k1", 128), ("k2", 128)),
        )
        return ScenarioConfig(
            kind="with_input",
            scenario_id="example3",
            system={"f1": f1, "f2": f2, "k1": k1, "k2": k2},
            n=500,
            estimation=plan,
            u_variance=2.0,
            runs=100,
            master_seed=DEFAULT_MASTER_SEED,
            output_dir="out/example3",
        )
    raise InvalidInputError(f"unknown preset {name!r} (expected example1, example2 or example3)")


# ---------------------------------------------------------------------------
# orchestration


def run_scenario(scenario: ScenarioConfig, workers: int = 1, output_dir=None):
    """Simulate -> estimate -> aggregate per the scenario; write artifacts.

    Writes runs.csv, summary.json, per-target bode CSVs and config.echo.json
    into the output directory; returns (summary, extras).
    """
    outdir = output_dir or scenario.output_dir
    os.makedirs(outdir, exist_ok=True)
    resolved = scenario.resolved()
    summary, rows, extras = harness.run_monte_carlo(resolved, workers=workers)
    param_names = []
    for row in rows:
        if row["status"] == "ok":
            param_names = [k for k in row if k not in ("run_index", "seed", "status") and not k.startswith("_bode_")]
            break
    harness.write_runs_csv(os.path.join(outdir, "runs.csv"), rows, param_names)
    harness.write_summary_json(os.path.join(outdir, "summary.json"), summary)
    for name, comparison in extras.items():
        suffix = "" if len(extras) == 1 else f"_{name}"
        harness.write_bode_csv(os.path.join(outdir, f"bode{suffix}.csv"), comparison)
    with open(os.path.join(outdir, "config.echo.json"), "w") as fh:
        json.dump(scenario.with_overrides(output_dir=outdir).to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary, extras
