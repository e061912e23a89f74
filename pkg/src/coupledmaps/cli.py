"""Batch experiment runner.

Usage::

    python -m coupledmaps run <config.toml>
    python -m coupledmaps validate <config.toml>

A config is one TOML file of flat dotted keys (``chaos.t = 3``).  Every key
has a type and a default (see ``SCHEMA``); unknown keys and keys belonging
to a different experiment are rejected before anything is computed.  A run
writes into its own directory:

* ``results.csv``: the experiment table,
* ``plot.csv``: ``series,x,y,err`` rows for plotting,
* ``summary.json``: config echo, version string and headline metrics,
* ``manifest.json``: config hash, seed, timestamps and sha256 of the files above.

Everything except the timestamps in the manifest is a deterministic
function of the config.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .cone import SUITE_COLUMNS, cone_invariant_suite
from .density import GridDensity
from .ensemble import chaos_experiment, config_hash
from .foliation import (SCALING_COLUMNS, fiber_gap_scaling, invariance_certificate, leaf_closure_gap,
                        phi_derivative_table, straighten_batch)
from .quasi_product import (JointDensity, brute_force_pushforward, concentration_experiment, good_set_experiment,
                            lipschitz_envelope, lipschitz_report)
from .sto import ProductMeasure, sto_fixed_point
from .system import SITE_CATALOG, estimate_datum, system_from_config

__all__ = ["SCHEMA", "ConfigError", "ExperimentConfig", "RunManifest", "load_config", "parse_config",
           "serialize_config", "run", "main"]

EXPERIMENTS = ("chaos", "sto-fixpoint", "concentration", "good-set", "foliation-scaling", "certificate",
               "hilbert-selftest")

# experiment -> config sections it reads (besides the top-level keys)
SECTIONS = {
    "chaos": ("system", "initial", "chaos"),
    "sto-fixpoint": ("system", "initial", "sto"),
    "concentration": ("initial", "concentration"),
    "good-set": ("system", "initial", "good_set"),
    "foliation-scaling": ("system", "foliation"),
    "certificate": ("system", "certificate"),
    "hilbert-selftest": ("hilbert",),
}


@dataclass(frozen=True)
class Field:
    type: str
    default: object
    doc: str
    choices: tuple = ()
    minimum: float | None = None


SCHEMA = {
    "experiment": Field("str", None, "experiment to run", EXPERIMENTS),
    "seed": Field("int", 0, "top-level seed; every random stream derives from it", minimum=0),
    "workers": Field("int", 1, "cap on parallel workers (experiments currently run in one process)", minimum=1),
    "output_dir": Field("str", "", "run directory; default runs/<experiment>-<hash prefix>"),
    "system.site": Field("str", "doubling", "site map catalog name", tuple(SITE_CATALOG) + ("expanding",)),
    "system.degree": Field("int", 2, "degree when system.site = 'expanding'", minimum=2),
    "system.modes": Field("list[list[float]]", [], "[amplitude, wavenumber, phase] terms for 'expanding'"),
    "system.shift": Field("float", 0.0, "constant offset for 'expanding'"),
    "system.coupling": Field("str", "diffusive", "coupling kind", ("diffusive", "trig", "none")),
    "system.epsilon": Field("float", 0.1, "strength of eps * sin(2 pi (y - x))"),
    "system.terms": Field("list[list[float]]", [], "[amplitude, p, q, phase] terms of amp sin(2 pi (p x + q y) + phase)"),
    "initial.kind": Field("str", "von-mises", "initial marginal", ("uniform", "von-mises")),
    "initial.concentration": Field("float", 8.0, "c in exp(c cos 2 pi x)", minimum=0.0),
    "initial.M": Field("int", 1024, "grid size of initial marginals", minimum=4),
    "chaos.t": Field("int", 3, "time steps", minimum=1),
    "chaos.N_list": Field("list[int]", [16, 64, 256], "ascending system sizes"),
    "chaos.P": Field("int", 20000, "particles per size", minimum=1),
    "chaos.metric": Field("str", "TV", "distance", ("TV", "theta")),
    "chaos.b": Field("float", 0.0, "cone parameter for metric = 'theta'", minimum=0.0),
    "chaos.modes": Field("int", 16, "Fourier modes kept in reconstructions", minimum=1),
    "chaos.estimator": Field("str", "auto", "marginal estimator", ("auto", "cv", "pooled", "tracked")),
    "chaos.tracked": Field("list[int]", [0], "coordinates for the tracked estimator"),
    "chaos.bootstrap": Field("int", 200, "bootstrap replicates", minimum=2),
    "sto.N": Field("int", 16, "system size", minimum=1),
    "sto.tol": Field("float", 1e-9, "stopping tolerance in theta", minimum=1e-13),
    "sto.max_iter": Field("int", 200, "iteration cap", minimum=1),
    "concentration.N": Field("int", 100, "number of coordinates", minimum=1),
    "concentration.P": Field("int", 1000000, "samples", minimum=1),
    "concentration.eps_list": Field("list[float]", [0.05, 0.1, 0.2], "deviation thresholds"),
    "concentration.C_conf": Field("float", 1.1, "constant in 2 exp(-eps^2 N / C)", minimum=1e-12),
    "concentration.observable": Field("str", "mean", "(1/N) sum (x_j - 1/2) or (1/2N) sum cos(2 pi x_j)",
                                      ("mean", "cosine")),
    "concentration.confidence": Field("float", 0.99, "Wilson interval level", minimum=0.5),
    "good_set.N_list": Field("list[int]", [32, 64, 128, 256], "system sizes"),
    "good_set.P": Field("int", 20000, "samples per size", minimum=1),
    "good_set.eps_list": Field("list[float]", [1.0, 1.5], "C2 distance thresholds"),
    "good_set.tracked": Field("list[int]", [0], "coordinates"),
    "good_set.M": Field("int", 256, "grid for the C2 distance", minimum=4),
    "foliation.N_list": Field("list[int]", [8, 16, 32, 64], "system sizes"),
    "foliation.samples": Field("int", 16, "base points per size", minimum=1),
    "foliation.fd_step": Field("float", 1e-4, "finite-difference step", minimum=1e-8),
    "foliation.coord": Field("int", 0, "straightened coordinate", minimum=0),
    "foliation.gap_samples": Field("int", 8, "y_hat samples per kind for the fiber gap", minimum=1),
    "foliation.residual_points": Field("int", 1000, "random points for the residual check", minimum=1),
    "certificate.N": Field("int", 3, "system size", minimum=2),
    "certificate.a0": Field("float", 0.5, "inner cone parameter", minimum=0.0),
    "certificate.b0": Field("float", 2.0, "outer cone parameter", minimum=0.0),
    "certificate.alpha0": Field("float", 2.0, "second-derivative bound", minimum=0.0),
    "certificate.samples": Field("int", 16, "base points for the chart constants", minimum=1),
    "certificate.inflation": Field("float", 1.2, "safety factor on sampled constants", minimum=1.0),
    "certificate.brute_force": Field("bool", True, "push a product density forward on the full grid (N <= 4)"),
    "certificate.M": Field("int", 32, "grid per axis for the brute-force pushforward", minimum=4),
    "certificate.input_amplitude": Field("float", 0.04, "c in the input marginals exp(c cos 2 pi x)", minimum=0.0),
    "hilbert.pairs": Field("int", 100, "random instances per check", minimum=1),
    "hilbert.a": Field("float", 2.0, "cone parameter", minimum=0.0),
    "hilbert.M": Field("int", 1024, "grid size", minimum=4),
}


class ConfigError(ValueError):
    """Config validation failure; ``errors`` holds ``(key_path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))

    def record(self):
        return {"status": "error", "kind": "config", "errors": [{"key": k, "message": m} for k, m in self.errors]}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _check_type(value, kind):
    if kind == "str":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind.startswith("list[") and kind.endswith("]"):
        return isinstance(value, list) and all(_check_type(v, kind[5:-1]) for v in value)
    raise AssertionError(kind)


def _coerce(value, kind):
    if kind == "float":
        return float(value)
    if kind.startswith("list["):
        return [_coerce(v, kind[5:-1]) for v in value]
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated flat config: every key of the chosen experiment's sections, defaults filled in."""

    values: dict

    @property
    def experiment(self):
        return self.values["experiment"]

    @property
    def seed(self):
        return self.values["seed"]

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name):
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith(name + ".")}

    def hash(self):
        return config_hash(self.values)

    def output_dir(self):
        out = self.values["output_dir"]
        return Path(out) if out else Path("runs") / f"{self.experiment}-{self.hash()[:12]}"


def parse_config(raw):
    """Validate a nested or flat mapping and return an :class:`ExperimentConfig`."""
    flat = _flatten(raw)
    errors = []
    exp = flat.get("experiment")
    if exp is None:
        errors.append(("experiment", "required key missing"))
    elif exp not in EXPERIMENTS:
        errors.append(("experiment", f"must be one of {list(EXPERIMENTS)}, got {exp!r}"))
    allowed = {k for k in SCHEMA if "." not in k}
    if exp in SECTIONS:
        allowed |= {k for k in SCHEMA if k.split(".", 1)[0] in SECTIONS[exp]}
    for key in sorted(flat):
        if key not in SCHEMA:
            errors.append((key, "unknown key"))
        elif key not in allowed:
            errors.append((key, f"not used by experiment {exp!r}"))
    values = {}
    for key in sorted(allowed):
        spec = SCHEMA[key]
        if key not in flat:
            if spec.default is None:
                continue
            values[key] = spec.default
            continue
        v = flat[key]
        if not _check_type(v, spec.type):
            errors.append((key, f"expected {spec.type}, got {type(v).__name__}"))
            continue
        v = _coerce(v, spec.type)
        if spec.choices and v not in spec.choices:
            errors.append((key, f"must be one of {list(spec.choices)}, got {v!r}"))
        if spec.minimum is not None and isinstance(v, (int, float)) and v < spec.minimum:
            errors.append((key, f"must be >= {spec.minimum}, got {v!r}"))
        values[key] = v
    if not errors:
        errors.extend(_cross_checks(exp, values))
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(values)


def _ascending(key, values):
    v = values.get(key)
    if v is not None and (not v or any(n < 1 for n in v) or v != sorted(set(v))):
        return [(key, "must be a non-empty strictly ascending list of positive integers")]
    return []


def _cross_checks(exp, values):
    errors = []
    for key in ("chaos.N_list", "good_set.N_list", "foliation.N_list"):
        errors += _ascending(key, values)
    if values.get("system.coupling") == "trig" and not values.get("system.terms"):
        errors.append(("system.terms", "trig coupling needs at least one term"))
    for key in ("system.modes", "system.terms"):
        width = 3 if key == "system.modes" else 4
        if any(len(t) != width for t in values.get(key, [])):
            errors.append((key, f"every term needs {width} numbers"))
    if exp == "chaos" and values["chaos.metric"] == "theta" and values["chaos.b"] <= 0:
        errors.append(("chaos.b", "theta metric needs b > 0"))
    if exp == "certificate":
        if not values["certificate.b0"] > values["certificate.a0"] > 0:
            errors.append(("certificate.b0", "need b0 > a0 > 0"))
        if values["certificate.brute_force"] and (values["certificate.N"] > 4 or values["certificate.M"] > 64):
            errors.append(("certificate.N", "brute force needs N <= 4 and M <= 64"))
    for key in ("initial.M", "hilbert.M", "good_set.M", "certificate.M"):
        m = values.get(key)
        if m is not None and m & (m - 1):
            errors.append((key, "must be a power of two"))
    return errors


def load_config(path):
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([("<file>", f"TOML parse error: {exc}")]) from None
    return parse_config(raw)


def serialize_config(cfg: ExperimentConfig):
    """TOML text that parses back to the same config."""
    nested = {}
    for key, v in cfg.values.items():
        node = nested
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = v
    return tomli_w.dumps(nested)


# ---------------------------------------------------------------- builders

def _system_spec(cfg):
    site = cfg["system.site"]
    if site == "expanding":
        site = {"kind": "expanding", "degree": cfg["system.degree"], "shift": cfg["system.shift"],
                "modes": cfg["system.modes"]}
    kind = cfg["system.coupling"]
    if kind == "none":
        coupling = "none"
    elif kind == "diffusive":
        coupling = {"kind": "diffusive", "eps": cfg["system.epsilon"]}
    else:
        coupling = {"kind": "trig", "terms": cfg["system.terms"]}
    return {"site": site, "coupling": coupling}


def _system_family(cfg):
    spec = _system_spec(cfg)
    return lambda N: system_from_config(spec, N)


def _initial_marginal(cfg):
    M = cfg["initial.M"]
    if cfg["initial.kind"] == "uniform":
        return GridDensity.uniform(M)
    c = cfg["initial.concentration"]
    return GridDensity.from_function(lambda x: np.exp(c * np.cos(2 * np.pi * x)), M).normalized()


def _initial_measure(cfg):
    psi = _initial_marginal(cfg)
    return lambda N: ProductMeasure.identical_product(N, psi)


def _csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _plot(points):
    return _csv(["series", "x", "y", "err"], [dict(zip(("series", "x", "y", "err"), p)) for p in points])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ------------------------------------------------------------- experiments

def _run_chaos(cfg):
    c = cfg.section("chaos")
    res = chaos_experiment(_system_family(cfg), _initial_measure(cfg), c["t"], c["N_list"], c["P"], cfg.seed,
                           metric=c["metric"], M_modes=c["modes"], estimator=c["estimator"],
                           tracked=tuple(c["tracked"]), bootstrap=c["bootstrap"],
                           b=c["b"] if c["metric"] == "theta" else None)
    plot = [(r["coord"], r["N"], r["distance"], 0.5 * (r["err_hi"] - r["err_lo"])) for r in res.rows]
    summary = res.summary()
    summary["passes_slope_-0.25"] = bool(res.slope <= -0.25)
    return {"results.csv": res.to_csv(), "plot.csv": _plot(plot)}, summary


def _run_sto(cfg):
    c = cfg.section("sto")
    system = _system_family(cfg)(c["N"])
    mu0 = _initial_measure(cfg)(c["N"])
    fixed, lam, dists = sto_fixed_point(system, mu0, tol=c["tol"], max_iter=c["max_iter"])
    rows = [{"iteration": k + 1, "theta": d} for k, d in enumerate(dists)]
    psi = fixed.marginals[0]
    density = _csv(["grid_point", "value"], [{"grid_point": x, "value": v} for x, v in zip(psi.grid, psi.values)])
    datum = estimate_datum(system)
    summary = {"iterations": len(dists), "final_theta": dists[-1], "lambda_estimate": lam,
               "datum": {"kappa": datum.kappa, "K": datum.bigK, "E": datum.bigE, "valid": datum.valid}}
    return {"results.csv": _csv(["iteration", "theta"], rows), "fixed_point.csv": density,
            "plot.csv": _plot([("theta", r["iteration"], r["theta"], 0.0) for r in rows])}, summary


def _observable(kind, N):
    if kind == "mean":
        return lambda X: (X - 0.5).mean(axis=-1)
    return lambda X: 0.5 * np.cos(2 * np.pi * X).mean(axis=-1)


def _run_concentration(cfg):
    c = cfg.section("concentration")
    N = c["N"]
    mu = ProductMeasure.identical_product(N, _initial_marginal(cfg))
    rows = concentration_experiment(mu, _observable(c["observable"], N), N, c["eps_list"], c["P"], cfg.seed,
                                    C_conf=c["C_conf"], confidence=c["confidence"])
    hit = [r for r in rows if r["tail"] > 0]
    c_fit = max((r["eps"] ** 2 * N / np.log(2.0 / r["tail"]) for r in hit), default=0.0)
    cols = ["eps", "tail", "hits", "wilson_lo", "wilson_hi", "bound", "below"]
    summary = {"all_below": all(r["below"] for r in rows), "fitted_C_conf": c_fit,
               "configured_C_conf": c["C_conf"], "violates_configured": bool(c_fit > c["C_conf"])}
    plot = [("tail", r["eps"], r["tail"], 0.5 * (r["wilson_hi"] - r["wilson_lo"])) for r in rows]
    plot += [("bound", r["eps"], r["bound"], 0.0) for r in rows]
    return {"results.csv": _csv(cols, rows), "plot.csv": _plot(plot)}, summary


def _run_good_set(cfg):
    c = cfg.section("good_set")
    family, mu_rule = _system_family(cfg), _initial_measure(cfg)
    rows = []
    for N in c["N_list"]:
        rows += good_set_experiment(family(N), mu_rule(N), c["eps_list"], c["P"], cfg.seed,
                                    tracked=tuple(c["tracked"]), M=c["M"])
    slopes = {}
    for eps in c["eps_list"]:
        pts = [(r["N"], r["bad_fraction"]) for r in rows if r["eps"] == eps and r["coord"] == c["tracked"][0]
               and r["bad_fraction"] > 0]
        slopes[repr(eps)] = float(np.polyfit([p[0] for p in pts], np.log([p[1] for p in pts]), 1)[0]) \
            if len(pts) >= 2 else float("nan")
    cols = ["coord", "N", "eps", "bad_fraction", "P", "max_gap", "c_fit"]
    se = lambda r: float(np.sqrt(r["bad_fraction"] * (1 - r["bad_fraction"]) / r["P"]))
    plot = [(f"eps={r['eps']!r} coord={r['coord']}", r["N"], r["bad_fraction"], se(r)) for r in rows]
    return {"results.csv": _csv(cols, rows), "plot.csv": _plot(plot)}, {"log_bad_fraction_slope_in_N": slopes}


def _run_foliation(cfg):
    c = cfg.section("foliation")
    family = _system_family(cfg)
    i = c["coord"]
    rows, _ = phi_derivative_table(family, i=i, sample_count=c["samples"], fd_step=c["fd_step"],
                                   N_list=tuple(c["N_list"]), seed=cfg.seed)
    gap_rows, gap_slope = fiber_gap_scaling(family, i=i, N_list=tuple(c["N_list"]),
                                            sample_count=c["gap_samples"], seed=cfg.seed)
    N0 = c["N_list"][0]
    system = family(N0)
    rng = np.random.default_rng([cfg.seed, N0, 1])
    n = c["residual_points"]
    _, res, used = straighten_batch(system, i, rng.random(n), rng.random((n, N0 - 1)))
    closure = leaf_closure_gap(system, i, rng.random((4, N0 - 1)))
    slopes = {}
    for r in rows:
        slopes.setdefault(r["case_label"], r["fitted_slope"])
    summary = {"case_slopes": slopes, "fiber_gap_slope": gap_slope, "max_straighten_residual": float(res.max()),
               "newton_fraction": float(np.mean(used == "newton")), "leaf_closure_gap": closure,
               "residual_N": N0}
    plot = [(r["case_label"], r["N"], r["max_abs_estimate"], 0.0) for r in rows]
    plot += [("fiber_c2_gap", r["N"], r["max_c2_gap"], 0.0) for r in gap_rows]
    return {"results.csv": _csv(SCALING_COLUMNS, rows), "fiber_gap.csv": _csv(["N", "max_c2_gap", "samples"], gap_rows),
            "plot.csv": _plot(plot)}, summary


def _run_certificate(cfg):
    c = cfg.section("certificate")
    system = _system_family(cfg)(c["N"])
    cert = invariance_certificate(system, c["a0"], c["b0"], c["alpha0"], sample_count=c["samples"], seed=cfg.seed,
                                  inflation=c["inflation"])
    consts = {k: getattr(cert, k) for k in ("kappa", "distortion", "K", "L", "K_hat", "L_hat", "a_phi", "b_phi",
                                             "Lambda", "diameter", "contraction_rate")}
    rows = [{"quantity": k, "value": float(v)} for k, v in consts.items()]
    rows += [{"quantity": f"check:{k}", "value": float(bool(v))} for k, v in cert.checks.items()]
    summary = {"label": cert.label, "passed": cert.passed, "constants": consts, "checks": cert.checks}
    if c["brute_force"]:
        amp, M = c["input_amplitude"], c["M"]
        psi = GridDensity.from_function(lambda x: np.exp(amp * np.cos(2 * np.pi * x)), M).normalized()
        rho = JointDensity.product([psi] * c["N"])
        rin = lipschitz_report(rho, c["a0"], c["b0"], alpha=c["alpha0"])
        out, mass = brute_force_pushforward(system, rho)
        rout = lipschitz_report(out, c["a0"], c["b0"], alpha=c["alpha0"] * 1.1)
        env = lipschitz_envelope(system, rho, cert, c["b0"], seed=cfg.seed)
        bound = env["envelope"] / c["N"]
        rows += [{"quantity": "input_a_fit", "value": rin.a_fit}, {"quantity": "input_alpha_fit", "value": rin.alpha_fit},
                 {"quantity": "output_a_fit", "value": rout.a_fit},
                 {"quantity": "output_alpha_fit", "value": rout.alpha_fit},
                 {"quantity": "output_max_L", "value": rout.max_L}, {"quantity": "envelope_C_over_N", "value": bound},
                 {"quantity": "pushforward_mass", "value": mass}]
        summary["pushforward"] = {
            "input_in_cone": bool(rin.a_fit < c["a0"]), "input_in_C2": bool(rin.alpha_fit <= c["alpha0"]),
            "output_in_cone": bool(rout.a_fit < c["a0"]), "output_in_C2_1.1": bool(rout.alpha_fit <= 1.1 * c["alpha0"]),
            "output_max_L": rout.max_L, "envelope_C_over_N": bound, "within_envelope_x1.3": bool(rout.max_L <= 1.3 * bound),
            "envelope_parts": env, "mass": mass}
    plot = [("constant", k, r["value"], 0.0) for k, r in enumerate(rows)]
    return {"results.csv": _csv(["quantity", "value"], rows), "plot.csv": _plot(plot)}, summary


def _run_hilbert(cfg):
    c = cfg.section("hilbert")
    rows = cone_invariant_suite(pairs=c["pairs"], a=c["a"], M=c["M"], seed=cfg.seed)
    plot = [(r["check"], k, r["worst"], r["tolerance"]) for k, r in enumerate(rows)]
    summary = {"all_passed": all(r["passed"] for r in rows), "failed": [r["check"] for r in rows if not r["passed"]]}
    return {"results.csv": _csv(SUITE_COLUMNS, rows), "plot.csv": _plot(plot)}, summary


RUNNERS = {
    "chaos": _run_chaos,
    "sto-fixpoint": _run_sto,
    "concentration": _run_concentration,
    "good-set": _run_good_set,
    "foliation-scaling": _run_foliation,
    "certificate": _run_certificate,
    "hilbert-selftest": _run_hilbert,
}


# ------------------------------------------------------------------ driver

@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    version: str
    seed: int
    started: str
    finished: str
    files: dict
    directory: str

    def to_json(self):
        return json.dumps({"config_hash": self.config_hash, "version": self.version, "seed": self.seed,
                           "started": self.started, "finished": self.finished, "files": self.files},
                          indent=2, sort_keys=True) + "\n"


def _stamp():
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def run(cfg: ExperimentConfig, output_dir=None):
    """Run one experiment and write its files; returns the :class:`RunManifest`."""
    out = Path(output_dir) if output_dir is not None else cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    started = _stamp()
    files, summary = RUNNERS[cfg.experiment](cfg)
    files["summary.json"] = json.dumps({"config": cfg.values, "config_hash": cfg.hash(), "version": __version__,
                                        "experiment": cfg.experiment, "metrics": _jsonable(summary)},
                                       indent=2, sort_keys=True) + "\n"
    files["config.toml"] = serialize_config(cfg)
    checksums = {}
    for name in sorted(files):
        data = files[name].encode()
        (out / name).write_bytes(data)
        checksums[name] = hashlib.sha256(data).hexdigest()
    manifest = RunManifest(cfg.hash(), __version__, cfg.seed, started, _stamp(), checksums, str(out))
    (out / "manifest.json").write_text(manifest.to_json())
    return manifest


def main(argv=None):
    parser = argparse.ArgumentParser(prog="coupledmaps", description="Run or validate an experiment config.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("config")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(json.dumps(exc.record(), sort_keys=True), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"status": "error", "kind": "io", "message": str(exc)}), file=sys.stderr)
        return 2
    if args.command == "validate":
        print(json.dumps({"status": "ok", "experiment": cfg.experiment, "config_hash": cfg.hash(),
                          "output_dir": str(cfg.output_dir())}, sort_keys=True))
        return 0
    try:
        manifest = run(cfg)
    except Exception as exc:  # surfaced verbatim as a machine-readable record
        print(json.dumps({"status": "error", "kind": "computation", "type": type(exc).__name__,
                          "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "directory": manifest.directory, "files": manifest.files}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
