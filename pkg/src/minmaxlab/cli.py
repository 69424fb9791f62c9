"""Batch experiment runner: one JSON config and one seed in, certificate, report and trace out.

Exit codes: 0 when the verifier passes, 2 when a construction finished but
failed verification, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import fixtures as fx
from .convex_approx import choose_holder_exponent
from .core import (
    Distinguishing,
    FiniteDistribution,
    JointDistribution,
    TestFunction,
    min_entropy,
)
from .errors import BoundNotMet, ConfigError, MinMaxLabError
from .game import ConstraintSet, duality_gap, solve_zero_sum, write_transcript
from .hardcore import build_hardcore, verify_hardcore
from .pseudoentropy import (
    build_dense_model,
    build_hill_hardcore,
    class_distance,
    verify_dense_model,
    verify_hill,
)
from .reports import FORMATS, SUFFIX, Check, RunReport, emit_report, verdict_of
from .security import (
    CLOSED_FORMS,
    DEFAULT_MODELS,
    SimulatorCostModel,
    emit_comparison_table,
    transform_cipher_params,
)
from .serialization import (
    dump_json,
    function_from_csv,
    function_from_dict,
    distribution_from_csv,
    distribution_from_dict,
    load_certificate,
    load_json,
    save_certificate,
)
from .simulators import aux_ell, build_aux_simulator, build_high_entropy_simulator, verify_aux_simulator

COMMANDS = ("game", "hardcore", "metric2hill", "densemodel", "simulate-aux", "simulate-entropy", "tsr")
CERTIFICATE = "certificate.json"
TRACE = "trace.csv"


# --- config access ----------------------------------------------------------


class Params:
    """Typed, range-checked access to a parameter dict; unknown keys are an error."""

    def __init__(self, data: Optional[dict], allowed: set, where: str):
        data = {} if data is None else data
        if not isinstance(data, dict):
            raise ConfigError(f"{where} must be a JSON object")
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")
        self.data = data
        self.where = where
        self.used = {}

    def get(self, name, default, kind=float, check=None, text=""):
        value = self.data.get(name, default)
        if value is not None:
            try:
                if kind is bool:
                    if not isinstance(value, bool):
                        raise TypeError
                elif kind is int:
                    if isinstance(value, bool) or int(value) != value:
                        raise TypeError
                    value = int(value)
                else:
                    value = kind(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{self.where}.{name} must be {kind.__name__}") from None
            if check is not None and not check(value):
                raise ConfigError(f"{self.where}.{name} = {value} is out of range ({text})")
        self.used[name] = value
        return value


def _path(base: Path, name) -> Path:
    if not isinstance(name, str):
        raise ConfigError(f"expected an input file name, got {name!r}")
    path = Path(name)
    path = path if path.is_absolute() else base / path
    if not path.exists():
        raise ConfigError(f"input file {path} does not exist")
    return path


def load_distribution(base: Path, name) -> FiniteDistribution:
    path = _path(base, name)
    if path.suffix == ".csv":
        return distribution_from_csv(path)
    return distribution_from_dict(load_json(path))


def load_functions(base: Path, spec, aux_bits: int = 0) -> list:
    """A list of paths, or one JSON file holding a list (or {"functions": [...]})."""
    names = spec if isinstance(spec, list) else [spec]
    out = []
    for name in names:
        path = _path(base, name)
        if path.suffix == ".csv":
            out.append(function_from_csv(path, aux_bits=aux_bits))
            continue
        data = load_json(path)
        if isinstance(data, dict) and "functions" in data:
            data = data["functions"]
        items = data if isinstance(data, list) else [data]
        out.extend(function_from_dict(item) for item in items)
    if not out:
        raise ConfigError("no functions given")
    return out


def load_joint(base: Path, name) -> JointDistribution:
    data = load_json(_path(base, name))
    try:
        return JointDistribution(np.asarray(data["values"], dtype=float), int(data["x_bits"]), int(data["z_bits"]))
    except KeyError as exc:
        raise ConfigError(f"joint distribution file lacks {exc}") from None


def _fixture(config: dict, names: tuple):
    spec = config.get("fixture")
    if spec is None:
        return None, None
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    if name not in names:
        raise ConfigError(f"unknown fixture {name!r}; choose from {', '.join(names)}")
    return name, Params({k: v for k, v in spec.items() if k != "name"}, set(names[name]), f"fixture {name}")


positive = (lambda v: v > 0, "> 0")
unit = (lambda v: 0 < v <= 1, "in (0, 1]")
half_open = (lambda v: 0 <= v < 1, "in [0, 1)")
bits = (lambda v: 1 <= v <= 16, "1..16")


def _advantage_trace(path: Path, advantages, bound: float) -> None:
    with open(path, "w") as fh:
        fh.write("index,advantage,bound,passed\n")
        for i, a in enumerate(advantages):
            fh.write(f"{i},{float(a)!r},{float(bound)!r},{str(a <= bound + 1e-9).lower()}\n")


# --- commands ---------------------------------------------------------------


GAME_FIXTURES = {"random_game": ("instance", "max_functions", "max_bits"), "matching_pennies": ()}


def run_game(config: dict, seed: int, base: Path, out: Path) -> RunReport:
    params = Params(config.get("parameters"), {"tolerance", "max_rounds", "record_every"}, "parameters")
    tolerance = params.get("tolerance", 1e-3, float, *positive)
    max_rounds = params.get("max_rounds", 20_000, int, *positive)
    record_every = params.get("record_every", 100, int, lambda v: v >= 0, ">= 0")
    name, fp = _fixture(config, GAME_FIXTURES)
    if name == "matching_pennies":
        game = fx.matching_pennies()
    elif name == "random_game":
        game = fx.random_game(fp.get("instance", seed, int), fp.get("max_functions", 10, int, lambda v: v >= 2, ">= 2"),
                              fp.get("max_bits", 5, int, *bits))
    else:
        inputs = config.get("inputs") or {}
        functions = load_functions(base, inputs.get("functions"))
        reference = load_distribution(base, inputs["reference"]) if "reference" in inputs else \
            FiniteDistribution.uniform(functions[0].size)
        target = load_distribution(base, inputs["target"]) if "target" in inputs else \
            FiniteDistribution.uniform(functions[0].size)
        cp = Params(config.get("constraint"), {"tag", "epsilon", "k", "delta"}, "constraint")
        tag = cp.get("tag", "density", str)
        if tag == "density":
            constraint = ConstraintSet.density(cp.get("epsilon", 0.5, float, *unit), reference)
        elif tag == "dense":
            constraint = ConstraintSet.dense(cp.get("delta", 0.5, float, *unit), reference)
        elif tag == "minentropy":
            constraint = ConstraintSet.minentropy(cp.get("k", 1.0, float), reference.bit_width)
        else:
            raise ConfigError(f"constraint tag {tag!r} is not one of density, dense, minentropy")
        game = fx.GameInstance(functions, constraint, Distinguishing(target))
        params.used.update({f"constraint.{k}": v for k, v in cp.used.items()})

    result = solve_zero_sum(game.functions, game.constraint, game.mode, tolerance, max_rounds,
                            strict=False, record_every=record_every)
    recomputed = duality_gap(game.functions, game.constraint, game.mode, result)
    weights = [float(w) for w, _ in result.a_strategy.components]
    z = game.constraint.vectorize(result.c_strategy)
    dump_json({"kind": "game", "value": result.value, "lower": result.lower, "upper": result.upper,
               "gap": result.gap, "rounds": result.rounds, "a_weights": weights,
               "c_point": [float(v) for v in np.ravel(z)]}, out / CERTIFICATE)
    write_transcript(out / TRACE, result.transcript)
    checks = [
        Check("duality gap", result.gap, tolerance, result.gap <= tolerance),
        Check("recomputed duality gap", recomputed, tolerance, recomputed <= tolerance + 1e-9),
    ]
    summary = {"value": result.value, "lower": result.lower, "upper": result.upper, "rounds": result.rounds,
               "functions": len(game.functions), "points": game.constraint.size, "tag": game.constraint.tag}
    return RunReport("game", verdict_of(checks), seed, __version__, _parameters(params, name, fp), summary, checks)


HARDCORE_FIXTURES = {"parity_dictators": ("n",), "random_hardcore": ("instance", "n", "count", "eps")}


def run_hardcore(config: dict, seed: int, base: Path, out: Path) -> RunReport:
    params = Params(config.get("parameters"), {"eps", "delta", "tau", "max_rounds"}, "parameters")
    eps = params.get("eps", 0.25, float, *unit)
    delta = params.get("delta", 0.1, float, *unit)
    tau = params.get("tau", delta / 10.0, float, *positive)
    max_rounds = params.get("max_rounds", 20_000, int, *positive)
    name, fp = _fixture(config, HARDCORE_FIXTURES)
    if name == "parity_dictators":
        inst = fx.parity_dictators(fp.get("n", 4, int, *bits))
    elif name == "random_hardcore":
        inst = fx.random_hardcore_instance(fp.get("instance", seed, int), fp.get("n", 8, int, *bits),
                                           fp.get("count", 40, int, *positive), fp.get("eps", eps, float, *unit))
    else:
        inputs = config.get("inputs") or {}
        functions = load_functions(base, inputs.get("functions"))
        f = load_functions(base, inputs.get("target"))[0]
        v = load_distribution(base, inputs["base"]) if "base" in inputs else FiniteDistribution.uniform(f.size)
        inst = fx.HardcoreInstance(f, functions, v)

    cert = build_hardcore(inst.f, inst.functions, inst.v, eps, delta, tau, seed=seed, max_rounds=max_rounds)
    save_certificate(cert, out / CERTIFICATE)
    check = verify_hardcore(load_certificate(out / CERTIFICATE), inst.f, inst.functions, inst.v)
    _advantage_trace(out / TRACE, check.advantages, check.bound)
    _, ell_formula = choose_holder_exponent("hardcore", min(eps, 0.5))
    ell = ell_formula(delta)
    checks = [
        Check("density", check.density, eps - 1e-9, check.density_ok, ">="),
        Check("max advantage", check.max_advantage, check.bound, all(check.passed)),
        Check("strategy support", cert.strategy_support, ell, cert.strategy_support <= ell),
    ]
    summary = {"game_value": cert.game_value, "gap": cert.gap, "rounds": cert.rounds,
               "sparsify_error": cert.sparsify_error, "sparsify_bound": cert.sparsify_bound,
               "exponent": cert.exponent, "functions": len(inst.functions)}
    return RunReport("hardcore", verdict_of(checks), seed, __version__, _parameters(params, name, fp), summary,
                     checks, files=_files())


HILL_FIXTURES = {"random_hill": ("instance", "n", "count")}


def run_metric2hill(config: dict, seed: int, base: Path, out: Path) -> RunReport:
    params = Params(config.get("parameters"), {"delta_bits", "eps", "delta", "tau", "premise_eps", "max_rounds"},
                    "parameters")
    delta_bits = params.get("delta_bits", 2.0, float, lambda v: v >= 0, ">= 0")
    eps = params.get("eps", 0.125, float, *half_open)
    delta = params.get("delta", 0.1, float, *unit)
    tau = params.get("tau", delta / 10.0, float, *positive)
    premise_eps = params.get("premise_eps", None, float, lambda v: v >= 0, ">= 0")
    max_rounds = params.get("max_rounds", 20_000, int, *positive)
    name, fp = _fixture(config, HILL_FIXTURES)
    if name == "random_hill":
        inst = fx.random_hill_instance(fp.get("instance", seed, int), fp.get("n", 8, int, *bits),
                                       int(delta_bits), eps, fp.get("count", 30, int, *positive))
        y, functions = inst.y, inst.functions
    else:
        inputs = config.get("inputs") or {}
        y = load_distribution(base, inputs.get("y"))
        functions = load_functions(base, inputs.get("functions"))

    cert = build_hill_hardcore(y, functions, delta_bits, eps, delta, tau, premise_eps=premise_eps, seed=seed,
                               max_rounds=max_rounds)
    save_certificate(cert, out / CERTIFICATE)
    check = verify_hill(load_certificate(out / CERTIFICATE), y, functions)
    bound = delta + tau
    _advantage_trace(out / TRACE, check.advantages, bound)
    n = y.bit_width
    limit = delta + eps + 2.0 * tau
    checks = [
        Check("model min-entropy", check.model_entropy, n - delta_bits - 1e-6, check.entropy_ok, ">="),
        Check("event mass", check.event_mass, 1.0 - eps, check.event_ok, ">="),
        Check("max advantage on event", check.max_advantage, bound, all(check.passed)),
        Check("advantage of Y vs mixture", check.mixture_advantage, limit, check.mixture_advantage <= limit + 1e-9),
        Check("advantage of Y vs model", check.composed_advantage, limit, check.composed_advantage <= limit + 1e-9),
    ]
    flow = [
        f"metric: every class member is fooled within eps = {eps:.6g} by some distribution of min-entropy "
        f"{n - delta_bits:.6g} -> class mixtures of size l = {cert.ell}",
        f"HILL on an event: Pr[E] = {check.event_mass:.6g} >= {1 - eps:.6g} and Y|E is within "
        f"delta + tau = {bound:.6g} of X' (min-entropy {check.model_entropy:.6g}), measured {check.max_advantage:.6g}",
        f"HILL with eps + delta: Y is within delta + eps + 2 tau = {limit:.6g} of the swapped mixture, "
        f"measured {check.mixture_advantage:.6g}",
    ]
    summary = {"game_value": cert.game_value, "gap": cert.gap, "rounds": cert.rounds, "ell": cert.ell,
               "sparsify_error": cert.sparsify_error, "holder_slack": cert.holder_slack,
               "functions": len(functions)}
    return RunReport("metric2hill", verdict_of(checks), seed, __version__, _parameters(params, name, fp), summary,
                     checks, flow=flow, files=_files())


DENSE_FIXTURES = {"random_dense": ("instance", "n", "count", "noise")}


def run_densemodel(config: dict, seed: int, base: Path, out: Path) -> RunReport:
    params = Params(config.get("parameters"), {"delta", "eps", "tau", "constant", "max_rounds"}, "parameters")
    delta = params.get("delta", 0.25, float, *unit)
    constant = params.get("constant", 2.0, float, *positive)
    max_rounds = params.get("max_rounds", 20_000, int, *positive)
    name, fp = _fixture(config, DENSE_FIXTURES)
    if name == "random_dense":
        inst = fx.random_dense_instance(fp.get("instance", seed, int), fp.get("n", 8, int, *bits), delta,
                                        fp.get("count", 30, int, *positive), fp.get("noise", 0.2, float))
        x, x_prime, functions = inst.x, inst.x_prime, inst.functions
    else:
        inputs = config.get("inputs") or {}
        x = load_distribution(base, inputs.get("x"))
        x_prime = load_distribution(base, inputs.get("x_prime"))
        functions = load_functions(base, inputs.get("functions"))
    measured, _ = class_distance(functions, x, FiniteDistribution.uniform(x.size))
    eps = params.get("eps", measured, float, lambda v: v >= 0, ">= 0")
    tau = params.get("tau", None, float, *positive)

    cert = build_dense_model(x, x_prime, functions, delta, eps, tau, constant=constant, seed=seed,
                             max_rounds=max_rounds)
    save_certificate(cert, out / CERTIFICATE)
    check = verify_dense_model(load_certificate(out / CERTIFICATE), x_prime, functions)
    bound = cert.epsilon_prime + cert.tau
    _advantage_trace(out / TRACE, check.advantages, bound)
    slack = 0.0 if eps == 0 else cert.tau / (eps / delta)
    checks = [
        Check("model density", float(check.density_ok), 1.0, check.density_ok, ">="),
        Check("max advantage", check.max_advantage, bound, all(check.passed)),
        Check("advantage ratio to eps/delta", check.ratio, constant + slack, check.ratio <= constant + slack + 1e-9),
    ]
    summary = {"epsilon_prime": cert.epsilon_prime, "tau": cert.tau, "game_value": cert.game_value, "gap": cert.gap,
               "rounds": cert.rounds, "ell": cert.ell, "functions": len(functions)}
    return RunReport("densemodel", verdict_of(checks), seed, __version__, _parameters(params, name, fp), summary,
                     checks, files=_files())


AUX_FIXTURES = {
    "independent_z": ("x_bits", "z_bits"),
    "first_bit_z": ("x_bits",),
    "random_aux": ("instance", "x_bits", "z_bits", "count"),
    "z_constant": ("instance", "x_bits", "z_bits", "count"),
}


def run_simulate_aux(config: dict, seed: int, base: Path, out: Path) -> RunReport:
    params = Params(config.get("parameters"), {"eps", "tau", "variance_mode", "attempts", "max_rounds"}, "parameters")
    eps = params.get("eps", 0.1, float, lambda v: 0 < v <= 0.5, "in (0, 1/2]")
    tau = params.get("tau", eps / 10.0, float, *positive)
    variance_mode = params.get("variance_mode", False, bool)
    attempts = params.get("attempts", 16, int, *positive)
    max_rounds = params.get("max_rounds", 20_000, int, *positive)
    name, fp = _fixture(config, AUX_FIXTURES)
    small = (lambda v: 1 <= v <= 4, "1..4")
    if name == "independent_z":
        inst = fx.independent_z(fp.get("x_bits", 2, int, *small), fp.get("z_bits", 1, int, *small))
    elif name == "first_bit_z":
        inst = fx.first_bit_z(fp.get("x_bits", 2, int, *small))
    elif name in ("random_aux", "z_constant"):
        maker = fx.random_aux_instance if name == "random_aux" else fx.z_constant_instance
        inst = maker(fp.get("instance", seed, int), fp.get("x_bits", 3, int, *bits), fp.get("z_bits", 1, int, *bits),
                     fp.get("count", 30, int, *positive))
    else:
        inputs = config.get("inputs") or {}
        joint = load_joint(base, inputs.get("joint"))
        inst = fx.AuxInstance(joint, load_functions(base, inputs.get("functions"), joint.z_bits))

    try:
        _, cert = build_aux_simulator(inst.joint, inst.functions, eps, tau, variance_mode=variance_mode, seed=seed,
                                      attempts=attempts, max_rounds=max_rounds)
    except BoundNotMet as exc:
        cert = exc.report
    save_certificate(cert, out / CERTIFICATE)
    check = verify_aux_simulator(load_certificate(out / CERTIFICATE), inst.joint, inst.functions)
    _advantage_trace(out / TRACE, check.advantages, cert.bound)
    ell_bound = aux_ell(inst.joint.z_bits, eps, cert.sigma)
    checks = [
        Check("max advantage", check.max_advantage, cert.bound, check.ok),
        Check("x-marginal preserved", float(cert.marginal_ok), 1.0, cert.marginal_ok, ">="),
        Check("kernel support", cert.ell, ell_bound, cert.ell <= ell_bound),
    ]
    summary = {"pre_sparsify_advantage": cert.pre_sparsify_advantage, "ell": cert.ell, "sigma": cert.sigma,
               "game_value": cert.game_value, "gap": cert.gap, "rounds": cert.rounds, "functions": len(inst.functions)}
    return RunReport("simulate-aux", verdict_of(checks), seed, __version__, _parameters(params, name, fp), summary,
                     checks, files=_files())


ENTROPY_FIXTURES = {
    "random_distinguisher": ("instance", "n"),
    "indicator_distinguisher": ("instance", "n"),
    "conditional": ("instance", "n", "z_bits"),
}


def run_simulate_entropy(config: dict, seed: int, base: Path, out: Path) -> RunReport:
    params = Params(config.get("parameters"), {"delta_bits", "eps", "sampling", "sample_count"}, "parameters")
    delta_bits = params.get("delta_bits", 2.0, float, lambda v: v >= 0, ">= 0")
    eps = params.get("eps", 1.0 / 16.0, float, lambda v: 0 < v <= 0.25, "in (0, 1/4]")
    sampling = params.get("sampling", False, bool)
    sample_count = params.get("sample_count", None, int, *positive)
    name, fp = _fixture(config, ENTROPY_FIXTURES)
    joint = None
    if name == "random_distinguisher":
        d = fx.random_distinguisher(fp.get("instance", seed, int), fp.get("n", 10, int, *bits))
    elif name == "indicator_distinguisher":
        d = fx.indicator_distinguisher(fp.get("instance", seed, int), fp.get("n", 10, int, *bits), int(delta_bits))
    elif name == "conditional":
        joint, d = fx.random_conditional_pair(fp.get("instance", seed, int), fp.get("n", 6, int, *bits),
                                              fp.get("z_bits", 2, int, *bits))
    else:
        inputs = config.get("inputs") or {}
        if "joint" in inputs:
            joint = load_joint(base, inputs["joint"])
        d = load_functions(base, inputs.get("distinguisher"), 0 if joint is None else joint.z_bits)[0]

    res = build_high_entropy_simulator(d, delta_bits, eps, joint, seed, sampling=sampling, sample_count=sample_count)
    n = int(round(math.log2(d.size))) - (0 if joint is None else joint.z_bits)
    floor = n - delta_bits - 6.0
    checks = [
        Check("min-entropy achieved", res.min_entropy_achieved, floor, res.min_entropy_achieved >= floor, ">="),
        Check("value vs capped-greedy optimum", res.value, res.optimum - 3 * eps,
              res.value >= res.optimum - 3 * eps - 1e-12, ">="),
    ]
    if joint is None:
        output = res.sampler.mass
        certificate = {"kind": "high_entropy", "case": res.case_taken, "m_prime": res.m_prime}
    else:
        output = res.joint
        same = bool(np.array_equal(res.z_marginal.mass, joint.marginal_z.mass))
        checks.append(Check("z-marginal preserved", float(same), 1.0, same, ">="))
        certificate = {"kind": "high_entropy", "case": list(res.case_taken), "m_prime": list(res.m_prime),
                       "z_marginal": [float(v) for v in res.z_marginal.mass]}
    certificate.update({"value": res.value, "optimum": res.optimum, "min_entropy": res.min_entropy_achieved,
                        "sampler": [float(v) for v in output]})
    dump_json(certificate, out / CERTIFICATE)
    with open(out / TRACE, "w") as fh:
        fh.write("index,sampler\n")
        for i, v in enumerate(output):
            fh.write(f"{i},{float(v)!r}\n")
    summary = {"case": str(certificate["case"]), "m_prime": str(certificate["m_prime"]), "value": res.value,
               "optimum": res.optimum, "optimum_gap": res.optimum_gap}
    return RunReport("simulate-entropy", verdict_of(checks), seed, __version__, _parameters(params, name, fp),
                     summary, checks, files=_files())


def _model_from_dict(data: dict) -> SimulatorCostModel:
    p = Params(data, {"label", "technique", "A_lambda", "A_log2", "alpha", "B_lambda", "B_log2", "beta"}, "model")
    label = p.get("label", "custom", str)
    alpha = p.get("alpha", 4.0, float, lambda v: v >= 0, ">= 0")
    beta = p.get("beta", 0.0, float, lambda v: v >= 0, ">= 0")
    b_lambda = p.get("B_lambda", None, float)
    b_log2 = p.get("B_log2", None, float)
    has_b = b_lambda is not None or b_log2 is not None
    return SimulatorCostModel(label, p.get("A_lambda", 0.0, float), alpha,
                              (b_lambda or 0.0) if has_b else None, beta, p.get("A_log2", 0.0, float),
                              b_log2 or 0.0, p.get("technique", "", str))


def run_tsr(config: dict, seed: int, base: Path, out: Path) -> RunReport:
    params = Params(config.get("parameters"), {"k", "lambda", "q", "wprf_eps_log2"}, "parameters")
    k = params.get("k", 128.0, float, *positive)
    lam = params.get("lambda", 10.0, float, lambda v: 0 <= v < k, "in [0, k)")
    q = params.get("q", 1.0, float, *positive)
    eps_log2 = params.get("wprf_eps_log2", None, float, lambda v: v < 0, "< 0")
    specs = config.get("models")
    models = DEFAULT_MODELS if specs is None else tuple(_model_from_dict(m) for m in specs)
    if not models:
        raise ConfigError("models must be a nonempty list")

    rows, checks = [], []
    for row, model in zip(emit_comparison_table(k, lam, models), models):
        closed = row.closed_form
        text = row.closed_form_text
        if closed is None and row.label in CLOSED_FORMS:
            closed = CLOSED_FORMS[row.label][1](k, lam)
        record = {"model": row.label, "simulator_size": row.formula, "k_prime": row.k_prime,
                  "closed_form": text or "(k - lambda - log2 A) / (2 + alpha)" if closed is not None else "",
                  "closed_form_value": closed}
        if eps_log2 is not None:
            eps_prime, s_prime = transform_cipher_params(k, lam, q, 2.0 ** eps_log2, model)
            record["eps_prime"] = eps_prime
            record["s_prime"] = s_prime
        rows.append(record)
        if closed is not None and row.k_prime is not None:
            diff = abs(row.k_prime - closed)
            checks.append(Check(f"{row.label} solver vs closed form", diff, 0.1, diff <= 0.1))
        elif row.k_prime is None:
            checks.append(Check(f"{row.label} positive security", 0.0, 0.0, False, ">"))
    with open(out / TRACE, "w") as fh:
        fh.write("model,k_prime\n")
        for r in rows:
            fh.write(f"{r['model']},{'' if r['k_prime'] is None else repr(float(r['k_prime']))}\n")
    flags = []
    if q != 1.0:
        flags.append(f"q = {q:g} differs from 1; the closed forms assume q = 1")
    return RunReport("tsr", verdict_of(checks), seed, __version__, _parameters(params, None, None), {}, checks,
                     rows=rows, flags=flags, files={"trace": TRACE})


def _parameters(params: Params, name, fp) -> dict:
    out = dict(params.used)
    if name is not None:
        out["fixture"] = name
        out.update({f"fixture.{k}": v for k, v in fp.used.items()})
    return out


def _files() -> dict:
    return {"certificate": CERTIFICATE, "trace": TRACE}


HANDLERS = {
    "game": run_game,
    "hardcore": run_hardcore,
    "metric2hill": run_metric2hill,
    "densemodel": run_densemodel,
    "simulate-aux": run_simulate_aux,
    "simulate-entropy": run_simulate_entropy,
    "tsr": run_tsr,
}

TOP_KEYS = {"command", "fixture", "inputs", "parameters", "constraint", "models"}


def run_experiment(command: str, config: dict, seed: int, out_dir, base_dir=".") -> RunReport:
    """Run one experiment, write its certificate and trace into ``out_dir`` and return the report."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(config, dict):
        raise ConfigError("the config must be a JSON object")
    unknown = sorted(set(config) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if config.get("command", command) != command:
        raise ConfigError(f"config is for {config['command']!r}, not {command!r}")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("the seed must be a nonnegative integer")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    report = HANDLERS[command](config, seed, Path(base_dir), out)
    report.wall_time = time.perf_counter() - start
    return report


def write_reports(report: RunReport, out_dir, fmt: str) -> list:
    formats = FORMATS if fmt == "all" else (fmt,)
    paths = []
    for f in formats:
        path = Path(out_dir) / f"report.{SUFFIX[f]}"
        emit_report(report, f, path)
        paths.append(path)
    return paths


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, required=True, help="random seed (mandatory)")
    common.add_argument("--out-dir", default="out", help="directory for certificate, report and trace")
    common.add_argument("--format", default="json", choices=FORMATS + ("all",), help="report format")
    parser = argparse.ArgumentParser(prog="minmaxlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"minmaxlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "tsr":
            p.add_argument("--k", type=float)
            p.add_argument("--lambda", dest="lam", type=float)
            p.add_argument("--q", type=float)
            p.add_argument("--A-log2", dest="A_log2", type=float, help="fixed log2 of the multiplier A")
            p.add_argument("--alpha", type=float)
            p.add_argument("--B-log2", dest="B_log2", type=float, help="fixed log2 of B (omit for B = 0)")
            p.add_argument("--beta", type=float)
    return parser


def _inline_tsr(args, config: dict) -> dict:
    config = dict(config)
    params = dict(config.get("parameters") or {})
    for key, value in (("k", args.k), ("lambda", args.lam), ("q", args.q)):
        if value is not None:
            params[key] = value
    config["parameters"] = params
    if args.A_log2 is not None or args.alpha is not None:
        if args.A_log2 is None or args.alpha is None:
            raise ConfigError("an inline model needs both --A-log2 and --alpha")
        model = {"label": "custom", "A_log2": args.A_log2, "alpha": args.alpha}
        if args.B_log2 is not None:
            model.update(B_log2=args.B_log2, beta=args.beta or 0.0)
        config["models"] = [model]
    elif args.B_log2 is not None or args.beta is not None:
        raise ConfigError("--B-log2 and --beta need --A-log2 and --alpha")
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config, base = {}, Path(".")
        if args.config:
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"config file {path} does not exist")
            config, base = load_json(path), path.parent
        if args.command == "tsr":
            config = _inline_tsr(args, config)
        report = run_experiment(args.command, config, args.seed, args.out_dir, base)
        write_reports(report, args.out_dir, args.format)
    except (MinMaxLabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{report.command}: {report.verdict} ({report.wall_time:.2f} s)")
    for c in report.checks:
        print(f"  {'ok  ' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} {c.relation} {c.bound:.6g}")
    return 0 if report.passed else 2


if __name__ == "__main__":
    sys.exit(main())
