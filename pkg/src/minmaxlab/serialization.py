"""CSV and JSON round-tripping for distributions, functions, kernels and certificates.

CSV files hold ``index,value`` rows written with 17 significant digits,
so doubles survive a round trip bit for bit. JSON uses Python's shortest
round-trip float repr.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import BoundedMeasure, FiniteDistribution, SimulatorKernel, TestFunction, _log2_size
from .errors import InvalidParameter
from .hardcore import HardcoreCertificate
from .pseudoentropy import DenseModelCertificate, HillCertificate
from .simulators import AuxSimulatorCertificate


def format_float(x: float) -> str:
    return format(float(x), ".17g")


# --- CSV -------------------------------------------------------------------


def write_values_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float)):
            writer.writerow([i, format_float(v)])


def read_values_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].strip().lower() == "index":
        rows = rows[1:]
    rows = [r for r in rows if r]
    values = np.zeros(len(rows))
    seen = set()
    for r in rows:
        i = int(r[0])
        if not 0 <= i < len(rows) or i in seen:
            raise InvalidParameter(f"bad or repeated index {i} in {path}")
        seen.add(i)
        values[i] = float(r[1])
    return values


def distribution_to_csv(dist: FiniteDistribution, path) -> None:
    write_values_csv(path, dist.mass)


def distribution_from_csv(path) -> FiniteDistribution:
    """Load a distribution, renormalizing drift up to 1e-6 and rejecting more."""
    return FiniteDistribution.from_values(read_values_csv(path))


def function_to_csv(f: TestFunction, path) -> None:
    write_values_csv(path, f.values)


def function_from_csv(path, range: str = "[0,1]", complexity: float = 1.0, aux_bits: int = 0) -> TestFunction:
    return TestFunction(read_values_csv(path), range, complexity, aux_bits)


# --- JSON ------------------------------------------------------------------


def function_to_dict(f: TestFunction) -> dict:
    out = {
        "bit_width": _log2_size(f.size) - f.aux_bits,
        "values": [float(v) for v in f.values],
        "range": f.range,
        "complexity": float(f.complexity),
    }
    if f.aux_bits:
        out["aux_bits"] = f.aux_bits
    return out


def function_from_dict(data: dict) -> TestFunction:
    values = np.asarray(data["values"], dtype=float)
    aux = int(data.get("aux_bits", 0))
    if values.size != 1 << (int(data["bit_width"]) + aux):
        raise InvalidParameter("values do not fill the declared bit width")
    return TestFunction(values, data.get("range", "[0,1]"), float(data.get("complexity", 1.0)), aux)


def distribution_to_dict(dist: FiniteDistribution) -> dict:
    return {"bit_width": dist.bit_width, "values": [float(v) for v in dist.mass]}


def distribution_from_dict(data: dict) -> FiniteDistribution:
    dist = FiniteDistribution.from_values(np.asarray(data["values"], dtype=float))
    if "bit_width" in data and dist.bit_width != int(data["bit_width"]):
        raise InvalidParameter("values do not fill the declared bit width")
    return dist


def kernel_to_dict(kernel: SimulatorKernel) -> dict:
    return {
        "x_bits": kernel.x_bits,
        "z_bits": kernel.z_bits,
        "component_count": int(kernel.component_count),
        "rows": [[float(v) for v in row] for row in kernel.rows],
    }


def kernel_from_dict(data: dict) -> SimulatorKernel:
    rows = np.asarray(data["rows"], dtype=float)
    return SimulatorKernel(rows, int(data.get("component_count", 1)))


def dump_json(data, path) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def save_function(f: TestFunction, path) -> None:
    dump_json(function_to_dict(f), path)


def load_function(path) -> TestFunction:
    return function_from_dict(load_json(path))


def save_kernel(kernel: SimulatorKernel, path) -> None:
    dump_json(kernel_to_dict(kernel), path)


def load_kernel(path) -> SimulatorKernel:
    return kernel_from_dict(load_json(path))


# --- certificates ----------------------------------------------------------


def _strategy(cert) -> list:
    return [{"index": int(i), "weight": float(w)} for i, w in cert.strategy_indices]


def certificate_to_dict(cert) -> dict:
    """A JSON-ready payload; ``kind`` names the certificate type."""
    if isinstance(cert, HardcoreCertificate):
        return {
            "kind": "hardcore",
            "event": [float(v) for v in cert.event.mass],
            "reference": [float(v) for v in cert.event.cap.mass],
            "epsilon": cert.epsilon,
            "delta": cert.delta,
            "tau": cert.tau,
            "max_advantage": cert.max_advantage,
            "advantages": list(cert.advantages),
            "strategy_support": cert.strategy_support,
            "strategy": _strategy(cert),
            "game_value": cert.game_value,
            "gap": cert.gap,
            "rounds": cert.rounds,
            "exponent": cert.exponent,
            "sparsify_error": cert.sparsify_error,
            "sparsify_bound": cert.sparsify_bound,
            "holder_slack": cert.holder_slack,
        }
    if isinstance(cert, HillCertificate):
        return {
            "kind": "hill",
            "event": [float(v) for v in cert.event.mass],
            "reference": [float(v) for v in cert.event.cap.mass],
            "model": [float(v) for v in cert.model.mass],
            "delta_bits": cert.delta_bits,
            "epsilon": cert.epsilon,
            "delta": cert.delta,
            "tau": cert.tau,
            "ell": cert.ell,
            "max_advantage": cert.max_advantage,
            "advantages": list(cert.advantages),
            "strategy": _strategy(cert),
            "game_value": cert.game_value,
            "gap": cert.gap,
            "rounds": cert.rounds,
            "exponent": cert.exponent,
            "sparsify_error": cert.sparsify_error,
            "sparsify_bound": cert.sparsify_bound,
            "holder_slack": cert.holder_slack,
        }
    if isinstance(cert, DenseModelCertificate):
        return {
            "kind": "dense_model",
            "model": [float(v) for v in cert.model.mass],
            "density_ok": cert.density_ok,
            "delta": cert.delta,
            "epsilon": cert.epsilon,
            "epsilon_prime": cert.epsilon_prime,
            "constant": cert.constant,
            "tau": cert.tau,
            "ell": cert.ell,
            "max_advantage": cert.max_advantage,
            "ratio": cert.ratio,
            "advantages": list(cert.advantages),
            "strategy": _strategy(cert),
            "game_value": cert.game_value,
            "gap": cert.gap,
            "rounds": cert.rounds,
            "exponent": cert.exponent,
            "sparsify_error": cert.sparsify_error,
            "sparsify_bound": cert.sparsify_bound,
        }
    if isinstance(cert, AuxSimulatorCertificate):
        return {
            "kind": "aux_simulator",
            "kernel": kernel_to_dict(cert.kernel),
            "epsilon": cert.epsilon,
            "tau": cert.tau,
            "ell": cert.ell,
            "sigma": cert.sigma,
            "max_advantage": cert.max_advantage,
            "pre_sparsify_advantage": cert.pre_sparsify_advantage,
            "advantages": list(cert.advantages),
            "game_value": cert.game_value,
            "gap": cert.gap,
            "rounds": cert.rounds,
            "marginal_ok": cert.marginal_ok,
        }
    raise InvalidParameter(f"cannot serialize {type(cert).__name__}")


def certificate_from_dict(data: dict):
    kind = data.get("kind")
    if kind == "hardcore":
        ref = FiniteDistribution.from_values(data["reference"])
        event = BoundedMeasure(np.asarray(data["event"], dtype=float), ref, data["epsilon"])
        return HardcoreCertificate(
            event=event,
            max_advantage=data["max_advantage"],
            strategy_support=data["strategy_support"],
            epsilon=data["epsilon"],
            delta=data["delta"],
            tau=data["tau"],
            advantages=tuple(data["advantages"]),
            strategy_indices=tuple((s["index"], s["weight"]) for s in data["strategy"]),
            game_value=data["game_value"],
            gap=data["gap"],
            rounds=data["rounds"],
            sparsify_error=data["sparsify_error"],
            sparsify_bound=data["sparsify_bound"],
            exponent=data["exponent"],
            holder_slack=data["holder_slack"],
        )
    if kind == "hill":
        ref = FiniteDistribution.from_values(data["reference"])
        event = BoundedMeasure(np.asarray(data["event"], dtype=float), ref, 1.0 - data["epsilon"])
        return HillCertificate(
            event=event,
            model=FiniteDistribution.from_values(data["model"]),
            max_advantage=data["max_advantage"],
            delta_bits=data["delta_bits"],
            epsilon=data["epsilon"],
            delta=data["delta"],
            tau=data["tau"],
            ell=data["ell"],
            advantages=tuple(data["advantages"]),
            strategy_indices=tuple((s["index"], s["weight"]) for s in data["strategy"]),
            game_value=data["game_value"],
            gap=data["gap"],
            rounds=data["rounds"],
            sparsify_error=data["sparsify_error"],
            sparsify_bound=data["sparsify_bound"],
            exponent=data["exponent"],
            holder_slack=data["holder_slack"],
        )
    if kind == "dense_model":
        return DenseModelCertificate(
            model=FiniteDistribution.from_values(data["model"]),
            density_ok=data["density_ok"],
            max_advantage=data["max_advantage"],
            delta=data["delta"],
            epsilon_prime=data["epsilon_prime"],
            ell=data["ell"],
            epsilon=data["epsilon"],
            tau=data["tau"],
            constant=data["constant"],
            advantages=tuple(data["advantages"]),
            strategy_indices=tuple((s["index"], s["weight"]) for s in data["strategy"]),
            game_value=data["game_value"],
            gap=data["gap"],
            rounds=data["rounds"],
            sparsify_error=data["sparsify_error"],
            sparsify_bound=data["sparsify_bound"],
            exponent=data["exponent"],
        )
    if kind == "aux_simulator":
        return AuxSimulatorCertificate(
            kernel=kernel_from_dict(data["kernel"]),
            max_advantage=data["max_advantage"],
            pre_sparsify_advantage=data["pre_sparsify_advantage"],
            advantages=tuple(data["advantages"]),
            ell=data["ell"],
            epsilon=data["epsilon"],
            tau=data["tau"],
            sigma=data["sigma"],
            game_value=data["game_value"],
            gap=data["gap"],
            rounds=data["rounds"],
            marginal_ok=data["marginal_ok"],
        )
    raise InvalidParameter(f"unknown certificate kind {kind!r}")


def save_certificate(cert, path) -> None:
    dump_json(certificate_to_dict(cert), path)


def load_certificate(path):
    return certificate_from_dict(load_json(path))
