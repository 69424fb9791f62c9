"""Seeded instance generators shared by the CLI, the tests and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FiniteDistribution, JointDistribution, SimulatorKernel, TestFunction
from .game import ConstraintSet, capped_greedy


def bits_of(size: int, width: int) -> np.ndarray:
    """Row x holds the ``width`` bits of x, least significant first."""
    return (np.arange(size)[:, None] >> np.arange(width)) & 1


def parity_function(n: int) -> TestFunction:
    parity = bits_of(1 << n, n).sum(axis=1) % 2
    return TestFunction(1.0 - 2.0 * parity, "[-1,1]")


def dictators(n: int) -> list:
    bits = bits_of(1 << n, n)
    return [TestFunction(1.0 - 2.0 * bits[:, i], "[-1,1]") for i in range(n)]


@dataclass(frozen=True, eq=False)
class HardcoreInstance:
    f: TestFunction
    functions: list
    v: FiniteDistribution


def parity_dictators(n: int = 4) -> HardcoreInstance:
    """Parity against the n dictators: every dictator is uncorrelated with parity on every subcube."""
    return HardcoreInstance(parity_function(n), dictators(n), FiniteDistribution.uniform(1 << n))


def random_hardcore_instance(seed: int, n: int = 8, count: int = 40, eps: float = 0.25) -> HardcoreInstance:
    """A random balanced +-1 target and ``count`` random +-1 predictors meeting the eps premise."""
    rng = np.random.default_rng(seed)
    size = 1 << n
    f = np.ones(size)
    f[rng.permutation(size)[: size // 2]] = -1.0
    v = FiniteDistribution.uniform(size)
    functions = []
    while len(functions) < count:
        a = rng.choice([-1.0, 1.0], size)
        if abs(float(v.mass @ (a * f))) <= 1.0 - eps:
            functions.append(TestFunction(a, "[-1,1]"))
    return HardcoreInstance(TestFunction(f, "[-1,1]"), functions, v)


def random_tables(rng: np.random.Generator, count: int, size: int, aux_bits: int = 0) -> list:
    return [TestFunction(rng.random(size), "[0,1]", 1.0, aux_bits) for _ in range(count)]


@dataclass(frozen=True, eq=False)
class HillInstance:
    y: FiniteDistribution
    functions: list
    delta_bits: float
    eps: float


def random_hill_instance(seed: int, n: int = 8, delta_bits: int = 2, eps: float = 0.125,
                         count: int = 30) -> HillInstance:
    """Y = (1 - eps) flat on 2^(n - D) random points + eps on one extra point."""
    rng = np.random.default_rng(seed)
    size = 1 << n
    mass = np.zeros(size)
    support = rng.permutation(size)[: size >> delta_bits]
    mass[support] = (1.0 - eps) / support.size
    mass[rng.integers(size)] += eps
    return HillInstance(FiniteDistribution(mass / mass.sum()), random_tables(rng, count, size), delta_bits, eps)


@dataclass(frozen=True, eq=False)
class DenseInstance:
    x: FiniteDistribution
    x_prime: FiniteDistribution
    functions: list
    delta: float
    eps: float


def dense_slice(x: FiniteDistribution, delta: float, rng: np.random.Generator) -> FiniteDistribution:
    """X conditioned on a random event of probability delta (the last point may be split)."""
    mass = capped_greedy(rng.random(x.size), x.mass, total=delta)
    return FiniteDistribution(mass / mass.sum())


def random_dense_instance(seed: int, n: int = 8, delta: float = 0.25, count: int = 30,
                          noise: float = 0.2) -> DenseInstance:
    """X = noisy uniform; eps is the largest class advantage of X over uniform."""
    rng = np.random.default_rng(seed)
    size = 1 << n
    functions = random_tables(rng, count, size)
    weights = np.clip(1.0 + noise * rng.standard_normal(size), 0.0, None)
    x = FiniteDistribution(weights / weights.sum())
    tables = np.vstack([f.values for f in functions])
    eps = float(np.max(np.abs(tables @ (x.mass - 1.0 / size))))
    return DenseInstance(x, dense_slice(x, delta, rng), functions, delta, eps)


@dataclass(frozen=True, eq=False)
class AuxInstance:
    joint: JointDistribution
    functions: list


def all_boolean_tables(x_bits: int, z_bits: int) -> list:
    """Every {0,1}-valued function on the product domain."""
    size = 1 << (x_bits + z_bits)
    bits = bits_of(1 << size, size)
    return [TestFunction(row.astype(float), "[0,1]", 1.0, z_bits) for row in bits]


def independent_z(x_bits: int = 2, z_bits: int = 1) -> AuxInstance:
    """Z uniform and independent of uniform X, tested by all boolean tables."""
    size = 1 << (x_bits + z_bits)
    joint = JointDistribution(np.full(size, 1.0 / size), x_bits, z_bits)
    return AuxInstance(joint, all_boolean_tables(x_bits, z_bits))


def first_bit_z(x_bits: int = 2) -> AuxInstance:
    """Z equals the top bit of uniform X, tested by all boolean tables."""
    xs = np.arange(1 << x_bits)
    kernel = SimulatorKernel.deterministic(xs >> (x_bits - 1), 2)
    joint = JointDistribution.from_kernel(FiniteDistribution.uniform(1 << x_bits), kernel)
    return AuxInstance(joint, all_boolean_tables(x_bits, 1))


def random_aux_instance(seed: int, x_bits: int = 3, z_bits: int = 1, count: int = 30) -> AuxInstance:
    rng = np.random.default_rng(seed)
    size = 1 << (x_bits + z_bits)
    joint = JointDistribution(rng.dirichlet(np.ones(size)), x_bits, z_bits)
    return AuxInstance(joint, random_tables(rng, count, size, z_bits))


def z_constant_instance(seed: int, x_bits: int = 3, z_bits: int = 1, count: int = 30) -> AuxInstance:
    """Functions that ignore z, so every kernel fools them and the class variance is 0."""
    rng = np.random.default_rng(seed)
    size = 1 << (x_bits + z_bits)
    joint = JointDistribution(rng.dirichlet(np.ones(size)), x_bits, z_bits)
    functions = [TestFunction(np.repeat(rng.random(1 << x_bits), 1 << z_bits), "[0,1]", 1.0, z_bits)
                 for _ in range(count)]
    return AuxInstance(joint, functions)


def random_distinguisher(seed: int, n: int = 10) -> TestFunction:
    return TestFunction(np.random.default_rng(seed).random(1 << n))


def indicator_distinguisher(seed: int, n: int = 10, delta_bits: int = 2) -> TestFunction:
    """The indicator of a random set of 2^(n - D) points."""
    rng = np.random.default_rng(seed)
    values = np.zeros(1 << n)
    values[rng.permutation(1 << n)[: (1 << n) >> delta_bits]] = 1.0
    return TestFunction(values)


def random_conditional_pair(seed: int, n: int = 6, z_bits: int = 2):
    """A random joint (X, Z) and a random distinguisher on X x Z."""
    rng = np.random.default_rng(seed)
    size = 1 << (n + z_bits)
    joint = JointDistribution(rng.dirichlet(np.ones(size)), n, z_bits)
    return joint, TestFunction(rng.random(size), "[0,1]", 1.0, z_bits)


@dataclass(frozen=True, eq=False)
class GameInstance:
    functions: list
    constraint: ConstraintSet
    mode: object


def random_game(seed: int, max_functions: int = 10, max_bits: int = 5) -> GameInstance:
    """A random distinguishing game with at most 10 functions on at most 32 points."""
    from .core import Distinguishing

    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, max_functions + 1))
    n = int(rng.integers(2, max_bits + 1))
    size = 1 << n
    functions = random_tables(rng, m, size)
    reference = FiniteDistribution(rng.dirichlet(np.ones(size)))
    if seed % 2:
        eps = float(rng.choice([0.125, 0.25, 0.5]))
        constraint = ConstraintSet.density(eps, reference)
        mode = Distinguishing(FiniteDistribution.uniform(size))
    else:
        constraint = ConstraintSet.minentropy(float(n - rng.integers(0, 3)), n)
        mode = Distinguishing(reference)
    return GameInstance(functions, constraint, mode)


def matching_pennies() -> GameInstance:
    """Two functions on two points; the min player picks a point (density 1/2 on uniform)."""
    from .core import Distinguishing

    functions = [TestFunction(np.array([1.0, 0.0])), TestFunction(np.array([0.0, 1.0]))]
    uniform = FiniteDistribution.uniform(2)
    return GameInstance(functions, ConstraintSet.density(0.5, uniform), Distinguishing(uniform))
