"""Exact probability tables, test functions and the three payoff functionals.

Everything here is plain double precision over explicit finite domains.
Product domains X x Z are flattened row-major with x as the high-order
index, so the point (x, z) lives at ``x * 2**z_bits + z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainMismatch, EmptyClass, InvalidExponent, InvalidParameter, ZeroMass

SUM_TOL = 1e-9
RENORMALIZE_TOL = 1e-6
RANGES = {"[0,1]": (0.0, 1.0), "[-1,1]": (-1.0, 1.0)}


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _log2_size(size: int) -> int:
    bits = size.bit_length() - 1
    if size < 1 or 1 << bits != size:
        raise DomainMismatch(f"domain size {size} is not a power of two")
    return bits


@dataclass(frozen=True)
class FiniteDomain:
    """{0,1}^bit_width, optionally times an auxiliary {0,1}^aux_bits."""

    bit_width: int
    aux_bits: int = 0

    def __post_init__(self):
        if self.bit_width < 0 or self.aux_bits < 0 or self.bit_width + self.aux_bits < 1:
            raise InvalidParameter("a domain needs at least one bit")

    @property
    def size(self) -> int:
        return 1 << (self.bit_width + self.aux_bits)

    @property
    def x_size(self) -> int:
        return 1 << self.bit_width

    @property
    def z_size(self) -> int:
        return 1 << self.aux_bits

    def index(self, x: int, z: int = 0) -> int:
        return x * self.z_size + z


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen(self.mass)
        if mass.ndim != 1 or mass.size == 0:
            raise InvalidParameter("mass must be a nonempty 1-d table")
        if not np.all(np.isfinite(mass)) or mass.min() < 0.0:
            raise InvalidParameter("mass entries must be finite and nonnegative")
        total = math.fsum(mass)
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidParameter(f"mass sums to {total!r}, not 1")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_values(cls, values, tol: float = RENORMALIZE_TOL) -> "FiniteDistribution":
        """Accept a table whose sum drifted by at most ``tol`` and renormalize it.

        Tables already summing to 1 within 1e-9 are kept as given, so a saved
        distribution loads back bit for bit.
        """
        arr = np.asarray(values, dtype=float)
        total = math.fsum(arr)
        if abs(total - 1.0) > tol:
            raise InvalidParameter(f"mass sums to {total!r}; drift exceeds {tol}")
        if abs(total - 1.0) <= SUM_TOL:
            return cls(arr)
        return cls(arr / total)

    @classmethod
    def uniform(cls, size: int) -> "FiniteDistribution":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point(cls, size: int, index: int) -> "FiniteDistribution":
        mass = np.zeros(size)
        mass[index] = 1.0
        return cls(mass)

    @classmethod
    def flat(cls, size: int, support: Iterable[int]) -> "FiniteDistribution":
        idx = np.unique(np.fromiter(support, dtype=int))
        mass = np.zeros(size)
        mass[idx] = 1.0 / idx.size
        return cls(mass)

    @property
    def size(self) -> int:
        return self.mass.size

    @property
    def bit_width(self) -> int:
        return _log2_size(self.size)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mass > 0.0)

    def expect(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.size:
            raise DomainMismatch(f"table of length {values.shape[-1]} on a {self.size}-point domain")
        return float(values @ self.mass)

    def __eq__(self, other):
        return isinstance(other, FiniteDistribution) and np.array_equal(self.mass, other.mass)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BoundedMeasure:
    """A sub-distribution ``mass <= cap`` of total weight at least ``threshold``."""

    mass: np.ndarray
    cap: FiniteDistribution
    threshold: float

    def __post_init__(self):
        mass = _frozen(self.mass)
        if mass.shape != self.cap.mass.shape:
            raise DomainMismatch("measure and cap live on different domains")
        if not 0.0 < self.threshold <= 1.0:
            raise InvalidParameter("threshold must lie in (0, 1]")
        if mass.min() < 0.0 or np.any(mass > self.cap.mass * (1.0 + SUM_TOL) + 1e-15):
            raise InvalidParameter("measure must satisfy 0 <= mass <= cap pointwise")
        object.__setattr__(self, "mass", mass)

    @property
    def total(self) -> float:
        return math.fsum(self.mass)

    @property
    def satisfies_threshold(self) -> bool:
        return self.total >= self.threshold - SUM_TOL


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A bounded real table with a declared range and an abstract size weight.

    ``aux_bits`` > 0 marks a function on a product domain X x Z with
    ``len(values) == 2**(bit_width + aux_bits)``.
    """

    __test__ = False  # keep pytest from collecting this class

    values: np.ndarray
    range: str = "[0,1]"
    complexity: float = 1.0
    aux_bits: int = 0

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1 or values.size == 0:
            raise InvalidParameter("values must be a nonempty 1-d table")
        if self.range not in RANGES:
            raise InvalidParameter(f"unknown range {self.range!r}")
        lo, hi = RANGES[self.range]
        if not np.all(np.isfinite(values)) or values.min() < lo - 1e-12 or values.max() > hi + 1e-12:
            raise InvalidParameter(f"values leave the declared range {self.range}")
        if not self.complexity > 0:
            raise InvalidParameter("complexity must be positive")
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def domain(self) -> FiniteDomain:
        return FiniteDomain(_log2_size(self.size) - self.aux_bits, self.aux_bits)

    def negation(self) -> "TestFunction":
        """The complement: ``-A`` for [-1,1] tables, ``1 - A`` for [0,1] tables."""
        flipped = -self.values if self.range == "[-1,1]" else 1.0 - self.values
        return TestFunction(flipped, self.range, self.complexity, self.aux_bits)

    def table(self) -> np.ndarray:
        """Values reshaped to (x, z) for product-domain functions."""
        return self.values.reshape(-1, 1 << self.aux_bits)


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """A finite convex combination of test functions."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), f) for w, f in self.components)
        if not comps:
            raise EmptyClass("a mixed strategy needs at least one component")
        weights = np.array([w for w, _ in comps])
        if weights.min() < 0.0 or abs(math.fsum(weights) - 1.0) > SUM_TOL:
            raise InvalidParameter("weights must be nonnegative and sum to 1")
        sizes = {f.size for _, f in comps}
        if len(sizes) != 1:
            raise DomainMismatch("components live on different domains")
        object.__setattr__(self, "components", comps)

    @classmethod
    def uniform(cls, functions: Sequence[TestFunction]) -> "MixedStrategy":
        return cls(tuple((1.0 / len(functions), f) for f in functions))

    @classmethod
    def pure(cls, function: TestFunction) -> "MixedStrategy":
        return cls(((1.0, function),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def functions(self) -> list:
        return [f for _, f in self.components]

    @property
    def size(self) -> int:
        return self.components[0][1].size

    @property
    def support(self) -> int:
        return int(np.count_nonzero(self.weights > 0.0))

    @property
    def complexity(self) -> int:
        return self.support

    @property
    def values(self) -> np.ndarray:
        return self.weights @ np.vstack([f.values for f in self.functions])

    @property
    def range(self) -> str:
        ranges = {f.range for f in self.functions}
        return "[0,1]" if ranges == {"[0,1]"} else "[-1,1]"

    @property
    def aux_bits(self) -> int:
        return self.components[0][1].aux_bits

    def collapse(self) -> TestFunction:
        values = np.clip(self.values, *RANGES[self.range])
        return TestFunction(values, self.range, float(self.support), self.aux_bits)


@dataclass(frozen=True, eq=False)
class SimulatorKernel:
    """A per-input output distribution: ``rows[x, z] = Pr[h(x) = z]``."""

    rows: np.ndarray
    component_count: int = 1

    def __post_init__(self):
        rows = _frozen(self.rows)
        if rows.ndim != 2:
            raise InvalidParameter("kernel rows must form a 2-d table")
        _log2_size(rows.shape[0])
        _log2_size(rows.shape[1])
        if rows.min() < 0.0 or np.max(np.abs(rows.sum(axis=1) - 1.0)) > SUM_TOL:
            raise InvalidParameter("every kernel row must be a distribution")
        if self.component_count < 1:
            raise InvalidParameter("component_count must be at least 1")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def deterministic(cls, outputs, z_size: int) -> "SimulatorKernel":
        outputs = np.asarray(outputs, dtype=int)
        rows = np.zeros((outputs.size, z_size))
        rows[np.arange(outputs.size), outputs] = 1.0
        return cls(rows)

    @property
    def x_bits(self) -> int:
        return _log2_size(self.rows.shape[0])

    @property
    def z_bits(self) -> int:
        return _log2_size(self.rows.shape[1])


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """A distribution on X x Z with its two marginals.

    When built from a marginal and a kernel the x-marginal is kept as given,
    so pairing X with a simulator never perturbs it.
    """

    mass: np.ndarray
    x_bits: int
    z_bits: int
    marginal_x: FiniteDistribution = field(default=None)
    marginal_z: FiniteDistribution = field(default=None, init=False)

    def __post_init__(self):
        dist = FiniteDistribution(np.asarray(self.mass, dtype=float).reshape(-1))
        if dist.size != 1 << (self.x_bits + self.z_bits):
            raise DomainMismatch("joint table does not match (x_bits, z_bits)")
        table = dist.mass.reshape(1 << self.x_bits, 1 << self.z_bits)
        object.__setattr__(self, "mass", dist.mass)
        if self.marginal_x is None:
            object.__setattr__(self, "marginal_x", FiniteDistribution.from_values(table.sum(axis=1)))
        elif not np.allclose(self.marginal_x.mass, table.sum(axis=1), atol=SUM_TOL, rtol=0):
            raise InvalidParameter("stated x-marginal disagrees with the joint table")
        object.__setattr__(self, "marginal_z", FiniteDistribution.from_values(table.sum(axis=0)))

    @classmethod
    def from_kernel(cls, marginal_x: FiniteDistribution, kernel: SimulatorKernel) -> "JointDistribution":
        if kernel.rows.shape[0] != marginal_x.size:
            raise DomainMismatch("kernel and marginal disagree on |X|")
        mass = (marginal_x.mass[:, None] * kernel.rows).reshape(-1)
        return cls(mass / math.fsum(mass), kernel.x_bits, kernel.z_bits, marginal_x)

    @property
    def table(self) -> np.ndarray:
        return self.mass.reshape(1 << self.x_bits, 1 << self.z_bits)

    @property
    def distribution(self) -> FiniteDistribution:
        return FiniteDistribution(self.mass)

    def conditional_kernel(self) -> SimulatorKernel:
        """Pr[Z = z | X = x]; rows with zero x-mass default to uniform."""
        table = self.table
        px = table.sum(axis=1, keepdims=True)
        rows = np.where(px > 0, table / np.where(px > 0, px, 1.0), 1.0 / table.shape[1])
        rows = rows / rows.sum(axis=1, keepdims=True)
        return SimulatorKernel(rows)


# --- payoff modes ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Unpredictability:
    """v(A, X) = Pr_X[A = f] = (1 + E_X A*f) / 2 for a +-1 target f."""

    f: TestFunction
    tag: str = field(default="unpredictability", init=False)

    def __post_init__(self):
        if not np.all(np.abs(self.f.values) == 1.0):
            raise InvalidParameter("the unpredictability target must take values +-1")


@dataclass(frozen=True, eq=False)
class Distinguishing:
    """v(A, X) = E A(reference) - E A(X)."""

    reference: FiniteDistribution
    tag: str = field(default="distinguishing", init=False)


@dataclass(frozen=True, eq=False)
class Simulation:
    """v(A, h) = E A(X, h(X)) - E A(X, Z) for the pair (X, Z) in ``joint``."""

    joint: JointDistribution
    tag: str = field(default="simulation", init=False)


PayoffMode = Union[Unpredictability, Distinguishing, Simulation]
Strategy = Union[TestFunction, MixedStrategy]


def normalize_measure(m: BoundedMeasure) -> FiniteDistribution:
    total = math.fsum(m.mass)
    if total <= 0.0:
        raise ZeroMass("cannot normalize a measure of zero mass")
    if abs(total - 1.0) <= SUM_TOL:
        # already a distribution; dividing would only perturb the last bits
        return FiniteDistribution(m.mass)
    return FiniteDistribution(m.mass / total)


def min_entropy(d: FiniteDistribution) -> float:
    return float(-math.log2(d.mass.max()))


def _values(a) -> np.ndarray:
    if isinstance(a, (TestFunction, MixedStrategy)):
        return a.values
    return np.asarray(a, dtype=float)


def _as_distribution(x, mode) -> FiniteDistribution:
    if isinstance(mode, Simulation):
        if isinstance(x, SimulatorKernel):
            x = JointDistribution.from_kernel(mode.joint.marginal_x, x)
        if isinstance(x, JointDistribution):
            if (x.x_bits, x.z_bits) != (mode.joint.x_bits, mode.joint.z_bits):
                raise DomainMismatch("simulated pair and reference joint differ in shape")
            return x.distribution
    return x


def payoff_table(tables: np.ndarray, x, mode: PayoffMode) -> np.ndarray:
    """Payoffs of each row of ``tables`` (shape (m, N)) against ``x``."""
    dist = _as_distribution(x, mode)
    tables = np.atleast_2d(np.asarray(tables, dtype=float))
    if tables.shape[1] != dist.size:
        raise DomainMismatch(f"functions on {tables.shape[1]} points vs distribution on {dist.size}")
    if isinstance(mode, Unpredictability):
        if mode.f.size != dist.size:
            raise DomainMismatch("target f and distribution differ in size")
        return 0.5 * (1.0 + tables @ (mode.f.values * dist.mass))
    if isinstance(mode, Distinguishing):
        if mode.reference.size != dist.size:
            raise DomainMismatch("reference and distribution differ in size")
        return tables @ mode.reference.mass - tables @ dist.mass
    if isinstance(mode, Simulation):
        return tables @ dist.mass - tables @ mode.joint.mass
    raise InvalidParameter(f"unknown payoff mode {mode!r}")


def payoff(a: Strategy, x, mode: PayoffMode) -> float:
    if isinstance(a, MixedStrategy):
        tables = np.vstack([f.values for f in a.functions])
        return float(a.weights @ payoff_table(tables, x, mode))
    return float(payoff_table(_values(a), x, mode)[0])


def lp_norm(f, nu: FiniteDistribution, p: float) -> float:
    """(E_{x<-nu} |f(x)|^p)^(1/p); ``p = inf`` gives the max over supp(nu)."""
    values = np.abs(_values(f))
    if values.shape != nu.mass.shape:
        raise DomainMismatch("function and measure differ in size")
    if math.isinf(p) and p > 0:
        return float(values[nu.mass > 0].max())
    if not p >= 1.0:
        raise InvalidExponent(f"need p >= 1, got {p}")
    top = values.max()
    if top == 0.0:
        return 0.0
    # scale out the max so large p does not underflow
    return float(top * (nu.mass @ (values / top) ** p) ** (1.0 / p))


def class_advantage(functions: Sequence[TestFunction], x, mode: PayoffMode) -> tuple:
    """Best payoff over a finite class and the lowest index attaining it."""
    if len(functions) == 0:
        raise EmptyClass("class_advantage needs a nonempty class")
    values = payoff_table(np.vstack([_values(f) for f in functions]), x, mode)
    best = int(np.argmax(values))
    return float(values[best]), best


def close_under_negation(functions: Sequence[TestFunction]) -> list:
    """The class followed by the complements of its members, in order."""
    return list(functions) + [f.negation() for f in functions]


def strategy_indices(strategy: MixedStrategy, functions: Sequence[TestFunction]) -> tuple:
    """(index, weight) pairs locating each component of ``strategy`` in ``functions`` by identity."""
    position = {id(f): i for i, f in enumerate(functions)}
    return tuple((position[id(f)], float(w)) for w, f in strategy.components)
