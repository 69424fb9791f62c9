"""Zero-sum games between a finite function class and a convex set of distributions.

Both players run optimistic entropic follow-the-regularized-leader (for the
function player this is optimistic multiplicative weights). Exact best
responses certify the duality gap of the time averages. Every constraint set used here is a product of capped
simplices ``{z : 0 <= z <= cap, sum z = 1}`` (or of plain simplices, for
kernels), so its linear minimizer is a greedy fill with at most one
fractional atom per block.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    SUM_TOL,
    Distinguishing,
    FiniteDistribution,
    JointDistribution,
    MixedStrategy,
    PayoffMode,
    Simulation,
    SimulatorKernel,
    TestFunction,
    Unpredictability,
    BoundedMeasure,
)
from .errors import (
    DomainMismatch,
    EmptyClass,
    InfeasibleConstraint,
    InvalidParameter,
    NoConvergence,
    UnsupportedConstraint,
)

TAGS = ("density", "minentropy", "conditioned_minentropy", "dense", "kernels")


def capped_greedy(scores, caps, maximize: bool = False, total: float = 1.0) -> np.ndarray:
    """Minimize (or maximize) <scores, z> over 0 <= z <= caps, sum z = total.

    Points are filled in score order, ties broken by ascending index; the
    last point touched may be filled fractionally.
    """
    scores = np.asarray(scores, dtype=float)
    caps = np.asarray(caps, dtype=float)
    if math.fsum(caps) < total * (1.0 - 1e-12):
        raise InfeasibleConstraint("caps cannot carry the required mass")
    order = np.argsort(-scores if maximize else scores, kind="stable")
    c = caps[order]
    before = np.concatenate(([0.0], np.cumsum(c)[:-1]))
    take = np.clip(total - before, 0.0, c)
    z = np.zeros_like(scores)
    z[order] = take
    return z


@dataclass(frozen=True, eq=False)
class ConditionedPoint:
    """A member of the conditioned min-entropy set: an event on the
    reference (as the conditional ``reference | E``) and a model distribution."""

    conditional: FiniteDistribution
    model: FiniteDistribution
    reference: FiniteDistribution
    epsilon: float

    @property
    def event(self) -> BoundedMeasure:
        mass = np.minimum((1.0 - self.epsilon) * self.conditional.mass, self.reference.mass)
        return BoundedMeasure(mass, self.reference, 1.0 - self.epsilon)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    tag: str
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    k: Optional[float] = None
    bit_width: Optional[int] = None
    reference: Optional[FiniteDistribution] = None
    x_bits: Optional[int] = None
    z_bits: Optional[int] = None
    base: Optional[tuple] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise InvalidParameter(f"unknown constraint tag {self.tag!r}")
        if self.epsilon is not None and not 0.0 < self.epsilon <= 1.0:
            raise InvalidParameter("epsilon must lie in (0, 1]")
        if self.delta is not None and not 0.0 < self.delta <= 1.0:
            raise InvalidParameter("delta must lie in (0, 1]")
        if self.k is not None and not 0.0 <= self.k:
            raise InvalidParameter("k must be nonnegative")
        if self.k is not None and self.bit_width is not None and self.k > self.bit_width + 1e-12:
            raise InfeasibleConstraint(f"min-entropy {self.k} exceeds {self.bit_width} bits")

    # -- constructors -----------------------------------------------------

    @classmethod
    def density(cls, epsilon: float, reference: FiniteDistribution) -> "ConstraintSet":
        """All V|E with Pr[E] >= epsilon."""
        return cls("density", epsilon=epsilon, reference=reference)

    @classmethod
    def minentropy(cls, k: float, bit_width: int) -> "ConstraintSet":
        """All X' on {0,1}^bit_width with H_inf(X') >= k."""
        return cls("minentropy", k=k, bit_width=bit_width)

    @classmethod
    def conditioned_minentropy(cls, k: float, epsilon: float, reference: FiniteDistribution) -> "ConstraintSet":
        """Pairs (reference|E, X') with Pr[E] >= 1 - epsilon and H_inf(X') >= k."""
        if not 0.0 <= epsilon < 1.0:
            raise InvalidParameter("epsilon must lie in [0, 1)")
        return cls("conditioned_minentropy", epsilon=epsilon or None, k=k,
                   bit_width=reference.bit_width, reference=reference)

    @classmethod
    def dense(cls, delta: float, reference: FiniteDistribution) -> "ConstraintSet":
        """All W with W(x) <= reference(x) / delta."""
        return cls("dense", delta=delta, reference=reference)

    @classmethod
    def kernels(cls, x_bits: int, z_bits: int, base: Optional[Sequence[SimulatorKernel]] = None) -> "ConstraintSet":
        """Convex hull of ``base``, or of all deterministic kernels when omitted."""
        if base is not None:
            base = tuple(base)
            if not base:
                raise EmptyClass("kernel base must be nonempty")
            if any(b.rows.shape != (1 << x_bits, 1 << z_bits) for b in base):
                raise DomainMismatch("base kernels differ in shape")
        return cls("kernels", x_bits=x_bits, z_bits=z_bits, base=base)

    # -- geometry -----------------------------------------------------------

    @property
    def eps(self) -> float:
        return self.epsilon or 0.0

    @property
    def size(self) -> int:
        """Points per block of the underlying domain."""
        if self.tag == "kernels":
            return 1 << (self.x_bits + self.z_bits)
        if self.reference is not None:
            return self.reference.size
        return 1 << self.bit_width

    @property
    def dimension(self) -> int:
        return 2 * self.size if self.tag == "conditioned_minentropy" else self.size

    def caps(self) -> np.ndarray:
        if self.tag == "density":
            return self.reference.mass / self.epsilon
        if self.tag == "dense":
            return self.reference.mass / self.delta
        if self.tag == "minentropy":
            return np.full(self.size, 2.0 ** -self.k)
        if self.tag == "conditioned_minentropy":
            return np.concatenate((self.reference.mass / (1.0 - self.eps), np.full(self.size, 2.0 ** -self.k)))
        raise UnsupportedConstraint("kernel sets are not capped simplices")

    def _check_feasible(self):
        if self.tag == "minentropy" and 2.0 ** -self.k * self.size < 1.0 - 1e-12:
            raise InfeasibleConstraint(f"no distribution on {self.size} points has min-entropy {self.k}")
        if self.tag == "conditioned_minentropy" and self.k > self.bit_width + 1e-12:
            raise InfeasibleConstraint(f"min-entropy {self.k} exceeds {self.bit_width} bits")

    def minimize(self, scores, maximize: bool = False) -> np.ndarray:
        """An exact minimizer (maximizer) of <scores, z> over the set."""
        scores = np.asarray(scores, dtype=float)
        if scores.shape != (self.dimension,):
            raise DomainMismatch(f"score vector of length {scores.size} for a {self.dimension}-dim set")
        self._check_feasible()
        if self.tag == "kernels":
            if self.base is not None:
                vertices = self._base_matrix()
                vals = vertices @ scores
                j = int(np.argmax(vals) if maximize else np.argmin(vals))
                return vertices[j].copy()
            table = scores.reshape(1 << self.x_bits, 1 << self.z_bits)
            pick = np.argmax(table, axis=1) if maximize else np.argmin(table, axis=1)
            z = np.zeros_like(table)
            z[np.arange(table.shape[0]), pick] = 1.0
            return z.reshape(-1)
        caps = self.caps()
        if self.tag == "conditioned_minentropy":
            n = self.size
            return np.concatenate((capped_greedy(scores[:n], caps[:n], maximize),
                                   capped_greedy(scores[n:], caps[n:], maximize)))
        return capped_greedy(scores, caps, maximize)

    def _base_matrix(self) -> np.ndarray:
        return np.vstack([b.rows.reshape(-1) for b in self.base])

    def contains(self, z, tol: float = 1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dimension,) or z.min() < -tol:
            return False
        if self.tag == "kernels":
            rows = z.reshape(1 << self.x_bits, 1 << self.z_bits)
            if np.max(np.abs(rows.sum(axis=1) - 1.0)) > tol:
                return False
            if self.base is None:
                return True
            # membership in a finite hull: nonnegative least squares on the simplex
            from scipy.optimize import nnls

            vertices = self._base_matrix()
            a = np.vstack((vertices.T, np.ones(len(self.base))))
            b = np.concatenate((z, [1.0]))
            _, resid = nnls(a, b)
            return resid <= math.sqrt(tol)
        caps = self.caps()
        blocks = [slice(0, self.size)] + ([slice(self.size, 2 * self.size)] if self.tag == "conditioned_minentropy" else [])
        for blk in blocks:
            if abs(math.fsum(z[blk]) - 1.0) > tol:
                return False
        return bool(np.all(z <= caps * (1.0 + tol) + tol))

    def realize(self, z):
        """Turn a vector point of the set into its user-facing object."""
        z = np.asarray(z, dtype=float)
        if self.tag == "kernels":
            rows = z.reshape(1 << self.x_bits, 1 << self.z_bits)
            return SimulatorKernel(rows / rows.sum(axis=1, keepdims=True))
        if self.tag == "conditioned_minentropy":
            n = self.size
            return ConditionedPoint(_dist(z[:n]), _dist(z[n:]), self.reference, self.eps)
        return _dist(z)

    def vectorize(self, point) -> np.ndarray:
        if isinstance(point, ConditionedPoint):
            return np.concatenate((point.conditional.mass, point.model.mass))
        if isinstance(point, SimulatorKernel):
            return point.rows.reshape(-1).copy()
        if isinstance(point, JointDistribution):
            return point.conditional_kernel().rows.reshape(-1)
        return np.asarray(point.mass, dtype=float).copy()


def _dist(z) -> FiniteDistribution:
    z = np.clip(np.asarray(z, dtype=float), 0.0, None)
    return FiniteDistribution(z / math.fsum(z))


# --- payoff systems ------------------------------------------------------


def _tables(functions) -> np.ndarray:
    if len(functions) == 0:
        raise EmptyClass("the function class is empty")
    return np.vstack([np.asarray(f.values if hasattr(f, "values") else f, dtype=float) for f in functions])


def payoff_system(functions, constraint: ConstraintSet, mode: PayoffMode):
    """Return (offset, gain) with payoff(A_i, z) = offset[i] + gain[i] @ z."""
    tables = _tables(functions)
    m, n = tables.shape
    if constraint.tag == "kernels":
        if not isinstance(mode, Simulation):
            raise UnsupportedConstraint("kernel sets pair only with simulation payoffs")
        joint = mode.joint
        if (joint.x_bits, joint.z_bits) != (constraint.x_bits, constraint.z_bits) or n != joint.mass.size:
            raise DomainMismatch("kernel set, joint and functions disagree in shape")
        px = np.repeat(joint.marginal_x.mass, 1 << joint.z_bits)
        return -(tables @ joint.mass), tables * px
    if n != constraint.size:
        raise DomainMismatch(f"functions on {n} points vs constraint on {constraint.size}")
    if constraint.tag == "conditioned_minentropy":
        if not isinstance(mode, Distinguishing):
            raise UnsupportedConstraint("conditioned min-entropy sets pair only with distinguishing payoffs")
        return np.zeros(m), np.hstack((tables, -tables))
    if isinstance(mode, Unpredictability):
        if mode.f.size != n:
            raise DomainMismatch("target f and functions differ in size")
        return np.full(m, 0.5), 0.5 * tables * mode.f.values
    if isinstance(mode, Distinguishing):
        if mode.reference.size != n:
            raise DomainMismatch("reference and functions differ in size")
        return tables @ mode.reference.mass, -tables
    raise UnsupportedConstraint(f"{mode.tag} payoffs need a kernel constraint set")


def constrained_payoffs(functions, point, constraint: ConstraintSet, mode: PayoffMode) -> np.ndarray:
    """Payoff of every function against one member of the constraint set."""
    offset, gain = payoff_system(functions, constraint, mode)
    return offset + gain @ constraint.vectorize(point)


def best_response_constrained(a, c: ConstraintSet, mode: PayoffMode, maximize: bool = False):
    """The exact payoff minimizer (or maximizer) over ``c`` against ``a``."""
    if isinstance(a, MixedStrategy):
        functions, weights = a.functions, a.weights
    else:
        functions, weights = [a], np.ones(1)
    _, gain = payoff_system(functions, c, mode)
    return c.realize(c.minimize(weights @ gain, maximize=maximize))


# --- solver --------------------------------------------------------------


@dataclass(eq=False)
class EquilibriumResult:
    value: float
    a_strategy: MixedStrategy
    c_strategy: object
    gap: float
    rounds: int
    converged: bool = True
    lower: float = float("nan")
    upper: float = float("nan")
    transcript: list = field(default_factory=list)


def _softmax(logits: np.ndarray) -> np.ndarray:
    w = np.exp(logits - logits.max())
    return w / w.sum()


def capped_softmax(logits, caps) -> np.ndarray:
    """The point z proportional to exp(logits), clipped at ``caps``, of total mass 1.

    This is the entropy-regularized response over a capped simplex; the
    normalizer is found exactly by sorting the saturation thresholds.
    """
    logits = np.asarray(logits, dtype=float)
    caps = np.asarray(caps, dtype=float)
    z = np.zeros_like(logits)
    live = np.flatnonzero(caps > 0.0)
    a = logits[live]
    cp = caps[live]
    theta = np.log(cp) - a
    order = np.argsort(theta, kind="stable")
    th, a_s, c_s = theta[order], a[order], cp[order]
    rem = 1.0 - np.concatenate(([0.0], np.cumsum(c_s)[:-1]))
    lse = np.logaddexp.accumulate(a_s[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.log(rem) - lse
    ok = np.flatnonzero((rem > 0.0) & (b < th))
    if ok.size == 0:
        # the caps in saturation order already exhaust the mass
        vals = np.clip(np.minimum(c_s, rem), 0.0, None)
    else:
        vals = np.exp(np.minimum(np.log(c_s), a_s + b[ok[0]]))
    out = np.empty_like(vals)
    out[order] = vals
    z[live] = out
    return z / z.sum()


def _smoothed_response(c: ConstraintSet, losses: np.ndarray, eta: float, row_weights) -> np.ndarray:
    """Entropy-regularized minimizer of <losses, z> over ``c`` at inverse temperature ``eta``."""
    if c.tag == "kernels":
        if c.base is not None:
            vertices = c._base_matrix()
            return _softmax(-eta * (vertices @ losses)) @ vertices
        table = losses.reshape(1 << c.x_bits, 1 << c.z_bits)
        cond = np.where(row_weights[:, None] > 0, table / np.where(row_weights > 0, row_weights, 1.0)[:, None], 0.0)
        logits = -eta * cond
        rows = np.exp(logits - logits.max(axis=1, keepdims=True))
        return (rows / rows.sum(axis=1, keepdims=True)).reshape(-1)
    caps = c.caps()
    if c.tag == "conditioned_minentropy":
        n = c.size
        return np.concatenate((capped_softmax(-eta * losses[:n], caps[:n]),
                               capped_softmax(-eta * losses[n:], caps[n:])))
    return capped_softmax(-eta * losses, caps)


def solve_zero_sum(
    functions: Sequence[TestFunction],
    c: ConstraintSet,
    mode: PayoffMode,
    tolerance: float = 1e-3,
    max_rounds: int = 20_000,
    *,
    strict: bool = True,
    record_every: int = 0,
    step: float = 2.0,
) -> EquilibriumResult:
    """Approximate the equilibrium of max_A min_{X in c} payoff(A, X).

    Both players run optimistic entropic follow-the-regularized-leader; the
    time averages are certified after every round by exact best responses
    (greedy fills), and the run stops once the duality gap is at most
    ``tolerance``. With ``strict`` a run that ends above it raises
    NoConvergence carrying the result.
    """
    if not tolerance > 0:
        raise InvalidParameter("tolerance must be positive")
    functions = list(functions)
    offset, gain = payoff_system(functions, c, mode)
    c._check_feasible()
    m = len(functions)

    row_weights = None
    scale = float(np.max(np.abs(gain))) if gain.size else 0.0
    if c.tag == "kernels":
        row_weights = mode.joint.marginal_x.mass
        px = np.repeat(row_weights, 1 << c.z_bits)
        scale = float(np.max(np.abs(gain[:, px > 0] / px[px > 0]), initial=0.0))
    eta = step / scale if scale > 0 else 0.0

    gain_sum = np.zeros(m)
    loss_sum = np.zeros(c.dimension)
    last_gain = np.zeros(m)
    last_loss = np.zeros(c.dimension)
    sum_w = np.zeros(m)
    sum_z = np.zeros(c.dimension)
    sum_u = np.zeros(m)
    best_lower, best_w = -math.inf, None
    best_upper, best_zbar = math.inf, None
    transcript = []
    converged = False

    rounds = 0
    for t in range(1, max_rounds + 1):
        rounds = t
        w = _softmax(eta * (gain_sum + last_gain))
        z = _smoothed_response(c, loss_sum + last_loss, eta, row_weights)
        u = offset + gain @ z
        loss = w @ gain
        gain_sum += u
        loss_sum += loss
        last_gain, last_loss = u, loss
        sum_w += w
        sum_z += z
        sum_u += u

        wbar = sum_w / t
        lower_bar = float(wbar @ (offset + gain @ c.minimize(wbar @ gain)))
        if lower_bar > best_lower:
            best_lower, best_w = lower_bar, wbar
        upper_bar = float(np.max(sum_u / t))
        if upper_bar < best_upper:
            best_upper, best_zbar = upper_bar, sum_z / t

        gap = best_upper - best_lower
        if record_every and (t % record_every == 0 or t == 1):
            transcript.append((t, gap, 0.5 * (best_upper + best_lower)))
        if gap <= tolerance:
            converged = True
            break

    if record_every and (not transcript or transcript[-1][0] != rounds):
        transcript.append((rounds, best_upper - best_lower, 0.5 * (best_upper + best_lower)))

    weights = best_w / best_w.sum()
    a_strategy = MixedStrategy(tuple((float(wi), f) for wi, f in zip(weights, functions)))
    z_best = np.array(best_zbar)
    c_strategy = c.realize(z_best)
    # the min-max value lies in [lower, upper]; the midpoint is off by at most gap / 2
    value = 0.5 * (float(best_lower) + float(best_upper))
    result = EquilibriumResult(
        value=value,
        a_strategy=a_strategy,
        c_strategy=c_strategy,
        gap=float(best_upper - best_lower),
        rounds=rounds,
        converged=converged,
        lower=float(best_lower),
        upper=float(best_upper),
        transcript=transcript,
    )
    if strict and not converged:
        raise NoConvergence(f"duality gap {result.gap:.3g} > {tolerance} after {rounds} rounds", result)
    return result


def duality_gap(functions, c: ConstraintSet, mode: PayoffMode, result: EquilibriumResult) -> float:
    """max_A payoff(A, c_strategy) - min_{X in c} payoff(a_strategy, X)."""
    offset, gain = payoff_system(list(functions), c, mode)
    z = c.vectorize(result.c_strategy)
    upper = float(np.max(offset + gain @ z))
    tables = _tables(functions)
    # the mixture may be over a subset or reordering of ``functions``
    w = _weights_on(result.a_strategy, tables)
    lower = float(w @ (offset + gain @ c.minimize(w @ gain)))
    return upper - lower


def _weights_on(strategy: MixedStrategy, tables: np.ndarray) -> np.ndarray:
    w = np.zeros(tables.shape[0])
    for weight, f in strategy.components:
        hits = np.flatnonzero(np.all(tables == f.values, axis=1))
        if hits.size == 0:
            raise DomainMismatch("strategy uses a function outside the class")
        w[hits[0]] += weight
    return w


def write_transcript(path, transcript) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "gap", "value"])
        for t, gap, value in transcript:
            writer.writerow([t, repr(float(gap)), repr(float(value))])
