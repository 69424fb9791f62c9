"""From metric pseudoentropy to HILL pseudoentropy, and dense models.

build_hill_hardcore conditions Y on an event of probability 1 - eps so that a
single distribution of min-entropy n - D fools the whole class.
build_dense_model finds, for a distribution X' that is dense inside a
pseudorandom X, a model R' dense inside the uniform distribution that the
class cannot tell apart from X'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .convex_approx import (
    choose_holder_exponent,
    holder_conjugate,
    moment_bound,
    sparsify_lp,
)
from .core import (
    SUM_TOL,
    BoundedMeasure,
    Distinguishing,
    FiniteDistribution,
    MixedStrategy,
    TestFunction,
    _values,
    close_under_negation,
    strategy_indices,
    min_entropy,
    normalize_measure,
)
from .errors import EmptyClass, InvalidParameter, PremiseViolated
from .game import ConstraintSet, solve_zero_sum


def _tables(functions) -> np.ndarray:
    return np.vstack([_values(a) for a in functions])


# --- metric entropy -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricWitness:
    """A function whose mean under Y no min-entropy-k distribution gets within eps of."""

    index: int
    function: TestFunction
    gap: float
    nearest: FiniteDistribution


def metric_entropy_check(y: FiniteDistribution, functions: Sequence[TestFunction], k: float, eps: float):
    """Check that each function alone is fooled by some min-entropy-k distribution.

    For every A the achievable means E A(Y') over H_inf(Y') >= k form an
    interval whose ends are capped-greedy fills. Returns ``(True, None)`` or
    ``(False, MetricWitness)`` for the first A whose mean under Y lies more
    than eps outside its interval.
    """
    c = ConstraintSet.minentropy(k, y.bit_width)
    for i, a in enumerate(functions):
        values = _values(a)
        target = float(y.mass @ values)
        low = c.minimize(values)
        high = c.minimize(values, maximize=True)
        lo, hi = float(low @ values), float(high @ values)
        if target > hi:
            gap, nearest = target - hi, high
        elif target < lo:
            gap, nearest = lo - target, low
        else:
            gap, nearest = 0.0, None
        if gap > eps + SUM_TOL:
            return False, MetricWitness(i, a, gap, FiniteDistribution(nearest))
    return True, None


# --- metric to HILL --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HillCertificate:
    event: BoundedMeasure
    model: FiniteDistribution
    max_advantage: float
    delta_bits: float
    epsilon: float
    delta: float
    tau: float
    ell: int
    advantages: tuple = ()
    strategy: Optional[MixedStrategy] = None
    strategy_indices: tuple = ()
    game_value: float = float("nan")
    gap: float = 0.0
    rounds: int = 0
    sparsify_error: float = 0.0
    sparsify_bound: float = 0.0
    exponent: float = 1.0
    holder_slack: float = 0.0

    @property
    def parameters(self) -> tuple:
        return (self.delta_bits, self.epsilon, self.delta, self.tau, self.ell)

    @property
    def conditional(self) -> FiniteDistribution:
        return normalize_measure(self.event)


def build_hill_hardcore(
    y: FiniteDistribution,
    functions: Sequence[TestFunction],
    delta_bits: float,
    eps: float,
    delta: float,
    tau: Optional[float] = None,
    *,
    premise_eps: Optional[float] = None,
    seed: int = 0,
    max_rounds: int = 20_000,
) -> HillCertificate:
    """Find an event E with Pr[E] = 1 - eps and a model X' of min-entropy n - D
    such that |E A(Y|E) - E A(X')| <= delta + tau for every A in the class.

    The metric-entropy premise (quality ``premise_eps``, default eps) is
    checked first; a class mixture that no (E, X') pair can fool within delta
    is reported as PremiseViolated as well.
    """
    if not 0.0 <= eps < 1.0:
        raise InvalidParameter("eps must lie in [0, 1)")
    if not 0.0 < delta <= 1.0:
        raise InvalidParameter("delta must lie in (0, 1]")
    tau = delta / 10.0 if tau is None else tau
    functions = list(functions)
    if not functions:
        raise EmptyClass("a HILL certificate needs a nonempty class")
    n = y.bit_width
    k = n - delta_bits
    if not 0.0 <= k <= n:
        raise InvalidParameter("entropy deficiency must lie in [0, n]")

    holds, witness = metric_entropy_check(y, functions, k, eps if premise_eps is None else premise_eps)
    if not holds:
        raise PremiseViolated(
            f"function {witness.index} keeps distance {witness.gap:.4g} from every min-entropy-{k} distribution",
            witness,
        )

    players = close_under_negation(functions)
    constraint = ConstraintSet.conditioned_minentropy(k, eps, y)
    result = solve_zero_sum(players, constraint, Distinguishing(y), tolerance=tau, max_rounds=max_rounds)
    if result.lower > delta:
        raise PremiseViolated(
            f"a class mixture keeps advantage {result.lower:.4g} > delta against every conditioned model",
            result.a_strategy,
        )

    point = result.c_strategy
    event = point.event
    model = point.model
    conditional = normalize_measure(event)
    tables = _tables(functions)
    advantages = np.abs(tables @ conditional.mass - tables @ model.mass)

    p, _ = choose_holder_exponent("metric", delta_bits)
    ell = max(1, math.ceil((delta_bits + 1.0) / (delta * delta) * (1.0 - 1e-12)))
    uniform = FiniteDistribution.uniform(y.size)
    report = sparsify_lp(result.a_strategy, ell, p, uniform, seed=seed, strict=False)
    holder_slack = moment_bound(ConstraintSet.minentropy(k, n), holder_conjugate(p)) * report.achieved_error

    return HillCertificate(
        event=event,
        model=model,
        max_advantage=float(advantages.max()),
        delta_bits=float(delta_bits),
        epsilon=eps,
        delta=delta,
        tau=tau,
        ell=ell,
        advantages=tuple(float(a) for a in advantages),
        strategy=report.result,
        strategy_indices=strategy_indices(report.result, players),
        game_value=result.value,
        gap=result.gap,
        rounds=result.rounds,
        sparsify_error=report.achieved_error,
        sparsify_bound=report.bound,
        exponent=p,
        holder_slack=holder_slack,
    )


@dataclass(frozen=True)
class HillVerification:
    model_entropy: float
    entropy_ok: bool
    event_mass: float
    event_ok: bool
    advantages: tuple
    passed: tuple
    composed_advantage: float
    mixture_advantage: float
    composition_ok: bool

    @property
    def ok(self) -> bool:
        return self.entropy_ok and self.event_ok and all(self.passed) and self.composition_ok

    @property
    def max_advantage(self) -> float:
        return max(self.advantages, default=0.0)


def off_event(y: FiniteDistribution, event: BoundedMeasure) -> Optional[FiniteDistribution]:
    """Y conditioned on the complement of the event; None when the event is everything."""
    rest = np.clip(y.mass - event.mass, 0.0, None)
    total = math.fsum(rest)
    if total <= SUM_TOL:
        return None
    return FiniteDistribution(rest / total)


def verify_hill(cert: HillCertificate, y: FiniteDistribution, functions: Sequence[TestFunction]) -> HillVerification:
    """Re-check entropy, event mass, every advantage and the composed HILL bound.

    The composition step treats Y as Pr[E] Y|E + (1 - Pr[E]) Y|not E, swaps
    Y|E for the model, and checks that neither the swapped mixture nor the
    model alone is told apart from Y by more than delta + eps + 2 tau.
    """
    n = y.bit_width
    entropy = min_entropy(cert.model)
    entropy_ok = entropy >= n - cert.delta_bits - 1e-6
    mass = cert.event.mass
    total = math.fsum(mass)
    event_ok = bool(np.all(mass <= y.mass + SUM_TOL)) and total >= 1.0 - cert.epsilon - SUM_TOL
    functions = list(functions)
    bound = cert.delta + cert.tau
    if not functions:
        return HillVerification(entropy, entropy_ok, total, event_ok, (), (), 0.0, 0.0, True)
    tables = _tables(functions)
    conditional = FiniteDistribution(np.clip(mass, 0.0, None) / total)
    advantages = np.abs(tables @ conditional.mass - tables @ cert.model.mass)
    passed = tuple(bool(a <= bound + SUM_TOL) for a in advantages)

    rest = off_event(y, cert.event)
    mixture = total * cert.model.mass + (0.0 if rest is None else (1.0 - total) * rest.mass)
    mixture_adv = float(np.max(np.abs(tables @ y.mass - tables @ mixture)))
    composed_adv = float(np.max(np.abs(tables @ y.mass - tables @ cert.model.mass)))
    limit = cert.delta + cert.epsilon + 2.0 * cert.tau + SUM_TOL
    composition_ok = mixture_adv <= limit and composed_adv <= limit
    return HillVerification(entropy, entropy_ok, total, event_ok, tuple(float(a) for a in advantages), passed,
                            composed_adv, mixture_adv, composition_ok)


# --- dense models -----------------------------------------------------------


def is_dense(w: FiniteDistribution, v: FiniteDistribution, delta: float) -> bool:
    """W(x) <= V(x) / delta at every point, up to 1e-9."""
    if w.size != v.size:
        return False
    if delta <= 0.0:
        return True
    return bool(np.all(w.mass <= v.mass / delta + SUM_TOL))


@dataclass(frozen=True, eq=False)
class DenseModelCertificate:
    model: FiniteDistribution
    density_ok: bool
    max_advantage: float
    delta: float
    epsilon_prime: float
    ell: int
    epsilon: float = 0.0
    tau: float = 0.0
    constant: float = 2.0
    advantages: tuple = ()
    strategy: Optional[MixedStrategy] = None
    strategy_indices: tuple = ()
    game_value: float = float("nan")
    gap: float = 0.0
    rounds: int = 0
    sparsify_error: float = 0.0
    sparsify_bound: float = 0.0
    exponent: float = 2.0

    @property
    def parameters(self) -> tuple:
        return (self.delta, self.epsilon_prime, self.ell)

    @property
    def ratio(self) -> float:
        """Achieved advantage in units of eps / delta."""
        if self.epsilon == 0.0:
            return 0.0 if self.max_advantage <= SUM_TOL else math.inf
        return self.max_advantage / (self.epsilon / self.delta)


def class_distance(functions, a: FiniteDistribution, b: FiniteDistribution) -> tuple:
    """max_A |E A(a) - E A(b)| over the class, with the lowest maximizing index."""
    diffs = np.abs(_tables(functions) @ (a.mass - b.mass))
    i = int(np.argmax(diffs))
    return float(diffs[i]), i


def build_dense_model(
    x: FiniteDistribution,
    x_prime: FiniteDistribution,
    functions: Sequence[TestFunction],
    delta: float,
    eps: float,
    tau: Optional[float] = None,
    *,
    constant: float = 2.0,
    seed: int = 0,
    max_rounds: int = 20_000,
) -> DenseModelCertificate:
    """Find R' delta-dense in the uniform distribution with X' and R' close under the class.

    Premises checked up front: X' is delta-dense in X and X is within eps of
    uniform for every class member. The certified advantage is at most
    constant * eps / delta + tau.
    """
    if not 0.0 < delta <= 1.0:
        raise InvalidParameter("delta must lie in (0, 1]")
    if not eps >= 0.0:
        raise InvalidParameter("eps must be nonnegative")
    functions = list(functions)
    if not functions:
        raise EmptyClass("a dense model needs a nonempty class")
    uniform = FiniteDistribution.uniform(x.size)
    eps_prime = constant * eps / delta
    tau = max(eps_prime, 1e-3) / 10.0 if tau is None else tau

    if not is_dense(x_prime, x, delta):
        bad = int(np.argmax(x_prime.mass - x.mass / delta))
        raise PremiseViolated(f"X' is not {delta}-dense in X at point {bad}", bad)
    dist, i = class_distance(functions, x, uniform)
    if dist > eps + SUM_TOL:
        raise PremiseViolated(f"function {i} tells X from uniform with advantage {dist:.4g} > eps", functions[i])

    players = close_under_negation(functions)
    constraint = ConstraintSet.dense(delta, uniform)
    result = solve_zero_sum(players, constraint, Distinguishing(x_prime), tolerance=tau, max_rounds=max_rounds)
    if result.lower > eps_prime:
        raise PremiseViolated(
            f"a class mixture keeps advantage {result.lower:.4g} > {eps_prime:.4g} against every dense model",
            result.a_strategy,
        )
    model = result.c_strategy
    advantages = np.abs(_tables(functions) @ (x_prime.mass - model.mass))

    p = max(2.0, 2.0 * math.log2(1.0 / delta))
    ell = 1 if eps == 0.0 else max(1, math.ceil(max(1.0, math.log2(1.0 / delta)) * (delta / eps) ** 2 * (1.0 - 1e-12)))
    report = sparsify_lp(result.a_strategy, ell, p, uniform, seed=seed, strict=False)

    return DenseModelCertificate(
        model=model,
        density_ok=is_dense(model, uniform, delta),
        max_advantage=float(advantages.max()),
        delta=delta,
        epsilon_prime=eps_prime,
        ell=ell,
        epsilon=eps,
        tau=tau,
        constant=constant,
        advantages=tuple(float(a) for a in advantages),
        strategy=report.result,
        strategy_indices=strategy_indices(report.result, players),
        game_value=result.value,
        gap=result.gap,
        rounds=result.rounds,
        sparsify_error=report.achieved_error,
        sparsify_bound=report.bound,
        exponent=p,
    )


@dataclass(frozen=True)
class DenseVerification:
    density_ok: bool
    advantages: tuple
    passed: tuple
    ratio: float

    @property
    def ok(self) -> bool:
        return self.density_ok and all(self.passed)

    @property
    def max_advantage(self) -> float:
        return max(self.advantages, default=0.0)


def verify_dense_model(cert: DenseModelCertificate, x_prime: FiniteDistribution,
                       functions: Sequence[TestFunction]) -> DenseVerification:
    uniform = FiniteDistribution.uniform(x_prime.size)
    density_ok = is_dense(cert.model, uniform, cert.delta)
    functions = list(functions)
    if not functions:
        return DenseVerification(density_ok, (), (), 0.0)
    advantages = np.abs(_tables(functions) @ (x_prime.mass - cert.model.mass))
    bound = cert.epsilon_prime + cert.tau
    passed = tuple(bool(a <= bound + SUM_TOL) for a in advantages)
    top = float(advantages.max())
    ratio = 0.0 if cert.epsilon == 0.0 else top / (cert.epsilon / cert.delta)
    return DenseVerification(density_ok, tuple(float(a) for a in advantages), passed, ratio)
