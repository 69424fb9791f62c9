"""Constructive hardcore measures for functions that a class cannot predict well.

Given f with values +-1, a class of predictors and a base distribution V,
build_hardcore finds a measure of density eps under V on which every
predictor (and its negation) agrees with f with probability at most
(1 + delta) / 2. The measure is the constrained player's equilibrium strategy
in the game between the class and all density-eps measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
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
    FiniteDistribution,
    MixedStrategy,
    TestFunction,
    Unpredictability,
    _values,
    close_under_negation,
    strategy_indices,
    normalize_measure,
)
from .errors import EmptyClass, InvalidDensity, InvalidParameter, PremiseViolated
from .game import ConstraintSet, capped_greedy, solve_zero_sum


def _check_target(f: TestFunction) -> None:
    if not np.all(np.abs(np.abs(f.values) - 1.0) <= 1e-12):
        raise InvalidParameter("the target f must take values +-1")


def weak_hardcore_oracle(a, f: TestFunction, v: FiniteDistribution, eps: float) -> BoundedMeasure:
    """The density-eps measure under ``v`` minimizing E[a * f].

    Mass eps is poured onto the points of lowest a(x) f(x) (ties by index),
    each capped at v(x); the last point may be filled fractionally.
    """
    if not 0.0 < eps <= 1.0:
        raise InvalidDensity(f"density must lie in (0, 1], got {eps}")
    _check_target(f)
    scores = _values(a) * f.values
    mass = capped_greedy(scores, v.mass, total=eps)
    return BoundedMeasure(mass, v, eps)


def _correlations(functions, f: TestFunction, x: FiniteDistribution) -> np.ndarray:
    tables = np.vstack([_values(a) for a in functions])
    return tables @ (f.values * x.mass)


@dataclass(frozen=True, eq=False)
class HardcoreCertificate:
    event: BoundedMeasure
    max_advantage: float
    strategy_support: int
    epsilon: float
    delta: float
    tau: float
    advantages: tuple = ()
    strategy: Optional[MixedStrategy] = None
    strategy_indices: tuple = ()
    game_value: float = float("nan")
    gap: float = 0.0
    rounds: int = 0
    sparsify_error: float = 0.0
    sparsify_bound: float = 0.0
    exponent: float = 2.0
    holder_slack: float = 0.0

    @property
    def parameters(self) -> tuple:
        return (self.epsilon, self.delta, self.tau)

    @property
    def density(self) -> float:
        return self.event.total


def build_hardcore(
    f: TestFunction,
    functions: Sequence[TestFunction],
    v: FiniteDistribution,
    eps: float,
    delta: float,
    tau: Optional[float] = None,
    *,
    seed: int = 0,
    max_rounds: int = 20_000,
) -> HardcoreCertificate:
    """Build a density-eps hardcore measure for f against ``functions``.

    Raises PremiseViolated when some predictor (or its negation) agrees with f
    with probability above 1 - eps/2 under ``v``, or when the equilibrium
    mixture of predictors beats every density-eps measure by more than delta;
    the offending predictor is the witness either way.
    """
    if not 0.0 < eps <= 1.0:
        raise InvalidDensity(f"density must lie in (0, 1], got {eps}")
    if not 0.0 < delta <= 1.0:
        raise InvalidParameter("delta must lie in (0, 1]")
    tau = delta / 10.0 if tau is None else tau
    if not tau > 0.0:
        raise InvalidParameter("tau must be positive")
    _check_target(f)
    functions = list(functions)
    if not functions:
        raise EmptyClass("a hardcore measure needs a nonempty class")

    corr = _correlations(functions, f, v)
    worst = int(np.argmax(np.abs(corr)))
    if abs(corr[worst]) > 1.0 - eps + SUM_TOL:
        raise PremiseViolated(
            f"predictor {worst} agrees with f with probability {(1 + abs(corr[worst])) / 2:.6g} > 1 - eps/2",
            functions[worst] if corr[worst] > 0 else functions[worst].negation(),
        )

    players = close_under_negation(functions)
    mode = Unpredictability(f)
    constraint = ConstraintSet.density(eps, v)
    # advantages are twice the payoff distance from 1/2, so halve the tolerance
    result = solve_zero_sum(players, constraint, mode, tolerance=tau / 2.0, max_rounds=max_rounds)
    if 2.0 * result.lower - 1.0 > delta:
        raise PremiseViolated(
            f"a mixture of predictors keeps advantage {2 * result.lower - 1:.4g} > delta on every density-eps measure",
            result.a_strategy,
        )

    conditional = result.c_strategy
    # exactly eps of mass, each point capped by v
    event = BoundedMeasure(np.minimum(eps * conditional.mass, v.mass), v, eps)
    advantages = np.abs(_correlations(functions, f, normalize_measure(event)))

    p, ell_formula = choose_holder_exponent("hardcore", min(eps, 0.5))
    ell = ell_formula(delta)
    report = sparsify_lp(result.a_strategy, ell, p, v, seed=seed, strict=False)
    # payoff change of the sparse strategy on any density-eps measure is at most this
    holder_slack = 0.5 * moment_bound(constraint, holder_conjugate(p)) * report.achieved_error

    return HardcoreCertificate(
        event=event,
        max_advantage=float(advantages.max()),
        strategy_support=report.result.support,
        epsilon=eps,
        delta=delta,
        tau=tau,
        advantages=tuple(float(x) for x in advantages),
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
class HardcoreVerification:
    density: float
    density_ok: bool
    advantages: tuple
    passed: tuple
    bound: float

    @property
    def ok(self) -> bool:
        return self.density_ok and all(self.passed)

    @property
    def max_advantage(self) -> float:
        return max(self.advantages, default=0.0)

    def failures(self) -> list:
        return [i for i, ok in enumerate(self.passed) if not ok]


def verify_hardcore(cert: HardcoreCertificate, f: TestFunction, functions: Sequence[TestFunction],
                    v: FiniteDistribution) -> HardcoreVerification:
    """Recompute the density and each predictor's advantage from scratch."""
    mass = cert.event.mass
    total = math.fsum(mass)
    density_ok = (
        mass.shape == v.mass.shape
        and bool(np.all(mass >= -SUM_TOL))
        and bool(np.all(mass <= v.mass + SUM_TOL))
        and cert.epsilon - SUM_TOL <= total <= 1.0 + SUM_TOL
    )
    bound = cert.delta + cert.tau
    functions = list(functions)
    if not functions or total <= 0.0:
        return HardcoreVerification(total, density_ok, (), (), bound)
    conditional = FiniteDistribution(np.clip(mass, 0.0, None) / math.fsum(np.clip(mass, 0.0, None)))
    advantages = []
    for a in functions:
        agree = float(np.sum(conditional.mass * (a.values * f.values)))
        advantages.append(abs(agree))
    passed = tuple(x <= bound + SUM_TOL for x in advantages)
    return HardcoreVerification(total, density_ok, tuple(advantages), passed, bound)
