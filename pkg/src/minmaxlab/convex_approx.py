"""L_p sparsification of mixtures, Hölder bounds and moment estimates.

A mixture of many test functions is replaced by the uniform average of a
few i.i.d. draws from it. Its error in L_p(nu) is controlled by
K * C_p / l^(1 - 1/min(2, p)). Hölder's inequality then turns that error into
a payoff error, paid for by a moment of the density ratio dX/dreference
that every constraint set bounds uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    FiniteDistribution,
    MixedStrategy,
    TestFunction,
    Unpredictability,
    lp_norm,
    _values,
)
from .errors import (
    BoundNotMet,
    DomainMismatch,
    EmptyClass,
    InvalidExponent,
    InvalidParameter,
    UnsupportedConstraint,
    UnsupportedPoint,
)
from .game import ConstraintSet


@dataclass(frozen=True)
class HolderPair:
    """Conjugate exponents, 1/p + 1/q = 1; ``q`` is ``math.inf`` when p = 1."""

    p: float
    q: float

    def __post_init__(self):
        if not self.p >= 1.0 or not self.q >= 1.0:
            raise InvalidExponent("Hölder exponents must be at least 1")
        inv_q = 0.0 if math.isinf(self.q) else 1.0 / self.q
        inv_p = 0.0 if math.isinf(self.p) else 1.0 / self.p
        if abs(inv_p + inv_q - 1.0) > 1e-9:
            raise InvalidExponent(f"{self.p} and {self.q} are not conjugate")


def holder_conjugate(p: float) -> HolderPair:
    if not p >= 1.0:
        raise InvalidExponent(f"need p >= 1, got {p}")
    if p == 1.0:
        return HolderPair(1.0, math.inf)
    if math.isinf(p):
        return HolderPair(math.inf, 1.0)
    return HolderPair(float(p), p / (p - 1.0))


def maurey_constant(p: float) -> float:
    """C_p: 1 up to p = 2, then sqrt(2) * (Gamma((p+1)/2) / sqrt(pi))^(1/p)."""
    if not 1.0 <= p < math.inf:
        raise InvalidExponent(f"need 1 <= p < inf, got {p}")
    if p <= 2.0:
        return 1.0
    log_ratio = math.lgamma((p + 1.0) / 2.0) - 0.5 * math.log(math.pi)
    return math.sqrt(2.0) * math.exp(log_ratio / p)


def sparsification_bound(K: float, ell: int, p: float) -> float:
    """K * C_p / l^(1 - 1/t) with t = min(2, p)."""
    t = min(2.0, p)
    return K * maurey_constant(p) / ell ** (1.0 - 1.0 / t)


@dataclass(frozen=True, eq=False)
class SparsifyReport:
    result: MixedStrategy
    achieved_error: float
    bound: float
    attempts: int
    met: bool = True
    K: float = 0.0


def max_component_distance(mix: MixedStrategy, nu: FiniteDistribution, p: float) -> float:
    """max_i ||mix - component_i||_p over the components with positive weight."""
    centre = mix.values
    return max(lp_norm(centre - f.values, nu, p) for w, f in mix.components if w > 0.0)


def sparsify_lp(
    mix: MixedStrategy,
    ell: int,
    p: float,
    nu: FiniteDistribution,
    K: Optional[float] = None,
    seed: int = 0,
    *,
    attempts: int = 16,
    exact_if_small: bool = True,
    strict: bool = True,
) -> SparsifyReport:
    """Average ``ell`` i.i.d. draws from ``mix``, keeping the best of ``attempts`` tries.

    The error is ||mix - sample||_p under ``nu``. When no attempt meets the
    sampling bound, BoundNotMet carries the best report (with ``strict``),
    or the report is returned with ``met=False``.
    """
    if int(ell) != ell or ell < 1:
        raise InvalidParameter("ell must be a positive integer")
    if attempts < 1:
        raise InvalidParameter("attempts must be positive")
    if math.isinf(p) or not p >= 1.0:
        raise InvalidExponent(f"sparsification needs 1 <= p < inf, got {p}")
    if nu.size != mix.size:
        raise DomainMismatch("mixture and measure differ in size")
    ell = int(ell)
    if K is None:
        K = max_component_distance(mix, nu, p)
    bound = sparsification_bound(K, ell, p)

    if exact_if_small and ell >= mix.support:
        return SparsifyReport(mix, 0.0, bound, 0, True, K)

    weights = mix.weights
    functions = mix.functions
    tables = np.vstack([f.values for f in functions])
    centre = weights @ tables
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(attempts):
        counts = rng.multinomial(ell, weights / weights.sum())
        approx = (counts @ tables) / ell
        error = lp_norm(centre - approx, nu, p)
        if best is None or error < best[0]:
            best = (error, counts)
    error, counts = best
    picked = np.flatnonzero(counts)
    result = MixedStrategy(tuple((counts[i] / ell, functions[i]) for i in picked))
    met = error <= bound * (1.0 + 1e-12) + 1e-15
    report = SparsifyReport(result, float(error), float(bound), attempts, bool(met), float(K))
    if strict and not met:
        raise BoundNotMet(f"best of {attempts} draws has error {error:.4g} > bound {bound:.4g}", report)
    return report


def density_ratio_moment(x: FiniteDistribution, reference: FiniteDistribution, q: float) -> float:
    """(E_{reference} (dx/dreference)^q)^(1/q); the max ratio when q is infinite."""
    if x.size != reference.size:
        raise DomainMismatch("distribution and reference differ in size")
    outside = (reference.mass <= 0.0) & (x.mass > 0.0)
    if np.any(outside):
        raise UnsupportedPoint(f"mass on {int(np.flatnonzero(outside)[0])} outside the reference support")
    live = reference.mass > 0.0
    ratio = x.mass[live] / reference.mass[live]
    if math.isinf(q):
        return float(ratio.max())
    top = ratio.max()
    return float(top * (reference.mass[live] @ (ratio / top) ** q) ** (1.0 / q))


def holder_gap_bound(a, a_prime, x: FiniteDistribution, reference: FiniteDistribution,
                     pair: HolderPair, mode=None) -> float:
    """Hölder bound on |payoff(a, x) - payoff(a', x)|.

    Returns ||dx/dreference||_q * ||a - a'||_p, both under ``reference``,
    halved for unpredictability payoffs (whose payoffs are (1 + E A f) / 2).
    """
    diff = _values(a) - _values(a_prime)
    if diff.shape != reference.mass.shape:
        raise DomainMismatch("functions and reference differ in size")
    moment = density_ratio_moment(x, reference, pair.q)
    bound = moment * lp_norm(diff, reference, pair.p)
    return 0.5 * bound if isinstance(mode, Unpredictability) else bound


def moment_bound(c: ConstraintSet, pair: HolderPair) -> float:
    """Uniform bound on ||dX/dreference||_q over the set.

    density(eps) gives eps^(-1/p); min-entropy n - D against the uniform
    reference gives 2^(D/p); the conditioned set gives (2^D / (1 - eps))^(1/p).
    """
    inv_p = 0.0 if math.isinf(pair.p) else 1.0 / pair.p
    if c.tag == "density":
        return c.epsilon ** -inv_p
    if c.tag == "dense":
        return c.delta ** -inv_p
    if c.tag == "minentropy":
        return 2.0 ** ((c.bit_width - c.k) * inv_p)
    if c.tag == "conditioned_minentropy":
        return (2.0 ** (c.bit_width - c.k) / (1.0 - c.eps)) ** inv_p
    raise UnsupportedConstraint(f"no moment bound for {c.tag} sets")


def choose_holder_exponent(purpose: str, parameter: float, *, natural_log: bool = False):
    """Pick p and the matching sparsity ell(delta) = ceil(p / (2 delta^2)).

    ``hardcore`` takes eps and uses p = max(2, 2 log(1/eps)); ``metric`` takes
    the entropy deficiency D and uses p = max(1, D + 1). Logs are base 2
    unless ``natural_log`` is set.
    """
    if purpose == "hardcore":
        eps = parameter
        if not 0.0 < eps <= 0.5:
            raise InvalidParameter("hardcore exponent needs eps in (0, 1/2]")
        log = math.log if natural_log else math.log2
        p = max(2.0, 2.0 * log(1.0 / eps))
    elif purpose == "metric":
        if not parameter >= 0.0:
            raise InvalidParameter("entropy deficiency must be nonnegative")
        p = max(1.0, parameter + 1.0)
    else:
        raise InvalidParameter(f"unknown purpose {purpose!r}")

    def ell_formula(delta: float) -> int:
        if not 0.0 < delta <= 1.0:
            raise InvalidParameter("delta must lie in (0, 1]")
        # shave rounding noise so that e.g. 1 / 0.1**2 does not round up
        return max(1, math.ceil(p / (2.0 * delta * delta) * (1.0 - 1e-12)))

    return p, ell_formula


def estimate_class_variance(functions: Sequence[TestFunction], x: FiniteDistribution) -> float:
    """max over the class of E_{x<-X} Var_{z<-uniform} A(x, z)."""
    if len(functions) == 0:
        raise EmptyClass("variance of an empty class")
    best = 0.0
    for f in functions:
        values = _values(f)
        if values.size % x.size:
            raise DomainMismatch(f"table of {values.size} entries over {x.size} inputs")
        table = values.reshape(x.size, -1)
        best = max(best, float(x.mass @ table.var(axis=1)))
    return best
