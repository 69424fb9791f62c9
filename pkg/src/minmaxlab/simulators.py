"""Simulators for correlated auxiliary information.

build_aux_simulator replaces a leakage Z correlated with X by a kernel
h(X) that no function of the class can tell apart from the real pair
(X, Z). build_high_entropy_simulator produces, for one distinguisher D, a
distribution of nearly full min-entropy that scores on D almost as well as
the best distribution of the required min-entropy. Optionally this runs
separately for each value of a conditioning variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .convex_approx import estimate_class_variance
from .core import (
    SUM_TOL,
    FiniteDistribution,
    JointDistribution,
    MixedStrategy,
    Simulation,
    SimulatorKernel,
    TestFunction,
    _values,
    close_under_negation,
    min_entropy,
)
from .errors import (
    BoundNotMet,
    DegenerateDistinguisher,
    DomainMismatch,
    EmptyClass,
    InvalidParameter,
)
from .game import ConstraintSet, capped_greedy, solve_zero_sum


# --- auxiliary-input simulator ----------------------------------------------


def _table(a, joint: JointDistribution) -> np.ndarray:
    values = _values(a)
    shape = (1 << joint.x_bits, 1 << joint.z_bits)
    if values.size != shape[0] * shape[1]:
        raise DomainMismatch(f"table of {values.size} entries on a {shape[0]}x{shape[1]} product domain")
    return values.reshape(shape)


def simulation_advantages(functions, joint: JointDistribution, kernel: SimulatorKernel) -> np.ndarray:
    """E A(X, h(X)) - E A(X, Z) for every A, with X drawn from the joint's x-marginal."""
    simulated = joint.marginal_x.mass[:, None] * kernel.rows
    real = joint.table
    return np.array([float(np.sum(_table(a, joint) * (simulated - real))) for a in functions])


def weak_simulator_oracle(a, joint: JointDistribution):
    """A kernel fooling the single test ``a`` exactly, and its mixing weight theta.

    h+ answers argmax_z a(x, z) and h- answers argmin_z a(x, z) (ties to the
    lowest z). The kernel theta h- + (1 - theta) h+ matches E a(X, Z).
    """
    table = _table(a, joint)
    px = joint.marginal_x.mass
    width = table.shape[1]
    hi = np.argmax(table, axis=1)
    lo = np.argmin(table, axis=1)
    rows = np.arange(table.shape[0])
    plus = float(px @ table[rows, hi])
    minus = float(px @ table[rows, lo])
    real = float(np.sum(table * joint.table))
    spread = plus - minus
    theta = 0.0 if spread <= 0.0 else min(1.0, max(0.0, (plus - real) / spread))
    kernel = np.zeros_like(table)
    kernel[rows, hi] += 1.0 - theta
    kernel[rows, lo] += theta
    return SimulatorKernel(kernel), theta


@dataclass(frozen=True, eq=False)
class ChernoffReport:
    function: TestFunction
    strategy: MixedStrategy
    deviation: float
    ell: int
    attempts: int
    met: bool


def chernoff_ell(total_bits: int, eps: float) -> int:
    """Samples for sup-norm deviation eps over 2^total_bits points: ceil(2 ln2 (bits + 1) / eps^2)."""
    return max(1, math.ceil(2.0 * math.log(2.0) * (total_bits + 1) / (eps * eps) * (1.0 - 1e-12)))


def chernoff_sparsify(mix: MixedStrategy, eps: float, seed: int = 0, *, attempts: int = 16,
                      strict: bool = True) -> ChernoffReport:
    """Average of l i.i.d. components of ``mix`` within eps of it at every point.

    Components must take values in [0, 1]. The best of ``attempts`` draws is
    kept; BoundNotMet carries it when none reaches eps (with ``strict``).
    """
    if not 0.0 < eps:
        raise InvalidParameter("eps must be positive")
    tables = np.vstack([f.values for f in mix.functions])
    if tables.min() < -1e-12 or tables.max() > 1.0 + 1e-12:
        raise InvalidParameter("components must take values in [0, 1]")
    bits = int(round(math.log2(mix.size)))
    ell = chernoff_ell(bits, eps)
    centre = mix.weights @ tables
    weights = mix.weights / mix.weights.sum()
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(attempts):
        counts = rng.multinomial(ell, weights)
        deviation = float(np.max(np.abs(centre - (counts @ tables) / ell)))
        if best is None or deviation < best[0]:
            best = (deviation, counts)
    deviation, counts = best
    picked = np.flatnonzero(counts)
    functions = mix.functions
    strategy = MixedStrategy(tuple((counts[i] / ell, functions[i]) for i in picked))
    first = functions[0]
    function = TestFunction(np.clip(strategy.values, 0.0, 1.0), "[0,1]", float(strategy.support), first.aux_bits)
    met = deviation <= eps
    report = ChernoffReport(function, strategy, deviation, ell, attempts, met)
    if strict and not met:
        raise BoundNotMet(f"sup deviation {deviation:.4g} > {eps}", report)
    return report


@dataclass(frozen=True, eq=False)
class AuxSimulatorCertificate:
    kernel: SimulatorKernel
    max_advantage: float
    pre_sparsify_advantage: float
    advantages: tuple
    ell: int
    epsilon: float
    tau: float
    sigma: Optional[float] = None
    game_value: float = float("nan")
    gap: float = 0.0
    rounds: int = 0
    marginal_ok: bool = True

    @property
    def bound(self) -> float:
        return 2.0 * self.epsilon + self.tau


def aux_ell(z_bits: int, eps: float, sigma: Optional[float] = None) -> int:
    """ceil(2^lambda eps^-2), scaled by max(sigma, eps) when a deviation scale is given."""
    scale = 1.0 if sigma is None else max(sigma, eps)
    return max(1, math.ceil(2.0 ** z_bits / (eps * eps) * scale * (1.0 - 1e-12)))


def sample_kernel(kernel: SimulatorKernel, ell: int, rng: np.random.Generator) -> SimulatorKernel:
    """Average of ``ell`` deterministic kernels drawn independently row by row from ``kernel``."""
    rows = kernel.rows / kernel.rows.sum(axis=1, keepdims=True)
    counts = np.vstack([rng.multinomial(ell, r) for r in rows])
    return SimulatorKernel(counts / ell, component_count=ell)


def round_kernel(kernel: SimulatorKernel, ell: int) -> SimulatorKernel:
    """Average of ``ell`` deterministic kernels closest to ``kernel`` row by row.

    Each row gets floor(ell * p) copies of every output and the leftover
    copies go to the largest remainders (ties by index), so every entry moves
    by less than 1 / ell.
    """
    scaled = ell * kernel.rows / kernel.rows.sum(axis=1, keepdims=True)
    counts = np.floor(scaled)
    for row, target in zip(counts, scaled):
        short = ell - int(row.sum())
        if short > 0:
            row[np.argsort(-(target - row), kind="stable")[:short]] += 1.0
    return SimulatorKernel(counts / ell, component_count=ell)


def build_aux_simulator(
    joint: JointDistribution,
    functions: Sequence[TestFunction],
    eps: float,
    tau: Optional[float] = None,
    *,
    variance_mode: bool = False,
    seed: int = 0,
    attempts: int = 16,
    max_rounds: int = 20_000,
):
    """Build a kernel Sim with |E A(X, Sim(X)) - E A(X, Z)| <= 2 eps + tau for
    every A in the class and its complements.

    The equilibrium kernel of the game between the class and all kernels is
    an average of deterministic kernels; it is resampled as the average of
    l = ceil(2^lambda eps^-2) of them (times max(sigma, eps) in variance
    mode), keeping the best of ``attempts`` draws and a deterministic rounding. Returns (kernel, certificate).
    """
    if not 0.0 < eps <= 0.5:
        raise InvalidParameter("eps must lie in (0, 1/2]")
    functions = list(functions)
    if not functions:
        raise EmptyClass("a simulator needs a nonempty class")
    tau = eps / 10.0 if tau is None else tau
    for a in functions:
        _table(a, joint)

    players = close_under_negation(functions)
    constraint = ConstraintSet.kernels(joint.x_bits, joint.z_bits)
    result = solve_zero_sum(players, constraint, Simulation(joint), tolerance=tau, max_rounds=max_rounds)
    dense_kernel = result.c_strategy
    pre = float(np.max(np.abs(simulation_advantages(functions, joint, dense_kernel))))

    sigma = None
    if variance_mode:
        sigma = math.sqrt(estimate_class_variance(functions, joint.marginal_x))
    ell = aux_ell(joint.z_bits, eps, sigma)

    rng = np.random.default_rng(seed)
    best = None
    # the rounded kernel competes with the random draws
    candidates = [round_kernel(dense_kernel, ell)]
    candidates += [sample_kernel(dense_kernel, ell, rng) for _ in range(attempts)]
    for candidate in candidates:
        worst = float(np.max(np.abs(simulation_advantages(functions, joint, candidate))))
        if best is None or worst < best[0]:
            best = (worst, candidate)
    worst, kernel = best
    advantages = simulation_advantages(functions, joint, kernel)
    simulated = JointDistribution.from_kernel(joint.marginal_x, kernel)
    marginal_ok = simulated.marginal_x is joint.marginal_x or np.array_equal(
        simulated.marginal_x.mass, joint.marginal_x.mass)
    cert = AuxSimulatorCertificate(
        kernel=kernel,
        max_advantage=worst,
        pre_sparsify_advantage=pre,
        advantages=tuple(float(x) for x in advantages),
        ell=ell,
        epsilon=eps,
        tau=tau,
        sigma=sigma,
        game_value=result.value,
        gap=result.gap,
        rounds=result.rounds,
        marginal_ok=bool(marginal_ok),
    )
    if worst > cert.bound + SUM_TOL:
        raise BoundNotMet(f"simulator advantage {worst:.4g} > 2 eps + tau", cert)
    return kernel, cert


@dataclass(frozen=True)
class AuxVerification:
    advantages: tuple
    passed: tuple
    rows_ok: bool
    marginal_ok: bool

    @property
    def ok(self) -> bool:
        return self.rows_ok and self.marginal_ok and all(self.passed)

    @property
    def max_advantage(self) -> float:
        return max(self.advantages, default=0.0)


def verify_aux_simulator(cert: AuxSimulatorCertificate, joint: JointDistribution,
                         functions: Sequence[TestFunction]) -> AuxVerification:
    """Exhaustive advantage scan over the class and its complements."""
    kernel = cert.kernel
    rows_ok = bool(np.all(np.abs(kernel.rows.sum(axis=1) - 1.0) <= SUM_TOL)) and bool(np.all(kernel.rows >= 0))
    simulated = joint.marginal_x.mass[:, None] * kernel.rows
    marginal_ok = bool(np.all(np.abs(simulated.sum(axis=1) - joint.marginal_x.mass) <= SUM_TOL))
    functions = list(functions)
    if not functions:
        return AuxVerification((), (), rows_ok, marginal_ok)
    adv = np.abs(simulation_advantages(close_under_negation(functions), joint, kernel))
    passed = tuple(bool(a <= cert.bound + SUM_TOL) for a in adv)
    return AuxVerification(tuple(float(a) for a in adv), passed, rows_ok, marginal_ok)


# --- high-entropy simulator --------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelDecomposition:
    """D rounded down onto the grid alpha_i = 1 - (i - 1) eps.

    ``level[x]`` is the smallest i (1-based) with D(x) >= alpha_i; points
    below the last grid value join the last level. ``exact_d[i-1]`` and
    ``empirical_d[i-1]`` are Pr[D >= alpha_i] under u and under l samples.
    """

    alphas: np.ndarray
    level: np.ndarray
    exact_d: np.ndarray
    empirical_d: np.ndarray
    sample_count: int

    @property
    def count(self) -> int:
        return self.alphas.size

    def indicator(self, i: int) -> np.ndarray:
        """The boolean table D_i (1-based level index)."""
        return (self.level == i).astype(float)

    def union(self, i: int) -> np.ndarray:
        """The boolean table D_1 + ... + D_i."""
        return (self.level <= i).astype(float)

    def rounded(self) -> np.ndarray:
        return self.alphas[self.level - 1]


def level_decomposition(d, eps: float, u: FiniteDistribution, ell: int = 0, seed: int = 0) -> LevelDecomposition:
    """Split D into level sets and compute exact and empirical tail masses.

    With ``ell`` = 0 the empirical tail equals the exact one.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidParameter("eps must lie in (0, 1)")
    if ell < 0:
        raise InvalidParameter("sample budget must be nonnegative")
    values = _values(d)
    if values.size != u.size:
        raise DomainMismatch("distinguisher and measure differ in size")
    count = math.ceil(1.0 / eps * (1.0 - 1e-12))
    alphas = 1.0 - eps * np.arange(count)
    # first grid value not above D(x); anything below the grid joins the last level
    below = values[:, None] >= alphas[None, :] - 1e-12
    level = np.where(below.any(axis=1), np.argmax(below, axis=1) + 1, count)
    exact = np.array([float(u.mass @ (level <= i)) for i in range(1, count + 1)])
    exact[-1] = 1.0
    if ell:
        rng = np.random.default_rng(seed)
        draws = rng.choice(u.size, size=ell, p=u.mass)
        hits = np.bincount(level[draws], minlength=count + 1)[1:]
        empirical = np.cumsum(hits) / ell
    else:
        empirical = exact.copy()
    return LevelDecomposition(alphas, level, exact, empirical, int(ell))


def entropy_sample_count(n: int, delta_bits: float, eps: float) -> int:
    """l = ceil(2^D n log2(1/eps) / eps)."""
    return math.ceil(2.0 ** delta_bits * n * math.log2(1.0 / eps) / eps * (1.0 - 1e-12))


@dataclass(frozen=True, eq=False)
class HighEntropyResult:
    sampler: object
    case_taken: object
    m_prime: object
    min_entropy_achieved: float
    optimum_gap: float
    value: float = 0.0
    optimum: float = 0.0
    decomposition: object = None
    parts: tuple = ()
    z_marginal: Optional[FiniteDistribution] = None
    joint: Optional[np.ndarray] = None


def _uniform_on(indicator: np.ndarray) -> np.ndarray:
    return indicator / indicator.sum()


def _simulate_one(values: np.ndarray, n: int, delta_bits: float, eps: float, ell: int, seed: int):
    u = FiniteDistribution.uniform(1 << n)
    dec = level_decomposition(values, eps, u, ell, seed)
    dt = dec.empirical_d
    target = 2.0 ** -delta_bits
    above = np.flatnonzero(dt > 0.75 * target)
    if above.size == 0:
        raise DegenerateDistinguisher("no level carries more than 3/4 of 2^-D of the mass")
    m_prime = int(above[0]) + 1
    d_prev = 0.0 if m_prime == 1 else float(dt[m_prime - 2])
    top = dec.union(m_prime - 1)
    level = dec.indicator(m_prime)
    if d_prev < target * eps:
        case, y = "a", _uniform_on(level)
    elif d_prev > target / 16.0:
        case, y = "b", _uniform_on(top)
    else:
        w = d_prev / target
        case, y = "c", w * _uniform_on(top) + (1.0 - w) * _uniform_on(level)
    y = FiniteDistribution(y / math.fsum(y))
    best = capped_greedy(values, np.full(values.size, 2.0 ** (delta_bits - n)), maximize=True)
    value = float(y.mass @ values)
    optimum = float(best @ values)
    return y, case, m_prime, value, optimum, dec


def build_high_entropy_simulator(
    d: TestFunction,
    delta_bits: float,
    eps: float,
    joint: Optional[JointDistribution] = None,
    seed: int = 0,
    *,
    sampling: bool = False,
    sample_count: Optional[int] = None,
) -> HighEntropyResult:
    """Build a high-min-entropy Y that scores on D nearly as well as the best
    Y+ of min-entropy n - D.

    D is rounded onto an eps grid of levels. M' is the first level whose
    tail mass exceeds 3/4 of 2^-D. Y is uniform on the levels above M', on
    level M' itself, or a mixture of the two, chosen by the tail mass just
    above M'. Tail masses are exact by default; ``sampling`` estimates them
    from l = 2^D n log2(1/eps) / eps uniform samples. With ``joint`` given,
    D lives on X x Z and the construction runs once per value z, keeping
    the z-marginal of the joint.
    """
    if not 0.0 < eps <= 0.25:
        raise InvalidParameter("eps must lie in (0, 1/4]")
    values = _values(d)
    if joint is None:
        n = int(round(math.log2(values.size)))
        if not 0.0 <= delta_bits <= n:
            raise InvalidParameter("entropy deficiency must lie in [0, n]")
        ell = (sample_count or entropy_sample_count(n, delta_bits, eps)) if sampling else 0
        y, case, m_prime, value, optimum, dec = _simulate_one(values, n, delta_bits, eps, ell, seed)
        return HighEntropyResult(
            sampler=y,
            case_taken=case,
            m_prime=m_prime,
            min_entropy_achieved=min_entropy(y),
            optimum_gap=optimum - value,
            value=value,
            optimum=optimum,
            decomposition=dec,
        )

    n, m = joint.x_bits, joint.z_bits
    if values.size != joint.mass.size:
        raise DomainMismatch("distinguisher and joint differ in size")
    if not 0.0 <= delta_bits <= n:
        raise InvalidParameter("entropy deficiency must lie in [0, n]")
    table = values.reshape(1 << n, 1 << m)
    z_marginal = joint.marginal_z
    ell = (sample_count or entropy_sample_count(n, delta_bits, eps)) if sampling else 0
    parts = []
    for z in range(1 << m):
        y, case, m_prime, value, optimum, dec = _simulate_one(table[:, z], n, delta_bits, eps, ell, seed + z)
        parts.append(HighEntropyResult(y, case, m_prime, min_entropy(y), optimum - value, value, optimum, dec))
    weights = z_marginal.mass
    live = weights > 0
    samplers = tuple(p.sampler for p in parts)
    out = np.column_stack([s.mass for s in samplers]) * weights[None, :]
    value = float(sum(w * p.value for w, p in zip(weights, parts)))
    optimum = float(sum(w * p.optimum for w, p in zip(weights, parts)))
    worst = min(p.min_entropy_achieved for p, ok in zip(parts, live) if ok)
    return HighEntropyResult(
        sampler=samplers,
        case_taken=tuple(p.case_taken for p in parts),
        m_prime=tuple(p.m_prime for p in parts),
        min_entropy_achieved=worst,
        optimum_gap=optimum - value,
        value=value,
        optimum=optimum,
        parts=tuple(parts),
        z_marginal=z_marginal,
        joint=out.reshape(-1),
    )
