import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minmaxlab.convex_approx import (
    HolderPair,
    choose_holder_exponent,
    density_ratio_moment,
    estimate_class_variance,
    holder_conjugate,
    holder_gap_bound,
    max_component_distance,
    maurey_constant,
    moment_bound,
    sparsification_bound,
    sparsify_lp,
)
from minmaxlab.core import (
    Distinguishing,
    FiniteDistribution,
    MixedStrategy,
    TestFunction,
    Unpredictability,
    lp_norm,
    payoff,
)
from minmaxlab.errors import (
    BoundNotMet,
    DomainMismatch,
    InvalidExponent,
    InvalidParameter,
    UnsupportedConstraint,
    UnsupportedPoint,
)
from minmaxlab.game import ConstraintSet

from oracles import gaussian_moment_constant


def test_holder_conjugate_examples():
    assert holder_conjugate(2.0).q == 2.0
    assert holder_conjugate(1.0).q == math.inf
    assert holder_conjugate(4.0).q == pytest.approx(4 / 3)
    with pytest.raises(InvalidExponent):
        holder_conjugate(0.5)


@given(st.floats(1.0001, 100.0))
def test_holder_pair_invariant(p):
    pair = holder_conjugate(p)
    assert 1 / pair.p + 1 / pair.q == pytest.approx(1.0, abs=1e-9)


def test_maurey_constant_values():
    assert maurey_constant(1.5) == 1.0
    assert maurey_constant(2.0) == 1.0
    assert maurey_constant(4.0) == pytest.approx(math.sqrt(2) * 0.75 ** 0.25, abs=1e-12)
    assert maurey_constant(4.0) == pytest.approx(1.31607, abs=1e-4)
    with pytest.raises(InvalidExponent):
        maurey_constant(math.inf)


@pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 6.0, 10.0, 17.5])
def test_maurey_constant_is_a_gaussian_moment(p):
    # sqrt(2) (Gamma((p+1)/2) / sqrt(pi))^(1/p) is the L_p norm of a standard Gaussian
    assert maurey_constant(p) == pytest.approx(gaussian_moment_constant(p), rel=1e-9)


def test_maurey_constant_monotone_and_continuous():
    grid = np.linspace(2.0, 64.0, 400)
    values = [maurey_constant(p) for p in grid]
    assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))
    assert maurey_constant(2.0 + 1e-9) - 1.0 <= 1e-6


# --- sparsification ------------------------------------------------------------


def _pm_mix(rng, count=64, size=256):
    fs = [TestFunction(rng.choice([-1.0, 1.0], size), "[-1,1]") for _ in range(count)]
    return MixedStrategy(tuple((1.0 / count, f) for f in fs))


def test_identical_components_have_zero_error():
    f = TestFunction(np.linspace(0, 1, 8))
    g = TestFunction(np.linspace(0, 1, 8))
    mix = MixedStrategy(((0.3, f), (0.7, g)))
    report = sparsify_lp(mix, 1, 2.0, FiniteDistribution.uniform(8), exact_if_small=False)
    assert report.achieved_error == 0.0 and report.met


def test_large_ell_returns_mix_unchanged():
    rng = np.random.default_rng(0)
    mix = _pm_mix(rng, 8, 16)
    report = sparsify_lp(mix, 8, 2.0, FiniteDistribution.uniform(16))
    assert report.result is mix and report.achieved_error == 0.0


def test_sparsify_support_and_error_are_measured():
    rng = np.random.default_rng(1)
    mix = _pm_mix(rng)
    nu = FiniteDistribution.uniform(256)
    report = sparsify_lp(mix, 16, 2.0, nu, seed=3)
    assert report.result.support <= 16
    assert report.achieved_error == pytest.approx(lp_norm(mix.values - report.result.values, nu, 2.0), abs=1e-12)
    assert report.K == pytest.approx(max_component_distance(mix, nu, 2.0))
    assert report.bound == pytest.approx(report.K / 4.0)


def test_sparsify_reports_unmet_bound():
    rng = np.random.default_rng(2)
    mix = _pm_mix(rng)
    nu = FiniteDistribution.uniform(256)
    with pytest.raises(BoundNotMet) as info:
        sparsify_lp(mix, 4, 2.0, nu, K=1e-6, attempts=2)
    assert not info.value.report.met and info.value.report.attempts == 2
    relaxed = sparsify_lp(mix, 4, 2.0, nu, K=1e-6, attempts=2, strict=False)
    assert not relaxed.met


def test_sparsify_rejects_bad_arguments():
    mix = _pm_mix(np.random.default_rng(0), 4, 8)
    nu = FiniteDistribution.uniform(8)
    with pytest.raises(InvalidParameter):
        sparsify_lp(mix, 0, 2.0, nu)
    with pytest.raises(InvalidExponent):
        sparsify_lp(mix, 2, math.inf, nu)
    with pytest.raises(DomainMismatch):
        sparsify_lp(mix, 2, 2.0, FiniteDistribution.uniform(4))


def test_sparsify_rms_error_within_k_over_root_ell():
    rng = np.random.default_rng(4)
    mix = _pm_mix(rng, 32, 64)
    nu = FiniteDistribution.uniform(64)
    for ell in (4, 16):
        errors = [sparsify_lp(mix, ell, 2.0, nu, seed=s, attempts=1, strict=False).achieved_error for s in range(200)]
        rms = math.sqrt(np.mean(np.square(errors)))
        assert rms <= max_component_distance(mix, nu, 2.0) / math.sqrt(ell)


def test_sparsify_is_deterministic():
    mix = _pm_mix(np.random.default_rng(5))
    nu = FiniteDistribution.uniform(256)
    a = sparsify_lp(mix, 10, 4.0, nu, seed=9)
    b = sparsify_lp(mix, 10, 4.0, nu, seed=9)
    assert a.achieved_error == b.achieved_error
    assert np.array_equal(a.result.values, b.result.values)


# --- Hölder bounds -----------------------------------------------------------


def test_holder_gap_bound_examples():
    rng = np.random.default_rng(6)
    u = FiniteDistribution.uniform(16)
    a = TestFunction(rng.random(16))
    b = TestFunction(rng.random(16))
    pair = holder_conjugate(2.0)
    assert holder_gap_bound(a, a, u, u, pair) == 0.0
    l2 = math.sqrt(np.mean((a.values - b.values) ** 2))
    assert holder_gap_bound(a, b, u, u, pair) == pytest.approx(l2, abs=1e-12)
    x = FiniteDistribution.flat(16, [0, 3, 7, 12])
    gap = abs(np.mean([a.values[i] - b.values[i] for i in (0, 3, 7, 12)]))
    moment = math.sqrt(np.mean([(16 * x.mass[i]) ** 2 for i in range(16)]))
    bound = holder_gap_bound(a, b, x, u, pair)
    assert bound == pytest.approx(moment * l2, abs=1e-12)
    assert bound >= gap


def test_holder_gap_bound_unsupported_point():
    ref = FiniteDistribution(np.array([0.5, 0.5, 0.0, 0.0]))
    x = FiniteDistribution.uniform(4)
    with pytest.raises(UnsupportedPoint):
        holder_gap_bound(np.zeros(4), np.ones(4), x, ref, holder_conjugate(2.0))


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 12.0), st.booleans())
def test_holder_gap_bound_dominates_payoff_gap(seed, p, unpredictability):
    rng = np.random.default_rng(seed)
    size = 32
    ref = FiniteDistribution(rng.dirichlet(np.ones(size)))
    x = FiniteDistribution(rng.dirichlet(np.ones(size)))
    if unpredictability:
        f = TestFunction(rng.choice([-1.0, 1.0], size), "[-1,1]")
        a = TestFunction(rng.choice([-1.0, 1.0], size), "[-1,1]")
        b = TestFunction(rng.uniform(-1, 1, size), "[-1,1]")
        mode = Unpredictability(f)
    else:
        a, b = TestFunction(rng.random(size)), TestFunction(rng.random(size))
        mode = Distinguishing(ref)
    gap = abs(payoff(a, x, mode) - payoff(b, x, mode))
    assert holder_gap_bound(a, b, x, ref, holder_conjugate(p), mode) - gap >= -1e-9


# --- moments -----------------------------------------------------------------


def test_moment_bound_examples():
    u = FiniteDistribution.uniform(16)
    assert moment_bound(ConstraintSet.density(0.25, u), holder_conjugate(2.0)) == pytest.approx(2.0)
    assert moment_bound(ConstraintSet.minentropy(4.0, 4), holder_conjugate(3.0)) == 1.0
    assert moment_bound(ConstraintSet.minentropy(4.0, 6), holder_conjugate(2.0)) == pytest.approx(2.0)
    assert moment_bound(ConstraintSet.minentropy(4.0, 8), holder_conjugate(2.0)) == pytest.approx(4.0)
    with pytest.raises(UnsupportedConstraint):
        moment_bound(ConstraintSet.kernels(1, 1), holder_conjugate(2.0))


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0, 9.0])
@pytest.mark.parametrize("eps", [0.5, 0.25, 0.125])
def test_density_moment_attained_by_flat_event(p, eps):
    u = FiniteDistribution.uniform(64)
    flat = FiniteDistribution.flat(64, range(int(64 * eps)))
    pair = holder_conjugate(p)
    moment = density_ratio_moment(flat, u, pair.q)
    assert moment == pytest.approx(moment_bound(ConstraintSet.density(eps, u), pair), abs=1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 5.0])
@pytest.mark.parametrize("deficiency", [0, 1, 3])
def test_minentropy_moment_attained_by_flat_distribution(p, deficiency):
    n = 6
    u = FiniteDistribution.uniform(1 << n)
    flat = FiniteDistribution.flat(1 << n, range(1 << (n - deficiency)))
    pair = holder_conjugate(p)
    direct = np.mean([((1 << n) * v) ** pair.q for v in flat.mass]) ** (1 / pair.q)
    assert direct == pytest.approx(moment_bound(ConstraintSet.minentropy(n - deficiency, n), pair), abs=1e-9)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 0.25, 0.1]), st.floats(1.2, 8.0))
def test_moment_bound_dominates_every_member(seed, eps, p):
    rng = np.random.default_rng(seed)
    ref = FiniteDistribution(rng.dirichlet(np.ones(16)))
    c = ConstraintSet.density(eps, ref)
    x = FiniteDistribution(c.minimize(rng.standard_normal(16)))
    pair = holder_conjugate(p)
    assert density_ratio_moment(x, ref, pair.q) <= moment_bound(c, pair) + 1e-9


# --- exponent choice ---------------------------------------------------------


def test_choose_holder_exponent_examples():
    assert choose_holder_exponent("hardcore", 2.0 ** -4)[0] == 8.0
    assert choose_holder_exponent("metric", 3.0)[0] == 4.0
    assert choose_holder_exponent("hardcore", 0.5)[0] == 2.0
    p, ell = choose_holder_exponent("hardcore", 0.25)
    assert ell(0.1) == 200
    assert choose_holder_exponent("metric", 2.0)[1](0.1) == 150
    assert choose_holder_exponent("hardcore", 0.25, natural_log=True)[0] == pytest.approx(2 * math.log(4))
    with pytest.raises(InvalidParameter):
        choose_holder_exponent("hardcore", 0.75)
    with pytest.raises(InvalidParameter):
        choose_holder_exponent("other", 0.1)


def test_exponent_choice_composes_to_order_delta():
    # moment * sparsification error stays within a fixed multiple of delta
    ratios = []
    for eps, delta in itertools.product([0.5, 0.25, 2 ** -4, 2 ** -8], [0.2, 0.1, 0.05]):
        p, ell_formula = choose_holder_exponent("hardcore", eps)
        ell = ell_formula(delta)
        bound = moment_bound(ConstraintSet.density(eps, FiniteDistribution.uniform(2)), holder_conjugate(p))
        ratios.append(bound * sparsification_bound(2.0, ell, p) / delta)
    assert max(ratios) <= 4.0


# --- variance ----------------------------------------------------------------


def test_class_variance_examples():
    x = FiniteDistribution.uniform(4)
    z_constant = TestFunction(np.repeat(np.random.default_rng(0).random(4), 2), aux_bits=1)
    assert estimate_class_variance([z_constant], x) == 0.0
    z_bit = TestFunction(np.tile([0.0, 1.0], 4), aux_bits=1)
    assert estimate_class_variance([z_bit], x) == pytest.approx(0.25)


def test_class_variance_matches_double_sum():
    rng = np.random.default_rng(8)
    x = FiniteDistribution(rng.dirichlet(np.ones(8)))
    functions = [TestFunction(rng.random(32), aux_bits=2) for _ in range(20)]
    expected = 0.0
    for f in functions:
        total = 0.0
        for xi in range(8):
            row = [f.values[xi * 4 + z] for z in range(4)]
            mean = sum(row) / 4
            total += x.mass[xi] * sum((v - mean) ** 2 for v in row) / 4
        expected = max(expected, total)
    assert estimate_class_variance(functions, x) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(DomainMismatch):
        estimate_class_variance([TestFunction(rng.random(12))], x)
