import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from splitbound.bounds import empirical_benefit_of_splitting, impossibility_lb_lemma1, upper_bound_thm1
from splitbound.core import (
    Constant,
    HypothesisClass,
    Interval,
    LinearThreshold,
    disagreement,
    l1_risk,
)
from splitbound.learn import exact_minimax, train_split
from splitbound.synthetic import (
    BOTH_DIFFERENT,
    DIFFERENT_CLASSIFIERS_SIMILAR_MARGINALS,
    FIXTURE_NAMES,
    SIMILAR_CLASSIFIERS,
    GaussianShiftInstance,
    WorstCaseInstance,
    analytic_example1,
    coverage_instance,
    fixture_filename,
    fixture_text,
    gen_gaussian_shift,
    gen_taxonomy_regime,
    mc_evaluator,
    population_risk_mc,
    random_discrete_instance,
    taxonomy_rules,
    worst_case_linear,
)

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "splitbound" / "data"


# ---- shifted Gaussians -----------------------------------------------------

def test_gaussian_shift_mu_zero_complementary_labels():
    data = gen_gaussian_shift(GaussianShiftInstance(0.0, 2000, seed=1))
    x, y = data.group(0)
    np.testing.assert_array_equal(y, (x[:, 0] > 0).astype(int))
    x1, y1 = data.group(1)
    np.testing.assert_array_equal(y1, (x1[:, 0] < 0).astype(int))


def test_gaussian_shift_means_within_clt():
    n = 10_000
    data = gen_gaussian_shift(GaussianShiftInstance(2.0, n, seed=5))
    for s, center in ((0, -2.0), (1, 2.0)):
        assert abs(data.group(s)[0].mean() - center) <= 3 / math.sqrt(n)
    assert data.counts == {0: n, 1: n}


def test_gaussian_shift_is_deterministic():
    a = gen_gaussian_shift(GaussianShiftInstance(2.0, 500, seed=9))
    b = gen_gaussian_shift(GaussianShiftInstance(2.0, 500, seed=9))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    c = gen_gaussian_shift(GaussianShiftInstance(2.0, 500, seed=10))
    assert not np.array_equal(a.X, c.X)


def test_gaussian_shift_validation():
    with pytest.raises(ValueError):
        GaussianShiftInstance(-1.0, 10)
    with pytest.raises(ValueError):
        GaussianShiftInstance(1.0, 0)


def test_analytic_example1_values():
    rec = analytic_example1(0.0)
    assert rec.tv == 0.0
    rec = analytic_example1(2.0)
    assert rec.eps_threshold == 0.5
    assert rec.disagreement_lb == 0.5
    assert rec.eps_interval_ub == pytest.approx(3.355e-4, rel=1e-3)
    assert rec.tv == pytest.approx(1 - 2 * norm.cdf(-2.0))
    with pytest.raises(ValueError):
        analytic_example1(-0.1)


@given(st.floats(0, 10), st.floats(0, 10))
def test_analytic_tv_monotone_with_tail_bound(a, b):
    lo, hi = sorted((a, b))
    assert analytic_example1(lo).tv <= analytic_example1(hi).tv
    assert analytic_example1(hi).tv >= 1 - 2 * math.exp(-hi * hi / 2) - 1e-12
    assert analytic_example1(a).eps_threshold == 0.5


def test_population_risk_mc_examples():
    inst = GaussianShiftInstance(2.0, 1)
    own = population_risk_mc(inst.labeling(0), inst, 0, 10_000)
    assert own.value == 0.0 and own.stderr == 0.0
    const = population_risk_mc(Constant(0.0), inst, 1, 100_000, seed=1)
    assert abs(const.value - 0.5) <= 3 * const.stderr
    interval = population_risk_mc(Interval(-2.0, 2.0), inst, 0, 100_000, seed=2)
    assert interval.value <= math.exp(-8) + 3 * max(interval.stderr, 1 / 100_000)
    with pytest.raises(ValueError):
        population_risk_mc(Constant(0.0), inst, 0, 99)


def test_population_risk_mc_se_scaling():
    inst = GaussianShiftInstance(1.0, 1)
    h = Constant(0.0)
    small = population_risk_mc(h, inst, 0, 20_000, seed=3).stderr
    large = population_risk_mc(h, inst, 0, 80_000, seed=4).stderr
    assert large / small == pytest.approx(0.5, rel=0.2)


def test_mc_evaluator_is_deterministic():
    inst = GaussianShiftInstance(2.0, 1)
    ev = mc_evaluator(inst, 10_000, seed=3)
    assert ev(Constant(1.0), 0) == ev(Constant(1.0), 0)


# ---- taxonomy --------------------------------------------------------------

def test_taxonomy_similar_classifiers_upper_bound_zero():
    data = gen_taxonomy_regime(SIMILAR_CLASSIFIERS, {"n_per_group": 500}, seed=0)
    rules = taxonomy_rules(SIMILAR_CLASSIFIERS)
    assert upper_bound_thm1(rules[0], rules[1], data) == 0.0
    m0, m1 = data.group(0)[0].mean(axis=0), data.group(1)[0].mean(axis=0)
    assert np.linalg.norm(m0 - m1) > 1.0


def test_taxonomy_different_classifiers_impossibility_half():
    data = gen_taxonomy_regime(DIFFERENT_CLASSIFIERS_SIMILAR_MARGINALS, {"n_per_group": 500}, seed=0)
    rules = taxonomy_rules(DIFFERENT_CLASSIFIERS_SIMILAR_MARGINALS)
    dis = [disagreement(rules[0], rules[1], data, s) for s in (0, 1)]
    assert dis == [1.0, 1.0]
    assert impossibility_lb_lemma1(rules[0], rules[1], data, 0.0) == 0.5


def test_taxonomy_both_different_interval_vs_threshold():
    inst = GaussianShiftInstance(3.0, 2000, seed=0)
    data = gen_taxonomy_regime(BOTH_DIFFERENT, {"n_per_group": 2000, "mu": 3.0}, seed=0)
    ev = mc_evaluator(inst, 100_000, seed=1)
    for cls, check in ((HypothesisClass.interval(), lambda e: e <= math.exp(-18) + 0.01),
                       (HypothesisClass.threshold_pair(), lambda e: abs(e - 0.5) <= 0.02)):
        h_split = {s: train_split(data, s, cls) for s in (0, 1)}
        blind = exact_minimax(data, cls)
        value = max(ev(blind, s) for s in (0, 1)) - max(ev(h_split[s], s) for s in (0, 1))
        assert check(value), (cls, value)


def test_taxonomy_unknown_regime():
    with pytest.raises(ValueError):
        gen_taxonomy_regime("nope")


def test_taxonomy_deterministic():
    for regime in (SIMILAR_CLASSIFIERS, DIFFERENT_CLASSIFIERS_SIMILAR_MARGINALS, BOTH_DIFFERENT):
        a = gen_taxonomy_regime(regime, {"n_per_group": 100}, seed=2)
        b = gen_taxonomy_regime(regime, {"n_per_group": 100}, seed=2)
        np.testing.assert_array_equal(a.X, b.X)


# ---- worst case ------------------------------------------------------------

@pytest.mark.parametrize("d", [1, 2, 5])
def test_worst_case_structure(d):
    inst = worst_case_linear(d)
    x = np.array([inst.x_star])
    assert inst.x_star[0] == 1.0 and sum(inst.x_star) == 1.0
    assert inst.h1_star(x)[0] == 1.0 and inst.h0_star(x)[0] == 0.0
    data = inst.dataset(1000)
    assert l1_risk(inst.h0_star, data, 0) == 0.0
    assert l1_risk(inst.h1_star, data, 1) == 0.0


def test_worst_case_requires_disagreement():
    with pytest.raises(ValueError):
        WorstCaseInstance((1.0,), LinearThreshold((1.0,)), LinearThreshold((1.0,)))


def test_worst_case_random_linear_grid():
    d = 3
    inst = worst_case_linear(d)
    data = inst.dataset(10)
    rng = np.random.default_rng(0)
    W = rng.normal(size=(10_000, d))
    B = rng.normal(size=10_000)
    worst = [max(l1_risk(LinearThreshold(tuple(w), float(b)), data, s) for s in (0, 1))
             for w, b in zip(W, B)]
    assert min(worst) >= 0.5 - 1e-12


def test_worst_case_pipeline_benefit_half():
    inst = worst_case_linear(2)
    data = inst.dataset(1000)
    cls = inst.hypothesis_class()
    h_split = {s: train_split(data, s, cls) for s in (0, 1)}
    assert empirical_benefit_of_splitting(exact_minimax(data, cls), h_split, data) >= 0.5 - 1e-9


# ---- discrete instances ----------------------------------------------------

def test_discrete_population_risk_matches_large_sample():
    inst = coverage_instance(0.1)
    h = LinearThreshold((1.0, 0.0))
    assert inst.population_risk(h, 0) == pytest.approx(0.1)
    assert inst.population_risk(h, 1) == pytest.approx(0.9)
    data = inst.sample(200_000, seed=0)
    assert l1_risk(h, data, 0) == pytest.approx(0.1, abs=0.005)
    assert inst.tv() == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_discrete_instance_well_formed(seed):
    rng = np.random.default_rng(seed)
    inst = random_discrete_instance(rng, n_atoms=int(rng.integers(1, 17)), n_groups=3, dim=2)
    assert inst.groups == (0, 1, 2)
    for s in inst.groups:
        assert inst.masses[s].sum() == pytest.approx(1.0)
        assert np.all((inst.labeling[s] >= 0) & (inst.labeling[s] <= 1))
    own = inst.labeling_classifier(0)
    # a labeling in {0,1} gives zero risk; otherwise the Bayes error of the noisy label
    p, q = inst.masses[0], inst.labeling[0]
    assert inst.population_risk(own, 0) == pytest.approx(float(p @ (2 * q * (1 - q))))
    assert 0 <= inst.tv(0, 1) <= 1


def test_discrete_sample_deterministic():
    inst = coverage_instance()
    a, b = inst.sample(50, seed=4), inst.sample(50, seed=4)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)


# ---- fixtures --------------------------------------------------------------

@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixtures_regenerate_byte_identically(name):
    bundled = (DATA_DIR / fixture_filename(name)).read_text()
    assert fixture_text(name) == bundled


def test_fixture_unknown_name():
    with pytest.raises(ValueError):
        fixture_text("missing")
