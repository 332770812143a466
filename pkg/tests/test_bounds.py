import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splitbound.bounds import (
    BoundComponents,
    complexity_omega,
    dataset_evaluator,
    empirical_benefit_of_splitting,
    finite_sample_bounds_cor1,
    impossibility_lb_from_terms,
    impossibility_lb_lemma1,
    l2_impossibility_from_terms,
    l2_impossibility_lb,
    l2_upper_bound,
    lower_bound_thm3,
    multi_group_impossibility_lb,
    multi_group_upper_bound,
    sample_limited_splitting,
    split_discrepancy_bound,
    upper_bound_convex,
    upper_bound_general,
    upper_bound_thm1,
)
from splitbound.core import (
    Constant,
    GroupedDataset,
    HypothesisClass,
    LinearLogistic,
    TabularScore,
    ThresholdAbove,
    ThresholdBelow,
    disagreement,
    empirical_labeling,
    l1_risk,
)
from splitbound.divergence import DivergenceEstimate, tv_exact_discrete, tv_gaussian_shift
from splitbound.learn import exact_minimax, train_split
from splitbound.synthetic import (
    GaussianShiftInstance,
    gen_gaussian_shift,
    random_discrete_instance,
    random_tabular,
)


def omega_reference(n0, n1, D, delta):
    """Independent evaluation of the complexity term."""
    vals = []
    for n in (n0, n1):
        vals.append(4 * np.sqrt((2 * D * np.log(6 * n) + 2 * np.log(8 / delta)) / n))
    return max(vals)


def two_point(values0, values1):
    """Dataset with group 0 on atoms values0 and group 1 on atoms values1, labels 0."""
    x = np.array(list(values0) + list(values1), dtype=float)
    return GroupedDataset(x[:, None], np.zeros(len(x), dtype=int),
                          [0] * len(values0) + [1] * len(values1))


DATA = two_point([0, 1, 2, 3], [1, 2, 3, 4])


# ---- disagreement upper bound / convex ----------------------------------

def test_upper_bound_examples():
    h = ThresholdAbove(1.5)
    assert upper_bound_thm1(h, h, DATA) == 0.0
    assert upper_bound_thm1(Constant(0.0), Constant(1.0), DATA) == 1.0


def test_upper_bound_convex_is_half():
    assert upper_bound_convex(ThresholdAbove(0.5), ThresholdAbove(0.5), DATA) == 0.0
    assert upper_bound_convex(Constant(0.0), Constant(1.0), DATA) == 0.5
    h0, h1 = ThresholdAbove(0.5), ThresholdBelow(2.5)
    assert upper_bound_convex(h0, h1, DATA) == 0.5 * upper_bound_thm1(h0, h1, DATA)


def test_upper_bound_requires_both_groups():
    data = GroupedDataset([[0.0], [1.0]], [0, 1], [0, 0])
    with pytest.raises(KeyError):
        upper_bound_thm1(Constant(0.0), Constant(1.0), data)


def test_upper_bound_dominates_shifted_gaussian_empirical_benefit():
    data = gen_gaussian_shift(GaussianShiftInstance(2.0, 2000, seed=1))
    cls = HypothesisClass.threshold_pair()
    h_split = {s: train_split(data, s, cls) for s in (0, 1)}
    blind = exact_minimax(data, cls)
    emp = empirical_benefit_of_splitting(blind, h_split, data)
    assert emp == pytest.approx(0.5, abs=0.03)
    assert upper_bound_thm1(h_split[0], h_split[1], data) >= emp


# ---- impossibility lower bound --------------------------------------------

def test_impossibility_lb_identical_labeling_is_vacuous():
    y = ThresholdAbove(1.5)
    assert impossibility_lb_lemma1(y, y, DATA, 0.3) == pytest.approx(-0.15)


def test_impossibility_lb_identical_marginals_full_disagreement():
    assert impossibility_lb_lemma1(Constant(0.0), Constant(1.0), DATA, 0.0) == 0.5
    assert impossibility_lb_from_terms([1.0, 1.0], DivergenceEstimate(0.0, "given")) == 0.5


def test_impossibility_lb_shifted_gaussian_is_vacuous():
    inst = GaussianShiftInstance(2.0, 50_000, seed=2)
    data = gen_gaussian_shift(inst)
    lb = impossibility_lb_lemma1(inst.labeling(0), inst.labeling(1), data, tv_gaussian_shift(2.0))
    dis = max(disagreement(inst.labeling(0), inst.labeling(1), data, s) for s in (0, 1))
    assert dis == pytest.approx(0.5, abs=0.01)
    assert lb == pytest.approx(0.5 * (dis - 0.9545), abs=1e-4)
    assert lb < 0


# ---- risk-adjusted lower bound -------------------------------------------

def test_lower_bound_examples():
    h = ThresholdAbove(1.5)
    assert lower_bound_thm3(h, h, DATA, 0.0, (0.0, 0.0)) == 0.0
    assert lower_bound_thm3(Constant(0.0), Constant(1.0), DATA, 0.0, (0.0, 0.0)) == 0.5
    assert lower_bound_thm3(Constant(0.0), Constant(1.0), DATA, 0.1, (0.1, 0.1)) == pytest.approx(0.1)


def brute_force_eps(data, cands):
    """Exact empirical benefit of splitting over a finite candidate list."""
    losses = np.array([[l1_risk(h, data, s) for s in (0, 1)] for h in cands])
    return losses.max(axis=1).min() - max(losses[:, 0].min(), losses[:, 1].min())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lower_bound_below_brute_force_on_small_instance(seed):
    rng = np.random.default_rng(seed)
    inst = random_discrete_instance(rng, n_atoms=5, dim=1)
    data = inst.sample(30, seed=seed)
    atoms = np.unique(data.X, axis=0)
    cands = [random_tabular(rng, atoms, binary=True) for _ in range(16)]
    cls = HypothesisClass.finite(cands)
    h0, h1 = train_split(data, 0, cls), train_split(data, 1, cls)
    tv = tv_exact_discrete(data.group(0)[0], data.group(1)[0])
    lb = lower_bound_thm3(h0, h1, data, tv, (l1_risk(h0, data, 0), l1_risk(h1, data, 1)))
    assert lb <= brute_force_eps(data, cands) + 1e-12


# ---- Omega -----------------------------------------------------------------

def test_omega_reference_value():
    value = complexity_omega(1000, 1000, 3, 0.05)
    assert value == pytest.approx(omega_reference(1000, 1000, 3, 0.05), rel=1e-12)
    assert value == pytest.approx(0.9988, abs=1e-3)


def test_omega_symmetric():
    assert complexity_omega(300, 1000, 2, 0.1) == complexity_omega(1000, 300, 2, 0.1)


def test_omega_errors():
    with pytest.raises(ValueError):
        complexity_omega(10, 10, 1, 0.0)
    with pytest.raises(ValueError):
        complexity_omega(10, 10, 1, 1.0)
    with pytest.raises(ValueError):
        complexity_omega(0, 10, 1, 0.5)


@given(st.integers(1, 10**6), st.integers(1, 10**6), st.integers(1, 50), st.floats(1e-6, 0.999))
def test_omega_matches_reference(n0, n1, D, delta):
    assert complexity_omega(n0, n1, D, delta) == pytest.approx(omega_reference(n0, n1, D, delta),
                                                               rel=1e-12)


def test_omega_practical_modes():
    strict = complexity_omega(1000, 1000, 3, 0.05)
    drop = complexity_omega(1000, 1000, 3, 0.05, mode="drop")
    const = complexity_omega(1000, 1000, 3, 0.05, mode="constant")
    assert drop == pytest.approx(4 * math.sqrt(2 * math.log(160) / 1000))
    assert const == pytest.approx(4 * math.sqrt((6 * math.log(6) + 2 * math.log(160)) / 1000))
    assert drop < const < strict


def test_omega_doubling_ratio():
    for n in (10_000, 40_000, 200_000):
        ratio = complexity_omega(2 * n, 2 * n, 5, 0.05) / complexity_omega(n, n, 5, 0.05)
        assert 0.9 / math.sqrt(2) <= ratio <= 1.1 / math.sqrt(2)


def test_discrepancy_bound_uses_sixteen_over_delta():
    n, D, delta = 500, 2, 0.1
    expected = 4 * math.sqrt((2 * D * math.log(6 * n) + 2 * math.log(16 / delta)) / n)
    assert split_discrepancy_bound(n, n, D, delta) == pytest.approx(expected)
    assert split_discrepancy_bound(n, n, D, delta) > complexity_omega(n, n, D, delta)


# ---- finite-sample bounds -------------------------------------------------

def test_finite_sample_direct_evaluation():
    res = finite_sample_bounds_cor1(Constant(0.0), Constant(1.0), DATA, 0.0, practical_mode=False)
    omega = complexity_omega(4, 4, 3, 0.05)
    lam = 0.5 * (0.0 + 1.0)  # labels are all 0, h1 = 1 errs everywhere
    assert res.upper_bound == pytest.approx(1.0 + omega)
    assert res.lower_bound == pytest.approx(0.5 - 3 * lam - omega)
    assert res.components.omega == omega
    assert res.components.lambda_ == lam


def test_finite_sample_zero_terms_give_one_and_half():
    x = np.array([0.0, 1.0, 0.0, 1.0])
    data = GroupedDataset(x[:, None], [0, 0, 1, 1], [0, 0, 1, 1])
    res = finite_sample_bounds_cor1(Constant(0.0), Constant(1.0), data, 0.0)
    # disagreement (1, 1), lambda 0, TV 0: bounds are (1, 0.5) shifted by omega
    assert res.components.lambda_ == 0.0
    assert res.upper_bound - res.components.omega == pytest.approx(1.0)
    assert res.lower_bound + res.components.omega == pytest.approx(0.5)


def test_finite_sample_identical_groups_large_n_brackets_zero():
    rng = np.random.default_rng(0)
    x = rng.normal(size=200_000)
    y = (x > 0).astype(int)
    data = GroupedDataset(x[:, None], y, np.arange(200_000) % 2)
    h = ThresholdAbove(0.0)
    res = finite_sample_bounds_cor1(h, h, data, tv_exact_discrete([0.5, 0.5], [0.5, 0.5]), vc=2)
    assert res.upper_bound == pytest.approx(res.components.omega)
    assert res.lower_bound == pytest.approx(-res.components.omega)
    assert res.components.omega == pytest.approx(omega_reference(100_000, 100_000, 2, 0.05))
    assert res.brackets(0.0)
    assert "lower_bound_vacuous" in res.vacuous_flags


def test_finite_sample_thresholds_probabilistic_classifiers():
    data = two_point([-1, 1], [-1, 1])
    soft = LinearLogistic((1.0,), 0.0)
    res = finite_sample_bounds_cor1(soft, Constant(1.0), data, 0.0)
    assert res.components.disagreement_per_group == {0: 0.5, 1: 0.5}


def test_finite_sample_practical_mode_drops_lambda():
    res = finite_sample_bounds_cor1(Constant(0.0), Constant(1.0), DATA, 0.0, practical_mode=True)
    assert res.lower_bound == pytest.approx(0.5 - complexity_omega(4, 4, 3, 0.05, "drop"))
    assert res.components.practical_mode


def test_bound_components_validation():
    tv = DivergenceEstimate(0.1, "given")
    with pytest.raises(ValueError):
        BoundComponents({0: 0.1, 1: 0.2}, tv, -1.0, 0.5, 0.05, 3)
    with pytest.raises(ValueError):
        BoundComponents({0: 0.1, 1: 0.2}, tv, 0.0, 0.5, 1.5, 3)
    comps = BoundComponents({0: 0.1, 1: 0.3}, tv, 0.0, 0.5, 0.05, 3)
    assert comps.disagreement_mean == pytest.approx(0.2)


# ---- benefit of splitting --------------------------------------------------

def test_sample_limited_identity_is_zero():
    h = ThresholdAbove(0.5)
    assert sample_limited_splitting(h, {0: h, 1: h}, dataset_evaluator(DATA)) == 0.0
    assert empirical_benefit_of_splitting(h, {0: h, 1: h}, DATA) == 0.0


def test_sample_limited_missing_group_raises():
    with pytest.raises(KeyError):
        sample_limited_splitting(Constant(0.0), {0: Constant(0.0)}, dataset_evaluator(DATA), groups=[0, 1])
    with pytest.raises(KeyError):
        empirical_benefit_of_splitting(Constant(0.0), {0: Constant(0.0)}, DATA)


def test_sample_limited_shifted_gaussian_is_half():
    from splitbound.synthetic import mc_evaluator

    inst = GaussianShiftInstance(2.0, 10_000, seed=0)
    data = gen_gaussian_shift(inst)
    cls = HypothesisClass.threshold_pair()
    h_split = {s: train_split(data, s, cls) for s in (0, 1)}
    value = sample_limited_splitting(exact_minimax(data, cls), h_split, mc_evaluator(inst))
    assert value == pytest.approx(0.5, abs=0.02)


def test_sample_limited_can_be_negative_on_tiny_samples():
    from splitbound.synthetic import near_shared_instance

    inst = near_shared_instance()
    cls = HypothesisClass.threshold_pair()
    values = []
    for seed in range(60):
        data = inst.sample(8, seed=seed)
        if min(data.counts.values()) < 1:
            continue
        h_split = {s: train_split(data, s, cls) for s in (0, 1)}
        values.append(sample_limited_splitting(exact_minimax(data, cls), h_split, inst.population_risk))
    assert min(values) < 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_empirical_vs_sample_limited_within_discrepancy_bound(seed):
    from splitbound.synthetic import random_discrete_instance

    rng = np.random.default_rng(seed)
    inst = random_discrete_instance(rng, n_atoms=6, dim=1, full_support=True)
    data = inst.sample(400, seed=seed)
    cls = HypothesisClass.threshold_pair()
    h_split = {s: train_split(data, s, cls) for s in (0, 1)}
    blind = exact_minimax(data, cls)
    emp = empirical_benefit_of_splitting(blind, h_split, data)
    pop = sample_limited_splitting(blind, h_split, inst.population_risk)
    assert emp >= -1e-12
    assert abs(pop - emp) <= split_discrepancy_bound(400, 400, 2, 0.05)


# ---- general upper bound ---------------------------------------------------

def test_upper_bound_general_dominates_benefit():
    rng = np.random.default_rng(3)
    inst = random_discrete_instance(rng, n_atoms=8, dim=1, deterministic=True)
    data = inst.sample(50, seed=3)
    cls = HypothesisClass.interval()
    h_split = {s: train_split(data, s, cls) for s in (0, 1)}
    blind = exact_minimax(data, cls)
    ub = upper_bound_general(h_split, cls, data)
    assert ub >= empirical_benefit_of_splitting(blind, h_split, data) - 1e-12


# ---- multiple groups -------------------------------------------------------

def three_groups():
    x = np.tile([0.0, 1.0, 2.0], 3)
    return GroupedDataset(x[:, None], np.zeros(9, dtype=int), np.repeat([0, 1, 2], 3))


def test_multi_group_upper_identical_is_zero():
    h = ThresholdAbove(0.5)
    assert multi_group_upper_bound({0: h, 1: h, 2: h}, three_groups()) == 0.0


def test_multi_group_upper_matches_pairwise_for_two_groups():
    h0, h1 = ThresholdAbove(1.5), ThresholdBelow(2.5)
    assert multi_group_upper_bound({0: h0, 1: h1}, DATA) == upper_bound_thm1(h0, h1, DATA)


def test_multi_group_upper_requires_two_groups():
    data = GroupedDataset([[0.0]], [0], [0])
    with pytest.raises(ValueError):
        multi_group_upper_bound({0: Constant(0.0)}, data)


def test_multi_group_upper_dominates_three_group_brute_force():
    rng = np.random.default_rng(11)
    x = np.concatenate([rng.choice(4, 30) for _ in range(3)]).astype(float)
    g = np.repeat([0, 1, 2], 30)
    y = rng.integers(0, 2, 90)
    data = GroupedDataset(x[:, None], y, g)
    cands = [TabularScore({(float(a),): float(v) for a, v in zip(range(4), bits)})
             for bits in itertools.product([0, 1], repeat=4)]
    cls = HypothesisClass.finite(cands)
    losses = np.array([[l1_risk(h, data, s) for s in (0, 1, 2)] for h in cands])
    eps = losses.max(axis=1).min() - losses.min(axis=0).max()
    h_split = {s: train_split(data, s, cls) for s in (0, 1, 2)}
    assert multi_group_upper_bound(h_split, data) >= eps - 1e-12


def test_multi_group_lb_examples():
    data = three_groups()
    zero_tv = np.zeros((3, 3))
    h = Constant(0.0)
    assert multi_group_impossibility_lb({0: h, 1: h, 2: h}, zero_tv, data) <= 0
    lab = {0: Constant(0.0), 1: Constant(1.0), 2: Constant(0.0)}
    # group 1 disagrees with both others: (1/4)(0 + 1 + 1)
    assert multi_group_impossibility_lb(lab, zero_tv, data) == pytest.approx(0.5)


def test_multi_group_lb_three_groups_against_grid_search():
    data = three_groups()
    lab = {0: Constant(0.0), 1: Constant(1.0), 2: Constant(0.0)}
    lb = multi_group_impossibility_lb(lab, np.zeros((3, 3)), data)
    # any classifier on the shared marginal: its worst group risk
    best = math.inf
    grid = np.linspace(0, 1, 21)
    for vals in itertools.product(grid, repeat=3):
        h = TabularScore({(0.0,): vals[0], (1.0,): vals[1], (2.0,): vals[2]})
        risks = [float(np.mean(np.abs(h(np.arange(3.0)[:, None]) - lab[s](np.zeros((3, 1))))))
                 for s in (0, 1, 2)]
        best = min(best, max(risks))
    assert best >= lb - 1e-12
    assert best == pytest.approx(0.5)


def test_multi_group_lb_reduces_to_pairwise():
    y0, y1 = ThresholdAbove(1.5), ThresholdBelow(2.5)
    tv = tv_exact_discrete(DATA.group(0)[0], DATA.group(1)[0])
    two = multi_group_impossibility_lb({0: y0, 1: y1}, {(0, 1): tv}, DATA)
    assert two == pytest.approx(impossibility_lb_lemma1(y0, y1, DATA, tv))


def test_multi_group_lb_validates_tv_matrix():
    data = three_groups()
    lab = {s: Constant(0.0) for s in (0, 1, 2)}
    with pytest.raises(ValueError):
        multi_group_impossibility_lb(lab, np.zeros((2, 2)), data)
    with pytest.raises(ValueError):
        multi_group_impossibility_lb(lab, np.array([[0, 0.1, 0], [0.2, 0, 0], [0, 0, 0]]), data)


# ---- squared loss ----------------------------------------------------------

def test_l2_bound_examples():
    y = ThresholdAbove(1.5)
    assert l2_impossibility_lb(y, y, DATA).value == 0.0
    same = two_point([0, 1], [0, 1])
    b = l2_impossibility_lb(Constant(0.0), Constant(1.0), same)
    assert b.value == pytest.approx(0.5)
    assert b.squared == pytest.approx(0.25)


def test_l2_bound_unbounded_divergence_is_vacuous():
    b = l2_impossibility_from_terms({0: 1.0, 1: 1.0}, {0: math.inf, 1: math.inf})
    assert b.value == 0.0 and b.vacuous
    assert "unbounded" in b.reason
    one = l2_impossibility_from_terms({0: 1.0, 1: 1.0}, {0: math.inf, 1: 0.0})
    assert one.value == pytest.approx(0.5) and not one.vacuous


def test_l2_bound_from_atoms_matches_dataset_form():
    data = two_point([0, 0, 1, 2], [0, 1, 1, 2])
    y0, y1 = ThresholdAbove(0.5), ThresholdBelow(1.5)
    atoms = np.array([[0.0], [1.0], [2.0]])
    marg = {0: (atoms, [0.5, 0.25, 0.25]), 1: (atoms, [0.25, 0.5, 0.25])}
    assert l2_impossibility_lb(y0, y1, marg).value == pytest.approx(l2_impossibility_lb(y0, y1, data).value)


def test_l2_upper_bound_examples():
    assert l2_upper_bound(Constant(0.0), Constant(1.0), DATA) == 1.0
    assert l2_upper_bound(Constant(0.2), Constant(0.2), DATA) == 0.0


# ---- non-maleficence, sandwich and impossibility on random instances -----

def finite_setup(seed):
    rng = np.random.default_rng(seed)
    inst = random_discrete_instance(rng, n_atoms=int(rng.integers(2, 9)), dim=2)
    data = inst.sample({0: int(rng.integers(5, 40)), 1: int(rng.integers(5, 40))}, seed=seed)
    atoms = np.unique(data.X, axis=0)
    cands = [random_tabular(rng, atoms, binary=True) for _ in range(int(rng.integers(1, 17)))]
    return data, HypothesisClass.finite(cands)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_non_maleficence_and_sandwich_on_random_instances(seed):
    data, cls = finite_setup(seed)
    blind = exact_minimax(data, cls)
    h_split = {s: train_split(data, s, cls) for s in (0, 1)}
    for s in (0, 1):
        assert l1_risk(h_split[s], data, s) <= l1_risk(blind, data, s) + 1e-12
    eps = empirical_benefit_of_splitting(blind, h_split, data)
    assert eps >= -1e-12
    tv = tv_exact_discrete(data.group(0)[0], data.group(1)[0])
    risks = (l1_risk(h_split[0], data, 0), l1_risk(h_split[1], data, 1))
    assert lower_bound_thm3(h_split[0], h_split[1], data, tv, risks) <= eps + 1e-12
    assert eps <= upper_bound_thm1(h_split[0], h_split[1], data) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_impossibility_lb_holds_for_random_classifiers(seed):
    rng = np.random.default_rng(seed)
    inst = random_discrete_instance(rng, n_atoms=6, dim=1)
    data = inst.sample(25, seed=seed)
    y0, y1 = empirical_labeling(data, 0), empirical_labeling(data, 1)
    tv = tv_exact_discrete(data.group(0)[0], data.group(1)[0])
    lb = impossibility_lb_lemma1(y0, y1, data, tv)
    atoms = np.unique(data.X, axis=0)
    for _ in range(100):
        h = random_tabular(rng, atoms)
        assert max(l1_risk(h, data, s) for s in (0, 1)) >= lb - 1e-12
