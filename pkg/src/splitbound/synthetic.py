"""Synthetic distributions with known ground truth.

* two shifted Gaussians with opposite threshold labeling rules
* the three taxonomy regimes (shared rule / shared marginal / both differ)
* a point-mass worst case for linear predictors
* finite discrete instances with exact population risks
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import ndtr, ndtri

from .core import (
    Classifier,
    GroupedDataset,
    HypothesisClass,
    LinearThreshold,
    TabularScore,
    ThresholdAbove,
    ThresholdBelow,
    atom_key,
)
from .divergence import tv_gaussian_shift, tv_exact_discrete, chi_square_discrete


def _normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws via the inverse CDF of seeded uniforms."""
    u = rng.random(size)
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    return ndtri(u)


# --------------------------------------------------------------------------
# shifted Gaussians


@dataclass(frozen=True)
class GaussianShiftInstance:
    """Group 0 ~ N(-mu, 1) labeled ``1[x > -mu]``; group 1 ~ N(mu, 1) labeled ``1[x < mu]``."""

    mu: float
    n_per_group: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if self.n_per_group < 1:
            raise ValueError("n_per_group must be >= 1")

    def center(self, group: int) -> float:
        return -self.mu if group == 0 else self.mu

    def labeling(self, group: int) -> Classifier:
        return ThresholdAbove(-self.mu) if group == 0 else ThresholdBelow(self.mu)

    def draw(self, group: int, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.center(group) + _normal(rng, n)


def gen_gaussian_shift(inst: GaussianShiftInstance) -> GroupedDataset:
    rng = np.random.default_rng(inst.seed)
    n = inst.n_per_group
    xs, ys = [], []
    for s in (0, 1):
        x = inst.draw(s, n, rng)
        xs.append(x)
        ys.append(inst.labeling(s)(x).astype(np.int64))
    return GroupedDataset(np.concatenate(xs)[:, None], np.concatenate(ys), np.repeat([0, 1], n))


@dataclass(frozen=True)
class Example1Record:
    tv: float
    disagreement_lb: float
    eps_threshold: float
    eps_interval_ub: float


def analytic_example1(mu: float) -> Example1Record:
    """Closed-form quantities of the shifted-Gaussian example."""
    if mu < 0:
        raise ValueError("mu must be non-negative")
    return Example1Record(
        tv=tv_gaussian_shift(mu).value,
        disagreement_lb=0.5,
        eps_threshold=0.5,
        eps_interval_ub=math.exp(-2.0 * mu * mu),
    )


def exact_disagreement_example1(mu: float) -> float:
    """``E[|y1 - y0| | S=s]`` in closed form (same for both groups).

    Labels disagree outside ``(-mu, mu)``: for group 0 that is
    ``Phi(0) + Phi(-2 mu)``.
    """
    return float(ndtr(0.0) + ndtr(-2.0 * mu))


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    stderr: float


def population_risk_mc(h: Classifier, inst: GaussianShiftInstance, group: int,
                       n_mc: int = 100_000, seed: int = 0) -> RiskEstimate:
    """Monte Carlo estimate of ``E[|h(X) - y_s(X)| | S=s]`` with its standard error."""
    if n_mc < 100:
        raise ValueError("n_mc must be >= 100")
    rng = np.random.default_rng(seed)
    x = inst.draw(group, n_mc, rng)[:, None]
    err = np.abs(h(x) - inst.labeling(group)(x))
    return RiskEstimate(float(err.mean()), float(err.std(ddof=1) / math.sqrt(n_mc)))


def mc_evaluator(inst: GaussianShiftInstance, n_mc: int = 100_000, seed: int = 0):
    """Risk evaluator ``(h, s) -> risk`` using common random numbers per group."""
    return lambda h, s: population_risk_mc(h, inst, s, n_mc, seed + 7919 * s).value


# --------------------------------------------------------------------------
# taxonomy regimes

SIMILAR_CLASSIFIERS = "similar_classifiers"
DIFFERENT_CLASSIFIERS_SIMILAR_MARGINALS = "different_classifiers_similar_marginals"
BOTH_DIFFERENT = "both_different"
REGIMES = (SIMILAR_CLASSIFIERS, DIFFERENT_CLASSIFIERS_SIMILAR_MARGINALS, BOTH_DIFFERENT)


def taxonomy_rules(regime: str, params: Mapping | None = None) -> dict[int, Classifier]:
    """The true labeling rules of a regime."""
    params = dict(params or {})
    if regime == SIMILAR_CLASSIFIERS:
        rule = LinearThreshold((1.0, 1.0), 0.0)
        return {0: rule, 1: rule}
    if regime == DIFFERENT_CLASSIFIERS_SIMILAR_MARGINALS:
        return {0: LinearThreshold((1.0, 0.0), 0.0), 1: LinearThreshold((-1.0, 0.0), 0.0)}
    if regime == BOTH_DIFFERENT:
        inst = GaussianShiftInstance(float(params.get("mu", 3.0)), 1)
        return {0: inst.labeling(0), 1: inst.labeling(1)}
    raise ValueError(f"unknown regime {regime!r}")


def gen_taxonomy_regime(regime: str, params: Mapping | None = None, seed: int = 0) -> GroupedDataset:
    """Sample from one of the three taxonomy regimes.

    ``similar_classifiers``: 2-D, group 0 ~ N((-1, 0), I), group 1 ~ N((1, 1), I),
    both labeled by ``1[x1 + x2 >= 0]``.
    ``different_classifiers_similar_marginals``: both groups ~ N(0, I_2),
    labeled ``1[x1 >= 0]`` and ``1[-x1 >= 0]``.
    ``both_different``: the shifted-Gaussian example with ``mu`` (default 3).
    """
    params = dict(params or {})
    n = int(params.get("n_per_group", 1000))
    if regime == BOTH_DIFFERENT:
        return gen_gaussian_shift(GaussianShiftInstance(float(params.get("mu", 3.0)), n, seed))
    rules = taxonomy_rules(regime, params)
    rng = np.random.default_rng(seed)
    if regime == SIMILAR_CLASSIFIERS:
        centers = {0: np.array([-1.0, 0.0]), 1: np.array([1.0, 1.0])}
    else:
        centers = {0: np.zeros(2), 1: np.zeros(2)}
    xs, ys = [], []
    for s in (0, 1):
        x = centers[s] + _normal(rng, (n, 2))
        xs.append(x)
        ys.append(rules[s](x).astype(np.int64))
    return GroupedDataset(np.vstack(xs), np.concatenate(ys), np.repeat([0, 1], n))


# --------------------------------------------------------------------------
# worst case for linear predictors


@dataclass(frozen=True)
class WorstCaseInstance:
    x_star: tuple[float, ...]
    h0_star: Classifier
    h1_star: Classifier
    group_prior: float = 0.5

    def __post_init__(self) -> None:
        x = np.array([self.x_star])
        if {float(self.h0_star(x)[0]), float(self.h1_star(x)[0])} != {0.0, 1.0}:
            raise ValueError("the two classifiers must disagree at x_star")

    def dataset(self, copies: int = 1000) -> GroupedDataset:
        """Point-mass marginals realized as repeated rows, labeled by ``h_s_star``."""
        X = np.tile(np.array(self.x_star), (2 * copies, 1))
        x = np.array([self.x_star])
        labels = np.repeat([int(self.h0_star(x)[0]), int(self.h1_star(x)[0])], copies)
        return GroupedDataset(X, labels, np.repeat([0, 1], copies))

    def hypothesis_class(self) -> HypothesisClass:
        return HypothesisClass.finite([self.h0_star, self.h1_star], vc_dimension=len(self.x_star))


def worst_case_linear(d: int) -> WorstCaseInstance:
    """Both groups sit on ``e_1``; the optimal split rules are ``1[x_1 >= 0]`` and ``1[-x_1 >= 0]``."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    e1 = tuple(1.0 if i == 0 else 0.0 for i in range(d))
    return WorstCaseInstance(e1, LinearThreshold(tuple(-v for v in e1)), LinearThreshold(e1))


# --------------------------------------------------------------------------
# finite discrete instances


@dataclass(frozen=True)
class DiscreteInstance:
    """Finite-support distribution over (group, atom, label).

    ``masses[s]`` is the marginal of group ``s`` over ``atoms`` and
    ``labeling[s]`` gives ``P(Y=1 | X=atom, S=s)``.
    """

    atoms: np.ndarray  # (m, d)
    masses: Mapping[int, np.ndarray]
    labeling: Mapping[int, np.ndarray]

    @property
    def groups(self) -> tuple[int, ...]:
        return tuple(sorted(self.masses))

    def sample(self, n_per_group: int | Mapping[int, int], seed: int = 0) -> GroupedDataset:
        rng = np.random.default_rng(seed)
        if not isinstance(n_per_group, Mapping):
            n_per_group = {s: n_per_group for s in self.groups}
        Xs, ys, gs = [], [], []
        for s in self.groups:
            n = n_per_group[s]
            idx = rng.choice(len(self.atoms), size=n, p=self.masses[s])
            Xs.append(self.atoms[idx])
            ys.append((rng.random(n) < self.labeling[s][idx]).astype(np.int64))
            gs.append(np.full(n, s))
        return GroupedDataset(np.vstack(Xs), np.concatenate(ys), np.concatenate(gs))

    def labeling_classifier(self, group: int) -> TabularScore:
        return TabularScore({atom_key(a): float(v) for a, v in zip(self.atoms, self.labeling[group])})

    def population_risk(self, h: Classifier, group: int) -> float:
        """Exact ``E|h(X) - Y|`` under group ``group``.

        For {0,1}-valued ``h`` this equals ``E|h(X) - y_s(X)|``.
        """
        p, y = self.masses[group], self.labeling[group]
        score = h(self.atoms)
        return float(p @ (score * (1.0 - y) + (1.0 - score) * y))

    def evaluator(self):
        return self.population_risk

    def tv(self, s: int = 0, t: int = 1) -> float:
        return tv_exact_discrete(self.masses[s], self.masses[t]).value

    def chi_square(self, s: int, t: int) -> float:
        return chi_square_discrete(self.masses[s], self.masses[t]).value


def random_discrete_instance(rng: np.random.Generator, n_atoms: int, n_groups: int = 2,
                             dim: int = 1, deterministic: bool = False,
                             full_support: bool = False) -> DiscreteInstance:
    """Random finite instance on integer-coordinate atoms."""
    coords = set()
    while len(coords) < n_atoms:
        coords.add(tuple(int(v) for v in rng.integers(-8, 9, size=dim)))
    atoms = np.array(sorted(coords), dtype=np.float64)
    masses, labeling = {}, {}
    for s in range(n_groups):
        w = rng.dirichlet(np.ones(n_atoms))
        if not full_support:
            w = w * (rng.random(n_atoms) < 0.8)
            if w.sum() == 0:
                w[rng.integers(n_atoms)] = 1.0
        else:
            w = w + 1e-3
        masses[s] = w / w.sum()
        lab = rng.random(n_atoms)
        labeling[s] = np.round(lab) if deterministic else lab
    return DiscreteInstance(atoms, masses, labeling)


def random_tabular(rng: np.random.Generator, atoms: np.ndarray, binary: bool = False) -> TabularScore:
    vals = rng.integers(0, 2, len(atoms)).astype(float) if binary else rng.random(len(atoms))
    return TabularScore({atom_key(a): float(v) for a, v in zip(atoms, vals)})


def coverage_instance(noise: float = 0.1) -> DiscreteInstance:
    """Shared marginal, opposite linear rules (the regime where splitting helps most).

    Atoms form the grid ``{-2,-1,1,2} x {-2,...,2}``; group 0's labels follow
    ``1[x1 >= 0]`` and group 1's ``1[x1 <= 0]``, each flipped with
    probability ``noise``.
    """
    atoms = np.array([(a, b) for a in (-2, -1, 1, 2) for b in (-2, -1, 0, 1, 2)], dtype=np.float64)
    m = len(atoms)
    uniform = np.full(m, 1.0 / m)
    pos = atoms[:, 0] > 0
    lab0 = np.where(pos, 1.0 - noise, noise)
    lab1 = np.where(pos, noise, 1.0 - noise)
    return DiscreteInstance(atoms, {0: uniform, 1: uniform.copy()}, {0: lab0, 1: lab1})


def near_shared_instance() -> DiscreteInstance:
    """Groups sharing a noisy 1-D rule except on one low-mass atom.

    Splitting has a small positive population benefit, which finite samples
    frequently fail to realize.
    """
    atoms = np.array([[-2.0], [-1.0], [1.0], [2.0], [3.0]])
    m0 = np.array([0.25, 0.25, 0.25, 0.2, 0.05])
    m1 = np.array([0.2, 0.25, 0.25, 0.25, 0.05])
    lab0 = np.array([0.25, 0.25, 0.75, 0.75, 0.75])
    lab1 = np.array([0.25, 0.25, 0.75, 0.75, 0.05])
    return DiscreteInstance(atoms, {0: m0, 1: m1}, {0: lab0, 1: lab1})


# --------------------------------------------------------------------------
# bundled tabular fixtures

FIXTURE_NAMES = ("identical_groups", "opposite_rules", "shifted_groups", "binary_survey")


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    return "\n".join(",".join(r) for r in [header] + rows) + "\n"


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def fixture_text(name: str) -> str:
    """Exact file contents of a bundled fixture (deterministic)."""
    seed = FIXTURE_NAMES.index(name) if name in FIXTURE_NAMES else None
    if seed is None:
        raise ValueError(f"unknown fixture {name!r}")
    rng = np.random.default_rng(1000 + seed)
    rows: list[list[str]] = []
    if name == "identical_groups":
        # same marginal and rule in both groups
        for sex, n in (("F", 700), ("M", 500)):
            age = 40 + 12 * _normal(rng, n)
            score = _normal(rng, n)
            color = rng.choice(["blue", "green", "red"], size=n, p=[0.5, 0.3, 0.2])
            z = 0.08 * (age - 40) + 1.5 * score + 0.5 * (color == "blue")
            y = rng.random(n) < ndtr(z)
            rows += [[sex, _fmt(a), c, _fmt(b), "yes" if t else "no"]
                     for a, c, b, t in zip(age, color, score, y)]
        return _csv_text(["sex", "age", "color", "score", "outcome"], rows)
    if name == "opposite_rules":
        # shared marginal, opposite labeling rules
        for region, n, sign in (("north", 600, 1.0), ("south", 450, -1.0)):
            x = _normal(rng, (n, 2))
            y = rng.random(n) < ndtr(3.0 * sign * x[:, 0] + 0.5 * x[:, 1])
            rows += [[region, _fmt(a), _fmt(b), "good" if t else "bad"] for (a, b), t in zip(x, y)]
        return _csv_text(["region", "x1", "x2", "rating"], rows)
    if name == "shifted_groups":
        # shifted marginals with opposite threshold rules
        for site, n, mu in (("A", 400, -1.5), ("B", 250, 1.5)):
            x = mu + _normal(rng, n)
            y = (x > -1.5) if mu < 0 else (x < 1.5)
            flip = rng.random(n) < 0.05
            noise = rng.choice(["p", "q", "r"], size=n)
            rows += [[site, _fmt(a), c, "1" if t != f else "0"] for a, c, t, f in zip(x, noise, y, flip)]
        return _csv_text(["site", "x", "batch", "target"], rows)
    # all-binary nominal attributes, ARFF
    lines = ["@relation binary_survey", "", "@attribute gender {f,m}"]
    lines += [f"@attribute q{j} {{y,n}}" for j in range(1, 5)]
    lines += ["@attribute class {pos,neg}", "", "@data"]
    for gender, n, p in (("f", 500, (0.5, 0.4, 0.6, 0.3)), ("m", 400, (0.3, 0.6, 0.5, 0.5))):
        q = rng.random((n, 4)) < np.array(p)
        logit = 2.0 * q[:, 0] - 1.5 * q[:, 1] + (1.0 if gender == "f" else -1.0) * q[:, 2] - 0.3
        y = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))
        for qi, t in zip(q, y):
            lines.append(",".join([gender] + ["y" if v else "n" for v in qi] + ["pos" if t else "neg"]))
    return "\n".join(lines) + "\n"


def fixture_filename(name: str) -> str:
    return f"{name}.arff" if name == "binary_survey" else f"{name}.csv"
