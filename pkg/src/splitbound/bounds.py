"""Upper and lower bounds on the benefit of splitting classifiers by group.

All expectations are taken under the empirical measure of the
:class:`~splitbound.core.GroupedDataset` passed in, unless a function
explicitly accepts precomputed terms.  Lower bounds are returned as-is, so a
negative value simply means the bound is vacuous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import (
    Classifier,
    GroupedDataset,
    GroupNotFoundError,
    HypothesisClass,
    binarize,
    disagreement,
    l1_risk,
)
from .divergence import DivergenceEstimate, chi_square_discrete

STRICT, DROP, CONSTANT = "strict", "drop", "constant"


def _require_binary_groups(data: GroupedDataset) -> None:
    for s in (0, 1):
        if s not in data.counts:
            raise GroupNotFoundError(s)


def _tv_value(tv) -> float:
    return float(tv.value if isinstance(tv, DivergenceEstimate) else tv)


# --------------------------------------------------------------------------
# information-theoretic bounds, evaluated on an empirical measure


def upper_bound_thm1(h0: Classifier, h1: Classifier, data: GroupedDataset) -> float:
    """``min_s E[|h1 - h0| | S = s]``."""
    _require_binary_groups(data)
    return min(disagreement(h0, h1, data, s) for s in (0, 1))


def upper_bound_convex(h0: Classifier, h1: Classifier, data: GroupedDataset) -> float:
    """Half of :func:`upper_bound_thm1`; valid when the class is convex."""
    return 0.5 * upper_bound_thm1(h0, h1, data)


def upper_bound_general(h_split: Mapping[int, Classifier], cls: HypothesisClass,
                        data: GroupedDataset) -> float:
    """Upper bound valid for arbitrary (not necessarily optimal) split classifiers.

    ``inf_h max_s E_s|h_s - h| + max_s L_s(h_s) - max_s inf_h L_s(h)``, with
    the infima found by exact enumeration of ``cls``.
    """
    from .learn import exact_minimax_value, train_split

    groups = data.groups
    X, _, g = data.X, data.y, data.g
    # relabel every sample with its own group's split classifier
    targets = np.empty(len(data))
    for s in groups:
        if s not in h_split:
            raise KeyError(f"missing split classifier for group {s}")
        m = g == s
        targets[m] = h_split[s](X[m])
    if not np.all((targets == 0) | (targets == 1)):
        raise ValueError("split classifiers must be {0,1}-valued for the relabeling")
    relabeled = GroupedDataset(X, targets.astype(np.int64), g)
    _, coupling = exact_minimax_value(relabeled, cls)
    own = max(l1_risk(h_split[s], data, s) for s in groups)
    best = max(l1_risk(train_split(data, s, cls), data, s) for s in groups)
    return coupling + own - best


def impossibility_lb_from_terms(disagreements: Sequence[float] | Mapping[int, float], tv) -> float:
    vals = list(disagreements.values()) if isinstance(disagreements, Mapping) else list(disagreements)
    return 0.5 * (max(vals) - _tv_value(tv))


def impossibility_lb_lemma1(y0: Classifier, y1: Classifier, data: GroupedDataset, tv) -> float:
    """Lower bound on the worst-group risk of every group-blind classifier.

    ``(1/2) (max_s E_s|y1 - y0| - TV(P0, P1))``; may be negative.
    """
    _require_binary_groups(data)
    return impossibility_lb_from_terms([disagreement(y0, y1, data, s) for s in (0, 1)], tv)


def lower_bound_thm3(h0: Classifier, h1: Classifier, data: GroupedDataset, tv,
                     risks: tuple[float, float]) -> float:
    """``(1/2) max_s E_s|h1 - h0| - TV - (3/2)(L0(h0) + L1(h1))``."""
    _require_binary_groups(data)
    dis = max(disagreement(h0, h1, data, s) for s in (0, 1))
    return 0.5 * dis - _tv_value(tv) - 1.5 * (risks[0] + risks[1])


def l2_upper_bound(h0: Classifier, h1: Classifier, data: GroupedDataset) -> float:
    """``min_s sqrt(E_s (h1 - h0)^2)``, the squared-loss analogue of the upper bound."""
    _require_binary_groups(data)
    out = []
    for s in (0, 1):
        X, _ = data.group(s)
        out.append(math.sqrt(float(np.mean((h1(X) - h0(X)) ** 2))))
    return min(out)


# --------------------------------------------------------------------------
# multiple groups


def multi_group_upper_bound(h_split: Mapping[int, Classifier], data: GroupedDataset) -> float:
    """``min_s max_t E_t|h_s - h_t|``."""
    groups = data.groups
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    for s in groups:
        if s not in h_split:
            raise KeyError(f"missing split classifier for group {s}")
    return min(
        max(disagreement(h_split[s], h_split[t], data, t) for t in groups)
        for s in groups
    )


def _tv_lookup(tv_matrix, groups: Sequence[int]) -> np.ndarray:
    k = len(groups)
    if isinstance(tv_matrix, Mapping):
        M = np.zeros((k, k))
        for a, s in enumerate(groups):
            for b, t in enumerate(groups):
                if a == b:
                    continue
                v = tv_matrix.get((s, t), tv_matrix.get((t, s)))
                if v is None:
                    raise ValueError(f"missing TV entry for groups {(s, t)}")
                M[a, b] = _tv_value(v)
    else:
        M = np.array([[_tv_value(v) for v in row] for row in tv_matrix], dtype=np.float64)
    if M.shape != (k, k):
        raise ValueError(f"tv_matrix must be {k}x{k}, got {M.shape}")
    if not np.allclose(M, M.T) or not np.allclose(np.diag(M), 0.0):
        raise ValueError("tv_matrix must be symmetric with a zero diagonal")
    return M


def multi_group_impossibility_lb(labeling: Mapping[int, Classifier], tv_matrix,
                                 data: GroupedDataset) -> float:
    """``max_a (1 / (2(|S|-1))) sum_b (E_a|y_a - y_b| - TV(P_a, P_b))``."""
    groups = data.groups
    k = len(groups)
    if k < 2:
        raise ValueError("need at least two groups")
    M = _tv_lookup(tv_matrix, groups)
    best = -math.inf
    for a, s in enumerate(groups):
        total = sum(
            disagreement(labeling[s], labeling[t], data, s) - M[a, b]
            for b, t in enumerate(groups)
        )
        best = max(best, total / (2 * (k - 1)))
    return best


# --------------------------------------------------------------------------
# squared loss


@dataclass(frozen=True)
class L2ImpossibilityBound:
    """Lower bound on ``max_s L_s^(2)(h)``; ``squared`` bounds the mean squared error."""

    value: float
    vacuous: bool = False
    reason: str = ""

    @property
    def squared(self) -> float:
        return self.value ** 2


def l2_impossibility_from_terms(disagreements: Mapping[int, float],
                                chi2: Mapping[int, float]) -> L2ImpossibilityBound:
    """``max_s A_s / (sqrt(chi2_s + 1) + 1)``.

    ``chi2[s]`` is the divergence of group ``s``'s marginal from the other group's.
    """
    terms = []
    for s, a in disagreements.items():
        c = _tv_value(chi2[s])
        # each direction is a valid bound on its own; unbounded ones are skipped
        if math.isfinite(c):
            terms.append(a / (math.sqrt(c + 1.0) + 1.0))
    if not terms:
        return L2ImpossibilityBound(0.0, True, "vacuous: unbounded divergence")
    return L2ImpossibilityBound(max(terms))


def l2_impossibility_lb(y0: Classifier, y1: Classifier, marginals, chi2=None) -> L2ImpossibilityBound:
    """Squared-loss impossibility bound for labeling functions ``y0``, ``y1``.

    ``marginals`` is either a :class:`GroupedDataset` (empirical marginals) or
    a mapping ``group -> (atoms, masses)`` of finite distributions over a
    shared atom array.  ``chi2`` optionally supplies ``{s: D(P_s || P_{1-s})}``.
    """
    if isinstance(marginals, GroupedDataset):
        _require_binary_groups(marginals)
        A = {s: disagreement(y0, y1, marginals, s) for s in (0, 1)}
        if chi2 is None:
            X0, _ = marginals.group(0)
            X1, _ = marginals.group(1)
            chi2 = {}
            for s, (P, Q) in {0: (X0, X1), 1: (X1, X0)}.items():
                try:
                    chi2[s] = chi_square_discrete(P, Q).value
                except ValueError:
                    chi2[s] = math.inf
    else:
        A, masses = {}, {}
        for s in (0, 1):
            atoms, w = marginals[s]
            w = np.asarray(w, dtype=np.float64)
            A[s] = float(w @ np.abs(y1(atoms) - y0(atoms)) / w.sum())
            masses[s] = w
        if chi2 is None:
            chi2 = {}
            for s in (0, 1):
                try:
                    chi2[s] = chi_square_discrete(masses[s], masses[1 - s]).value
                except ValueError:
                    chi2[s] = math.inf
    return l2_impossibility_from_terms(A, chi2)


# --------------------------------------------------------------------------
# finite-sample terms


def _log_term(n: int, vc: int, delta: float, confidence: float, mode: str) -> float:
    if mode == STRICT:
        complexity = 2.0 * vc * math.log(6.0 * n)
    elif mode == DROP:
        complexity = 0.0
    elif mode == CONSTANT:
        complexity = 2.0 * vc * math.log(6.0)
    else:
        raise ValueError(f"unknown complexity mode {mode!r}")
    return (complexity + 2.0 * math.log(confidence / delta)) / n


def _check_omega_args(counts: Sequence[int], vc: int, delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if vc < 1:
        raise ValueError("vc dimension must be >= 1")
    if any(n < 1 for n in counts):
        raise ValueError("group sizes must be >= 1")


def complexity_omega(n0: int, n1: int, vc: int, delta: float, mode: str = STRICT) -> float:
    """``4 max_s sqrt((2 D log(6 n_s) + 2 log(8/delta)) / n_s)`` (natural log).

    ``mode="drop"`` removes the ``2 D log(6 n_s)`` term; ``mode="constant"``
    replaces ``log(6 n_s)`` by ``log 6``.
    """
    _check_omega_args((n0, n1), vc, delta)
    return 4.0 * max(math.sqrt(_log_term(n, vc, delta, 8.0, mode)) for n in (n0, n1))


def split_discrepancy_bound(n0: int, n1: int, vc: int, delta: float) -> float:
    """Bound on ``|sample-limited - empirical benefit|`` (uses ``log(16/delta)``)."""
    _check_omega_args((n0, n1), vc, delta)
    return 4.0 * max(math.sqrt(_log_term(n, vc, delta, 16.0, STRICT)) for n in (n0, n1))


@dataclass(frozen=True)
class BoundComponents:
    disagreement_per_group: Mapping[int, float]
    tv_estimate: DivergenceEstimate
    lambda_: float
    omega: float
    delta: float
    vc_dimension: int
    practical_mode: bool = False

    def __post_init__(self) -> None:
        if self.lambda_ < 0 or self.omega < 0:
            raise ValueError("lambda and omega must be non-negative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    @property
    def disagreement_mean(self) -> float:
        vals = list(self.disagreement_per_group.values())
        return float(sum(vals) / len(vals))


@dataclass(frozen=True)
class SplitAnalysis:
    upper_bound: float
    lower_bound: float
    components: BoundComponents
    group_sizes: Mapping[int, int]
    epsilon_hat_split: float | None = None
    epsilon_hat_empirical: float | None = None
    vacuous_flags: frozenset[str] = field(default_factory=frozenset)

    def brackets(self, value: float, slack: float = 0.0) -> bool:
        return self.lower_bound - slack <= value <= self.upper_bound + slack


def finite_sample_bounds_cor1(h0_hat: Classifier, h1_hat: Classifier, data: GroupedDataset,
                              tv_hat, delta: float = 0.05, vc: int = 3,
                              practical_mode: bool = False, practical_variant: str = DROP,
                              ) -> SplitAnalysis:
    """High-probability bounds on the sample-limited benefit of splitting.

    ``data`` are the training samples.  Probabilistic classifiers are
    thresholded at 0.5 first, since the bounds need {0,1}-valued hypotheses.
    In practical mode the training-loss term is dropped and the complexity
    term is reduced per ``practical_variant``.
    """
    _require_binary_groups(data)
    h0, h1 = binarize(h0_hat), binarize(h1_hat)
    dis = {s: disagreement(h0, h1, data, s) for s in (0, 1)}
    lam = 0.5 * (l1_risk(h0, data, 0) + l1_risk(h1, data, 1))
    n0, n1 = data.counts[0], data.counts[1]
    mode = practical_variant if practical_mode else STRICT
    omega = complexity_omega(n0, n1, vc, delta, mode)
    tv = tv_hat if isinstance(tv_hat, DivergenceEstimate) else DivergenceEstimate(float(tv_hat), "given")
    upper = min(dis.values()) + omega
    lower = 0.5 * max(dis.values()) - tv.value - omega
    if not practical_mode:
        lower -= 3.0 * lam
    flags = set()
    if lower <= 0:
        flags.add("lower_bound_vacuous")
    if upper >= 1:
        flags.add("upper_bound_vacuous")
    if lower > upper:
        # only possible when tv_hat underestimates the empirical TV
        flags.add("bounds_inverted")
    comps = BoundComponents(dis, tv, lam, omega, delta, vc, practical_mode)
    return SplitAnalysis(upper, lower, comps, {0: n0, 1: n1}, vacuous_flags=frozenset(flags))


# --------------------------------------------------------------------------
# benefit of splitting

RiskEvaluator = Callable[[Classifier, int], float]


def sample_limited_splitting(h_blind: Classifier, h_split: Mapping[int, Classifier],
                             evaluate: RiskEvaluator, groups: Sequence[int] | None = None) -> float:
    """``max_s L_s(h_blind) - max_s L_s(h_s)`` with ``L`` supplied by ``evaluate``.

    ``evaluate(h, s)`` returns a population (or held-out) risk.
    """
    groups = list(h_split) if groups is None else list(groups)
    for s in groups:
        if s not in h_split:
            raise KeyError(f"missing split classifier for group {s}")
    return max(evaluate(h_blind, s) for s in groups) - max(evaluate(h_split[s], s) for s in groups)


def empirical_benefit_of_splitting(h_blind: Classifier, h_split: Mapping[int, Classifier],
                                   data: GroupedDataset, risk=l1_risk) -> float:
    """Training-loss version of the benefit of splitting."""
    for s in data.groups:
        if s not in h_split:
            raise KeyError(f"missing split classifier for group {s}")
    blind = max(risk(h_blind, data, s) for s in data.groups)
    split = max(risk(h_split[s], data, s) for s in data.groups)
    return blind - split


def dataset_evaluator(data: GroupedDataset, risk=l1_risk) -> RiskEvaluator:
    """Risk evaluator backed by a held-out dataset."""
    return lambda h, s: risk(h, data, s)


__all__ = [
    "BoundComponents",
    "L2ImpossibilityBound",
    "SplitAnalysis",
    "complexity_omega",
    "dataset_evaluator",
    "empirical_benefit_of_splitting",
    "finite_sample_bounds_cor1",
    "impossibility_lb_from_terms",
    "impossibility_lb_lemma1",
    "l2_impossibility_from_terms",
    "l2_impossibility_lb",
    "l2_upper_bound",
    "lower_bound_thm3",
    "multi_group_impossibility_lb",
    "multi_group_upper_bound",
    "sample_limited_splitting",
    "split_discrepancy_bound",
    "upper_bound_convex",
    "upper_bound_general",
    "upper_bound_thm1",
]
