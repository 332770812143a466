"""Training of split (per-group) and group-blind classifiers.

Linear classes are fit by L2-regularized logistic regression.  One-dimensional
threshold and interval classes, and finite enumerations, are fit exactly by
scanning every candidate.  The group-blind classifier is found either exactly
(:func:`exact_minimax`) or through the reweighting dual with cross-validated
selection of the group weights (:func:`train_group_blind`).
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    FINITE,
    INTERVAL,
    LINEAR,
    THRESHOLD_PAIR,
    Classifier,
    GroupedDataset,
    HypothesisClass,
    Interval,
    LinearLogistic,
    ThresholdAbove,
    ThresholdBelow,
)
from .divergence import InsufficientSamplesError

log = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    pass


class EnumerationUnsupportedError(TypeError):
    def __init__(self, msg: str = "enumeration unsupported") -> None:
        super().__init__(msg)


@dataclass(frozen=True)
class TrainConfig:
    regularization_strength: float = 1.0
    max_iterations: int = 1000
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.regularization_strength < 0:
            raise ValueError("regularization_strength must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


DEFAULT_WEIGHT_GRID = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class MinimaxConfig:
    weight_grid: tuple[float, ...] = DEFAULT_WEIGHT_GRID
    folds: int = 5
    selection: str = "min_max_group_cv_loss"
    cv_loss: str = "l1"  # "l1" on raw scores, or "zero_one"
    simplex_resolution: float = 0.1

    def __post_init__(self) -> None:
        if not self.weight_grid:
            raise ValueError("weight_grid must be non-empty")
        if any(not 0.0 <= w <= 1.0 for w in self.weight_grid):
            raise ValueError("weights must lie in [0, 1]")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.selection != "min_max_group_cv_loss":
            raise ValueError(f"unknown selection rule {self.selection!r}")
        if self.cv_loss not in ("l1", "zero_one"):
            raise ValueError("cv_loss must be 'l1' or 'zero_one'")


# --------------------------------------------------------------------------
# logistic regression


def fit_logistic(X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray | None = None,
                 cfg: TrainConfig = TrainConfig()) -> LinearLogistic:
    """L2-regularized logistic regression (intercept not penalized).

    Minimizes ``(1/n) [sum_i v_i logloss_i + reg/2 |w|^2]`` where the sample
    weights ``v`` are rescaled to sum to ``n``, by damped Newton steps with
    Armijo backtracking.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    v = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    v = v * (n / v.sum())
    A = np.hstack([X, np.ones((n, 1))])
    penalty = np.full(d + 1, cfg.regularization_strength)
    penalty[-1] = 0.0

    def objective(theta):
        z = A @ theta
        return (v @ (np.logaddexp(0.0, z) - y * z) + 0.5 * penalty @ (theta * theta)) / n

    theta = np.zeros(d + 1)
    value = objective(theta)
    converged = False
    for _ in range(cfg.max_iterations):
        z = A @ theta
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        grad = (A.T @ (v * (p - y)) + penalty * theta) / n
        if np.max(np.abs(grad)) < cfg.tolerance:
            converged = True
            break
        H = (A.T * (v * p * (1.0 - p))) @ A / n + np.diag(penalty) / n
        H[np.diag_indices_from(H)] += 1e-12
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = grad @ step
        if slope >= 0:  # not a descent direction; fall back to the gradient
            step, slope = -grad, -(grad @ grad)
        t = 1.0
        for _ in range(60):
            candidate = objective(theta + t * step)
            if candidate <= value + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            # no further decrease representable in floating point
            converged = bool(np.max(np.abs(grad)) < math.sqrt(cfg.tolerance))
            break
        theta = theta + t * step
        value = candidate
    if not converged:
        warnings.warn("logistic regression did not converge", ConvergenceWarning, stacklevel=2)
    return LinearLogistic(tuple(float(c) for c in theta[:-1]), float(theta[-1]), converged)


# --------------------------------------------------------------------------
# exact enumeration over 1-D classes


@dataclass
class _Runs:
    """Sorted coordinate runs with per-group loss increments.

    Consecutive distinct coordinates whose samples all share one (group,
    label) pair are merged: moving a cut inside such a run changes only one
    group's loss, monotonically, so an optimum always sits on a run boundary.
    """

    cuts: np.ndarray  # m + 1 cut positions, cuts[0] = -inf, cuts[m] = +inf
    base: np.ndarray  # (K,) loss with everything predicted 0
    prefix: np.ndarray  # (m + 1, K) cumulative loss change of predicting 1


def _runs(x: np.ndarray, y: np.ndarray, gidx: np.ndarray, w: np.ndarray, K: int) -> _Runs:
    vals, inverse = np.unique(x, return_inverse=True)
    inverse = inverse.reshape(-1)
    nv = len(vals)
    delta = np.zeros((nv, K))
    np.add.at(delta, (inverse, gidx), w * (1.0 - 2.0 * y))
    base = np.bincount(gidx, weights=w * y, minlength=K).astype(np.float64)

    # type of each distinct value: (group, label) code, or -1 if mixed
    code = gidx * 2 + y.astype(np.int64)
    lo = np.full(nv, np.iinfo(np.int64).max)
    hi = np.full(nv, -1)
    np.minimum.at(lo, inverse, code)
    np.maximum.at(hi, inverse, code)
    vtype = np.where(lo == hi, lo, -1 - np.arange(nv))
    starts = np.flatnonzero(np.r_[True, vtype[1:] != vtype[:-1]])
    block_delta = np.add.reduceat(delta, starts, axis=0)
    ends = np.r_[starts[1:], nv] - 1
    m = len(starts)
    cuts = np.empty(m + 1)
    cuts[0], cuts[m] = -np.inf, np.inf
    cuts[1:m] = 0.5 * (vals[ends[:-1]] + vals[starts[1:]])
    prefix = np.vstack([np.zeros((1, K)), np.cumsum(block_delta, axis=0)])
    return _Runs(cuts, base, prefix)


Reducer = Callable[[np.ndarray], np.ndarray]


def _max_reducer(losses: np.ndarray) -> np.ndarray:
    return losses.max(axis=-1)


def _sum_reducer(losses: np.ndarray) -> np.ndarray:
    return losses.sum(axis=-1)


def _best_threshold(r: _Runs, reduce: Reducer, feature: int) -> tuple[Classifier, float]:
    m = len(r.cuts) - 1
    above = r.base + (r.prefix[m] - r.prefix)  # ThresholdAbove(cuts[i])
    below = r.base + r.prefix  # ThresholdBelow(cuts[j])
    obj = np.concatenate([reduce(above), reduce(below)])
    k = int(np.argmin(obj))
    if k <= m:
        return ThresholdAbove(float(r.cuts[k]), feature), float(obj[k])
    return ThresholdBelow(float(r.cuts[k - m - 1]), feature), float(obj[k])


def _best_interval(r: _Runs, reduce: Reducer, feature: int) -> tuple[Classifier, float]:
    m1 = len(r.cuts)
    K = r.prefix.shape[1]
    chunk = max(1, int(4_000_000 // max(m1 * K, 1)))
    best = (math.inf, 0, 0)
    cols = np.arange(m1)
    for i0 in range(0, m1, chunk):
        rows = np.arange(i0, min(i0 + chunk, m1))
        losses = r.base + r.prefix[None, :, :] - r.prefix[rows][:, None, :]
        obj = reduce(losses)
        obj[cols[None, :] < rows[:, None]] = np.inf
        flat = int(np.argmin(obj))
        i, j = divmod(flat, m1)
        if obj[i, j] < best[0]:
            best = (float(obj[i, j]), int(rows[i]), j)
    value, i, j = best
    return Interval(float(r.cuts[i]), float(r.cuts[j]), feature), value


def _fit_1d(data: GroupedDataset, cls: HypothesisClass, group_weights: dict[int, float],
            reduce: Reducer) -> tuple[Classifier, float]:
    """Best 1-D classifier for ``reduce`` applied to per-group weighted losses.

    Each sample of group ``s`` carries weight ``group_weights[s] / n_s``.
    """
    groups = [s for s in data.groups if s in group_weights]
    index = {s: k for k, s in enumerate(groups)}
    keep = np.isin(data.g, groups)
    gidx = np.array([index[s] for s in data.g[keep]], dtype=np.int64)
    w = np.array([group_weights[s] / data.counts[s] for s in groups])[gidx]
    x = data.X[keep, cls.feature]
    r = _runs(x, data.y[keep].astype(np.float64), gidx, w, len(groups))
    if cls.family == THRESHOLD_PAIR:
        return _best_threshold(r, reduce, cls.feature)
    if cls.family == INTERVAL:
        return _best_interval(r, reduce, cls.feature)
    raise EnumerationUnsupportedError()


# --------------------------------------------------------------------------
# finite enumeration


def _candidate_losses(cls: HypothesisClass, data: GroupedDataset, groups: Sequence[int]) -> np.ndarray:
    """(candidates, groups) matrix of l1 risks."""
    out = np.empty((len(cls.candidates), len(groups)))
    for k, s in enumerate(groups):
        X, y = data.group(s)
        for c, h in enumerate(cls.candidates):
            out[c, k] = np.mean(np.abs(h(X) - y))
    return out


# --------------------------------------------------------------------------
# public training API


def fit_weighted(data: GroupedDataset, cls: HypothesisClass, group_weights: dict[int, float],
                 cfg: TrainConfig = TrainConfig()) -> Classifier:
    """Minimizer of ``sum_s group_weights[s] * L_s(h)`` over ``cls``."""
    if cls.family == LINEAR:
        groups = [s for s in data.groups if group_weights.get(s, 0.0) > 0]
        if not groups:
            raise ValueError("all group weights are zero")
        keep = np.isin(data.g, groups)
        sw = np.array([group_weights[s] / data.counts[s] for s in data.g[keep]])
        return fit_logistic(data.X[keep], data.y[keep], sw, cfg)
    if cls.family == FINITE:
        groups = list(group_weights)
        losses = _candidate_losses(cls, data, groups)
        obj = losses @ np.array([group_weights[s] for s in groups])
        return cls.candidates[int(np.argmin(obj))]
    return _fit_1d(data, cls, group_weights, _sum_reducer)[0]


def train_split(data: GroupedDataset, group: int, cls: HypothesisClass,
                cfg: TrainConfig = TrainConfig()) -> Classifier:
    """Empirical risk minimizer over ``cls`` using only the samples of ``group``."""
    data.mask(group)  # raises for unknown groups
    if cls.family == LINEAR and cls.dimension is not None and cls.dimension != data.dimension:
        raise ValueError("hypothesis class dimension does not match the data")
    return fit_weighted(data, cls, {group: 1.0}, cfg)


def exact_minimax(data: GroupedDataset, cls: HypothesisClass) -> Classifier:
    """Candidate minimizing the worst-group empirical risk, by enumeration."""
    return exact_minimax_value(data, cls)[0]


def exact_minimax_value(data: GroupedDataset, cls: HypothesisClass) -> tuple[Classifier, float]:
    if cls.family == LINEAR:
        raise EnumerationUnsupportedError()
    if cls.family == FINITE:
        worst = _candidate_losses(cls, data, data.groups).max(axis=1)
        k = int(np.argmin(worst))
        return cls.candidates[k], float(worst[k])
    return _fit_1d(data, cls, {s: 1.0 for s in data.groups}, _max_reducer)


def simplex_grid(k: int, resolution: float = 0.1) -> list[tuple[float, ...]]:
    """Points of the probability simplex in ``k`` dimensions on a regular grid."""
    steps = int(round(1.0 / resolution))
    out = []
    for combo in itertools.product(range(steps + 1), repeat=k - 1):
        rest = steps - sum(combo)
        if rest >= 0:
            out.append(tuple(c / steps for c in combo) + (rest / steps,))
    return sorted(out)


def stratified_folds(data: GroupedDataset, folds: int, seed: int) -> np.ndarray:
    """Fold id per sample, assigned independently within each group."""
    rng = np.random.default_rng(seed)
    ids = np.empty(len(data), dtype=np.int64)
    for s in data.groups:
        idx = np.flatnonzero(data.g == s)
        perm = rng.permutation(idx)
        for k, chunk in enumerate(np.array_split(perm, folds)):
            ids[chunk] = k
    return ids


def _heldout_losses(h: Classifier, data: GroupedDataset, kind: str) -> dict[int, np.ndarray]:
    out = {}
    for s in data.groups:
        X, y = data.group(s)
        p = h(X)
        if kind == "zero_one":
            p = (p >= 0.5).astype(np.float64)
        out[s] = np.abs(p - y)
    return out


def train_group_blind(data: GroupedDataset, cls: HypothesisClass,
                      mcfg: MinimaxConfig = MinimaxConfig(),
                      cfg: TrainConfig = TrainConfig()):
    """Group-blind classifier via the reweighting dual.

    For every candidate weighting, a weighted risk minimizer is trained on
    each set of training folds and scored on the held-out fold.  Per-group
    losses are pooled over folds; the weighting with the smallest worst-group
    cross-validated loss wins (earliest in grid order on ties) and is refit on
    all data.

    Returns ``(classifier, weight)``; ``weight`` is the group-0 weight for two
    groups and the full weight vector otherwise.
    """
    groups = data.groups
    if len(groups) < 2:
        raise ValueError("group-blind training needs at least two groups")
    if min(data.counts.values()) < mcfg.folds:
        raise InsufficientSamplesError()
    if len(groups) == 2:
        grid = [(w, 1.0 - w) for w in mcfg.weight_grid]
    else:
        grid = simplex_grid(len(groups), mcfg.simplex_resolution)

    fold_ids = stratified_folds(data, mcfg.folds, cfg.seed)
    train_sets = [data.subset(np.flatnonzero(fold_ids != k)) for k in range(mcfg.folds)]
    test_sets = [data.subset(np.flatnonzero(fold_ids == k)) for k in range(mcfg.folds)]

    best_value, best_weights = math.inf, grid[0]
    for weights in grid:
        gw = dict(zip(groups, weights))
        pooled: dict[int, list[np.ndarray]] = {s: [] for s in groups}
        for tr, te in zip(train_sets, test_sets):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                h = fit_weighted(tr, cls, gw, cfg)
            for s, losses in _heldout_losses(h, te, mcfg.cv_loss).items():
                pooled[s].append(losses)
        value = max(float(np.mean(np.concatenate(v))) for v in pooled.values())
        log.debug("weights %s: cv worst-group loss %.5f", weights, value)
        if value < best_value:
            best_value, best_weights = value, weights
    h = fit_weighted(data, cls, dict(zip(groups, best_weights)), cfg)
    selected = best_weights[0] if len(groups) == 2 else best_weights
    return h, selected
