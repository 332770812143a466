"""Domain types and the risk functionals used throughout the package.

Classifiers score a feature matrix ``X`` of shape ``(n, d)`` and return
probabilities in ``[0, 1]``.  A :class:`GroupedDataset` holds binary-labeled
samples tagged with small integer group ids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class GroupNotFoundError(KeyError):
    """Raised when an operation names a group absent from the dataset."""

    def __str__(self) -> str:
        return f"group not found: {self.args[0]!r}"


class DimensionMismatchError(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledSample:
    features: tuple[float, ...]
    label: int
    group: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


class GroupedDataset:
    """Binary-labeled samples partitioned by group.

    Arrays are copied and frozen on construction. Group ids are kept as given
    (non-negative integers); ``groups`` lists them in ascending order.
    """

    __slots__ = ("X", "y", "g", "groups", "counts")

    def __init__(self, X, y, g) -> None:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y_raw = np.asarray(y)
        g = np.asarray(g).astype(np.int64)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D array")
        n = X.shape[0]
        if y_raw.shape != (n,) or g.shape != (n,):
            raise ValueError("features, labels and groups must have equal length")
        if n and not np.all((y_raw == 0) | (y_raw == 1)):
            raise ValueError("labels must be in {0, 1}")
        if n and g.min() < 0:
            raise ValueError("group ids must be non-negative integers")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y_raw.astype(np.int64)))
        object.__setattr__(self, "g", _readonly(g))
        groups, counts = np.unique(g, return_counts=True)
        object.__setattr__(self, "groups", tuple(int(s) for s in groups))
        object.__setattr__(self, "counts", {int(s): int(c) for s, c in zip(groups, counts)})

    def __setattr__(self, name, value):
        raise AttributeError("GroupedDataset is immutable")

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "GroupedDataset":
        if not samples:
            raise ValueError("no samples")
        dims = {len(s.features) for s in samples}
        if len(dims) != 1:
            raise DimensionMismatchError("dimension mismatch: samples differ in feature dimension")
        X = np.array([s.features for s in samples], dtype=np.float64)
        return cls(X, [s.label for s in samples], [s.group for s in samples])

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def samples(self) -> list[LabeledSample]:
        return [
            LabeledSample(tuple(float(v) for v in x), int(yy), int(gg))
            for x, yy, gg in zip(self.X, self.y, self.g)
        ]

    def mask(self, group: int) -> np.ndarray:
        if group not in self.counts:
            raise GroupNotFoundError(group)
        return self.g == group

    def group(self, group: int) -> tuple[np.ndarray, np.ndarray]:
        """Features and labels of one group."""
        m = self.mask(group)
        return self.X[m], self.y[m]

    def subset(self, index) -> "GroupedDataset":
        index = np.asarray(index)
        return GroupedDataset(self.X[index], self.y[index], self.g[index])

    def __repr__(self) -> str:
        return f"GroupedDataset(n={len(self)}, d={self.dimension}, counts={self.counts})"


# --------------------------------------------------------------------------
# classifiers


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Classifier:
    """Base class; subclasses implement :meth:`score`."""

    #: feature dimension the classifier expects, ``None`` if any
    dimension: int | None = None

    def score(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if self.dimension is not None and X.shape[1] != self.dimension:
            raise DimensionMismatchError(
                f"dimension mismatch: classifier expects {self.dimension}, got {X.shape[1]}"
            )
        return self.score(X)

    @property
    def is_binary(self) -> bool:
        return False


@dataclass(frozen=True)
class LinearLogistic(Classifier):
    weights: tuple[float, ...]
    bias: float = 0.0
    converged: bool = field(default=True, compare=False)

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def decision(self, X) -> np.ndarray:
        return _as_matrix(X) @ np.asarray(self.weights) + self.bias

    def score(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))

    def thresholded(self) -> "LinearThreshold":
        """The 0.5-thresholded {0,1} classifier."""
        return LinearThreshold(self.weights, self.bias)


@dataclass(frozen=True)
class LinearThreshold(Classifier):
    """``1[w.x + b >= 0]``."""

    weights: tuple[float, ...]
    bias: float = 0.0

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def score(self, X) -> np.ndarray:
        return (_as_matrix(X) @ np.asarray(self.weights) + self.bias >= 0).astype(np.float64)

    @property
    def is_binary(self) -> bool:
        return True


@dataclass(frozen=True)
class ThresholdAbove(Classifier):
    """``1[x_k > a]`` on feature ``k``."""

    a: float
    feature: int = 0

    def score(self, X) -> np.ndarray:
        return (_as_matrix(X)[:, self.feature] > self.a).astype(np.float64)

    @property
    def is_binary(self) -> bool:
        return True


@dataclass(frozen=True)
class ThresholdBelow(Classifier):
    """``1[x_k < b]`` on feature ``k``."""

    b: float
    feature: int = 0

    def score(self, X) -> np.ndarray:
        return (_as_matrix(X)[:, self.feature] < self.b).astype(np.float64)

    @property
    def is_binary(self) -> bool:
        return True


@dataclass(frozen=True)
class Interval(Classifier):
    """``1[a < x_k < b]``; infinite endpoints give thresholds."""

    a: float
    b: float
    feature: int = 0

    def score(self, X) -> np.ndarray:
        x = _as_matrix(X)[:, self.feature]
        return ((x > self.a) & (x < self.b)).astype(np.float64)

    @property
    def is_binary(self) -> bool:
        return True

    def reduced(self) -> Classifier:
        """Equivalent threshold when one endpoint is infinite."""
        if self.a == -math.inf and self.b != math.inf:
            return ThresholdBelow(self.b, self.feature)
        if self.b == math.inf and self.a != -math.inf:
            return ThresholdAbove(self.a, self.feature)
        return self


@dataclass(frozen=True)
class Constant(Classifier):
    c: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("constant score must lie in [0, 1]")

    def score(self, X) -> np.ndarray:
        return np.full(_as_matrix(X).shape[0], float(self.c))

    @property
    def is_binary(self) -> bool:
        return self.c in (0.0, 1.0)


def atom_key(x) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(x))


@dataclass(frozen=True)
class TabularScore(Classifier):
    """Lookup table from atoms (feature tuples) to probabilities.

    ``default`` scores atoms missing from the table; ``None`` makes them an error.
    """

    table: Mapping[tuple[float, ...], float]
    default: float | None = None

    def __post_init__(self) -> None:
        for v in self.table.values():
            if not 0.0 <= v <= 1.0:
                raise ValueError("tabular scores must lie in [0, 1]")

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.table.items())), self.default))

    def score(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[0] == 0:
            return np.empty(0)
        uniq, inverse = np.unique(X, axis=0, return_inverse=True)
        vals = np.empty(uniq.shape[0])
        for i, x in enumerate(uniq):
            key = atom_key(x)
            v = self.table.get(key, self.default)
            if v is None:
                raise KeyError(f"atom {key} not in table")
            vals[i] = v
        return vals[inverse.reshape(-1)]

    @property
    def is_binary(self) -> bool:
        vals = set(self.table.values())
        if self.default is not None:
            vals.add(self.default)
        return vals <= {0.0, 1.0}


def binarize(h: Classifier) -> Classifier:
    """0.5-thresholded version of ``h`` (identity on {0,1}-valued classifiers)."""
    if h.is_binary:
        return h
    if isinstance(h, LinearLogistic):
        return h.thresholded()
    return _Thresholded(h)


@dataclass(frozen=True)
class _Thresholded(Classifier):
    inner: Classifier

    @property
    def dimension(self):
        return self.inner.dimension

    def score(self, X) -> np.ndarray:
        return (self.inner.score(X) >= 0.5).astype(np.float64)

    @property
    def is_binary(self) -> bool:
        return True


# --------------------------------------------------------------------------
# hypothesis classes

LINEAR, THRESHOLD_PAIR, INTERVAL, FINITE = "linear", "threshold_pair", "interval", "finite"


@dataclass(frozen=True)
class HypothesisClass:
    family: str
    vc_dimension: int
    dimension: int | None = None
    candidates: tuple[Classifier, ...] = ()
    feature: int = 0

    def __post_init__(self) -> None:
        if self.family not in (LINEAR, THRESHOLD_PAIR, INTERVAL, FINITE):
            raise ValueError(f"unknown hypothesis family {self.family!r}")
        if self.family == FINITE and not self.candidates:
            raise ValueError("finite enumeration class must be non-empty")
        if self.vc_dimension < 1:
            raise ValueError("vc_dimension must be >= 1")

    @classmethod
    def linear(cls, d: int) -> "HypothesisClass":
        return cls(LINEAR, d + 1, dimension=d)

    @classmethod
    def threshold_pair(cls, feature: int = 0) -> "HypothesisClass":
        return cls(THRESHOLD_PAIR, 2, feature=feature)

    @classmethod
    def interval(cls, feature: int = 0) -> "HypothesisClass":
        return cls(INTERVAL, 2, feature=feature)

    @classmethod
    def finite(cls, candidates: Sequence[Classifier], vc_dimension: int | None = None):
        candidates = tuple(candidates)
        if vc_dimension is None:
            vc_dimension = max(1, int(math.floor(math.log2(max(len(candidates), 1)))))
        return cls(FINITE, vc_dimension, candidates=candidates)

    @property
    def enumerable(self) -> bool:
        return self.family != LINEAR


# --------------------------------------------------------------------------
# risks

L1, L2, ZERO_ONE = "l1", "l2", "zero_one"


@dataclass(frozen=True)
class RiskReport:
    per_group: Mapping[int, float]
    loss_kind: str

    def __post_init__(self) -> None:
        if self.loss_kind not in (L1, L2, ZERO_ONE):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        for v in self.per_group.values():
            if not 0.0 <= v <= 1.0:
                raise ValueError("risk values must lie in [0, 1]")

    @property
    def worst(self) -> float:
        return max(self.per_group.values())


def _scores_on(h: Classifier, data: GroupedDataset, group: int) -> tuple[np.ndarray, np.ndarray]:
    X, y = data.group(group)
    return h(X), y


def l1_risk(h: Classifier, data: GroupedDataset, group: int) -> float:
    """Mean absolute deviation between scores and labels within ``group``."""
    p, y = _scores_on(h, data, group)
    return float(np.mean(np.abs(p - y)))


def l2_risk(h: Classifier, data: GroupedDataset, group: int) -> float:
    p, y = _scores_on(h, data, group)
    return float(math.sqrt(np.mean((p - y) ** 2)))


def zero_one_risk(h: Classifier, data: GroupedDataset, group: int) -> float:
    p, y = _scores_on(binarize(h), data, group)
    return float(np.mean(p != y))


def disagreement(h0: Classifier, h1: Classifier, data: GroupedDataset, group: int) -> float:
    """Mean ``|h1(x) - h0(x)|`` over the samples of ``group``."""
    X, _ = data.group(group)
    return float(np.mean(np.abs(h1(X) - h0(X))))


_RISKS = {L1: l1_risk, L2: l2_risk, ZERO_ONE: zero_one_risk}


def risk_report(h: Classifier, data: GroupedDataset, loss_kind: str = L1) -> RiskReport:
    fn = _RISKS[loss_kind]
    return RiskReport({s: fn(h, data, s) for s in data.groups}, loss_kind)


def empirical_labeling(data: GroupedDataset, group: int, default: float | None = 0.5) -> TabularScore:
    """Per-atom label frequency within ``group``, as a tabular classifier."""
    X, y = data.group(group)
    uniq, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    ones = np.bincount(inverse.reshape(-1), weights=y, minlength=len(uniq))
    table = {atom_key(x): float(k / c) for x, k, c in zip(uniq, ones, counts)}
    return TabularScore(table, default=default)
