"""Tabular loading, binarization and optional remote download of datasets."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
import urllib.error
import urllib.request
import warnings
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import GroupedDataset

log = logging.getLogger(__name__)

NUMERIC, CATEGORICAL, BINARY = "numeric", "categorical", "binary"
MISSING_TOKENS = frozenset({"", "?", "NA", "NaN", "nan"})


class TableParseError(ValueError):
    """Malformed input, located by 1-based data row and column name when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None) -> None:
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class PreprocessError(ValueError):
    pass


class FetchError(RuntimeError):
    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class Table:
    """Column-typed table; missing entries are ``None``.

    Numeric columns hold floats, categorical columns hold strings.  A column
    with exactly two distinct values is typed ``binary`` and keeps its
    underlying representation.
    """

    columns: tuple[str, ...]
    data: dict[str, list]
    types: dict[str, str]

    def __post_init__(self) -> None:
        if len(set(self.columns)) != len(self.columns):
            raise TableParseError("duplicate column names")
        lengths = {len(self.data[c]) for c in self.columns}
        if len(lengths) > 1:
            raise TableParseError("columns have different lengths")

    def __len__(self) -> int:
        return len(self.data[self.columns[0]]) if self.columns else 0

    def column(self, selector: int | str) -> str:
        if isinstance(selector, (int, np.integer)) and not isinstance(selector, bool):
            if not -len(self.columns) <= selector < len(self.columns):
                raise PreprocessError(f"column index {selector} out of range")
            return self.columns[selector]
        if selector in self.columns:
            return selector
        if isinstance(selector, str) and selector.lstrip("-").isdigit():
            return self.column(int(selector))
        raise PreprocessError(f"no column named {selector!r}")


def _distinct(values) -> set:
    return {v for v in values if v is not None}


def _kind(base: str, values) -> str:
    return BINARY if len(_distinct(values)) == 2 else base


def _parse_float(token: str) -> float | None:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _infer_column(name: str, tokens: list[str | None]) -> tuple[list, str]:
    parsed = [None if t is None else _parse_float(t) for t in tokens]
    present = [i for i, t in enumerate(tokens) if t is not None]
    bad = [i for i in present if parsed[i] is None]
    if not bad:
        return parsed, _kind(NUMERIC, parsed)
    if len(bad) == len(present):
        return list(tokens), _kind(CATEGORICAL, tokens)
    # mixed: blame the minority kind, pointing at its first entry
    good = [i for i in present if parsed[i] is not None]
    culprit = bad[0] if len(bad) <= len(good) else good[0]
    raise TableParseError(f"ambiguous column type: unexpected value {tokens[culprit]!r}",
                          row=culprit + 1, column=name)


def _read_csv(path: Path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise TableParseError("empty file, header row required") from None
        except csv.Error as exc:
            raise TableParseError(str(exc), row=0) from None
        header = [h.strip() for h in header]
        rows = []
        try:
            for i, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) != len(header):
                    raise TableParseError(f"expected {len(header)} fields, got {len(row)}", row=i)
                rows.append([None if c.strip() in MISSING_TOKENS else c.strip() for c in row])
        except csv.Error as exc:
            raise TableParseError(str(exc), row=reader.line_num) from None
    data, types = {}, {}
    for j, name in enumerate(header):
        data[name], types[name] = _infer_column(name, [r[j] for r in rows])
    return Table(tuple(header), data, types)


def _read_arff(path: Path) -> Table:
    from scipy.io import arff

    try:
        records, meta = arff.loadarff(str(path))
    except Exception as exc:  # scipy raises several unrelated types
        raise TableParseError(f"invalid ARFF: {exc}") from None
    data, types = {}, {}
    for name in meta.names():
        kind, levels = meta[name]
        col = records[name]
        if kind == "nominal":
            values = [v.decode() if isinstance(v, bytes) else str(v) for v in col]
            data[name] = [None if v == "?" else v for v in values]
            types[name] = BINARY if len(levels) == 2 else CATEGORICAL
        elif kind == "numeric":
            data[name] = [None if math.isnan(v) else float(v) for v in col]
            types[name] = NUMERIC
        else:
            raise TableParseError(f"unsupported attribute type {kind!r}", column=name)
    return Table(tuple(meta.names()), data, types)


def load_table(path, format: str | None = None) -> Table:
    """Read a CSV (header row required) or ARFF file into a typed :class:`Table`."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        return _read_csv(path)
    if fmt == "arff":
        return _read_arff(path)
    raise ValueError(f"unsupported format {fmt!r}")


# --------------------------------------------------------------------------
# preprocessing


@dataclass(frozen=True)
class PreprocessConfig:
    sensitive_column: int | str | None = None
    label_column: int | str | None = None
    max_per_group: int = 10_000
    binarization: str = "most_frequent_to_one"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_per_group < 1:
            raise ValueError("max_per_group must be positive")
        if self.binarization != "most_frequent_to_one":
            raise ValueError(f"unknown binarization {self.binarization!r}")
        if (self.sensitive_column is not None and self.label_column is not None
                and self.sensitive_column == self.label_column):
            raise ValueError("sensitive and label columns must be distinct")


@dataclass(frozen=True)
class PreprocessReport:
    dataset: GroupedDataset
    feature_names: tuple[str, ...]
    sensitive_column: str
    label_column: str
    rows_read: int
    rows_dropped_missing: int
    rows_truncated: int
    feature_kinds: dict[str, str] = field(default_factory=dict)


def most_frequent_value(values):
    """Mode of ``values``; ties go to the smallest value."""
    counts = Counter(values)
    return min(counts, key=lambda v: (-counts[v], v))


def _binarize_column(values) -> np.ndarray:
    top = most_frequent_value(values)
    return np.array([1.0 if v == top else 0.0 for v in values])


def preprocess_with_report(table: Table, cfg: PreprocessConfig = PreprocessConfig()) -> PreprocessReport:
    if len(table) == 0:
        raise PreprocessError("table is empty")
    label = table.column(cfg.label_column if cfg.label_column is not None else -1)
    if cfg.sensitive_column is not None:
        sensitive = table.column(cfg.sensitive_column)
        if table.types[sensitive] == NUMERIC:
            raise PreprocessError(f"sensitive column {sensitive!r} is not binary")
    else:
        binaries = [c for c in table.columns if c != label and table.types[c] == BINARY]
        if not binaries:
            raise PreprocessError("no binary column available as sensitive attribute")
        sensitive = binaries[0]
    if sensitive == label:
        raise PreprocessError("sensitive and label columns must be distinct")

    n_read = len(table)
    keep = [i for i in range(n_read) if all(table.data[c][i] is not None for c in table.columns)]
    dropped = n_read - len(keep)
    if dropped:
        log.info("dropped %d rows with missing values", dropped)
    if not keep:
        raise PreprocessError("no rows left after dropping missing values")

    def col(name):
        return [table.data[name][i] for i in keep]

    g = _binarize_column(col(sensitive)).astype(np.int64)
    y = _binarize_column(col(label)).astype(np.int64)
    features = tuple(c for c in table.columns if c not in (sensitive, label))
    blocks = []
    for c in features:
        values = col(c)
        if table.types[c] == NUMERIC:
            blocks.append(np.asarray(values, dtype=np.float64))
        else:
            blocks.append(_binarize_column(values))
    X = np.column_stack(blocks) if blocks else np.zeros((len(keep), 0))

    rng = np.random.default_rng(cfg.seed)
    rows = []
    truncated = 0
    for s in (0, 1):
        idx = np.flatnonzero(g == s)
        if idx.size == 0:
            raise PreprocessError(f"group {s} is empty")
        if idx.size > cfg.max_per_group:
            truncated += idx.size - cfg.max_per_group
            idx = np.sort(rng.choice(idx, size=cfg.max_per_group, replace=False))
        rows.append(idx)
    order = np.sort(np.concatenate(rows))
    X, y, g = X[order], y[order], g[order]

    if np.unique(y).size < 2:
        raise PreprocessError("label is constant")
    for s in (0, 1):
        if np.unique(y[g == s]).size < 2:
            warnings.warn(f"label is constant within group {s}; that group can be predicted perfectly",
                          stacklevel=2)
    kinds = {c: NUMERIC if table.types[c] == NUMERIC else BINARY for c in features}
    return PreprocessReport(GroupedDataset(X, y, g), features, sensitive, label,
                            n_read, dropped, truncated, kinds)


def preprocess(table: Table, cfg: PreprocessConfig = PreprocessConfig()) -> GroupedDataset:
    """Binarize categorical columns, split off group and label, truncate groups.

    Numeric columns are passed through unscaled.
    """
    return preprocess_with_report(table, cfg).dataset


# --------------------------------------------------------------------------
# remote fetch

CACHE_ENV = "SPLITBOUND_CACHE_DIR"
DESCRIPTION_URL = "https://www.openml.org/api/v1/json/data/{id}"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "splitbound"


def _get(url: str, timeout: float) -> bytes:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return resp.read()
    except urllib.error.HTTPError as exc:
        raise FetchError(f"HTTP {exc.code} for {url}", status=exc.code) from None
    except urllib.error.URLError as exc:
        raise FetchError(f"cannot reach {url}: {exc.reason}") from None


def fetch_remote(dataset_id: int, cache_dir=None, url_template: str | None = None,
                 timeout: float = 60.0) -> Path:
    """Download a dataset file into the cache and return its path.

    With ``url_template`` (containing ``{id}``) the file is fetched directly;
    otherwise the public dataset description is queried for its file URL.
    Cached files are returned without touching the network.
    """
    if isinstance(dataset_id, bool) or int(dataset_id) != dataset_id or dataset_id < 1:
        raise ValueError("dataset id must be a positive integer")
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    target = cache / f"{int(dataset_id)}.arff"
    if target.is_file() and target.stat().st_size > 0:
        return target
    if url_template is None:
        meta = json.loads(_get(DESCRIPTION_URL.format(id=dataset_id), timeout))
        url = meta["data_set_description"]["url"]
    else:
        url = url_template.format(id=dataset_id)
    body = _get(url, timeout)
    if not body:
        raise FetchError("empty download")
    cache.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=cache, prefix=f".{dataset_id}.", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(body)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return target


@dataclass(frozen=True)
class ManifestEntry:
    id: int
    sensitive: str
    label: str
    discarded: bool


def dataset_manifest(include_discarded: bool = False) -> list[ManifestEntry]:
    """The static list of benchmark dataset ids with their sensitive and label columns."""
    text = resources.files("splitbound").joinpath("data/openml_manifest.json").read_text()
    entries = [ManifestEntry(**e) for e in json.loads(text)]
    return entries if include_discarded else [e for e in entries if not e.discarded]


def bundled_fixtures() -> dict[str, Path]:
    """Name to path of the small datasets shipped with the package."""
    root = resources.files("splitbound").joinpath("data")
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir()
            if p.name.endswith((".csv", ".arff"))}


__all__ = [
    "BINARY", "CATEGORICAL", "NUMERIC",
    "FetchError", "ManifestEntry", "PreprocessConfig", "PreprocessError", "PreprocessReport",
    "Table", "TableParseError", "bundled_fixtures", "dataset_manifest", "default_cache_dir",
    "fetch_remote", "load_table", "most_frequent_value", "preprocess", "preprocess_with_report",
]
