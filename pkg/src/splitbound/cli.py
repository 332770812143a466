"""Command-line frontend: ``analyze``, ``synth`` and ``report``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import synthetic
from .bounds import (
    CONSTANT,
    DROP,
    empirical_benefit_of_splitting,
    finite_sample_bounds_cor1,
    sample_limited_splitting,
    dataset_evaluator,
)
from .core import GroupedDataset, HypothesisClass, binarize
from .divergence import TvWitnessConfig, is_discrete_binary, tv_exact_discrete, tv_variational
from .ingest import (
    BINARY,
    FetchError,
    PreprocessConfig,
    PreprocessError,
    TableParseError,
    load_table,
    preprocess_with_report,
)
from .learn import MinimaxConfig, TrainConfig, train_group_blind, train_split

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class AnalysisReportRow:
    dataset: str
    n0: int
    n1: int
    epsilon_hat_split: float
    epsilon_hat_empirical: float
    upper_bound: float
    lower_bound: float
    tv_estimate: float
    tv_method: str
    disagreement_mean: float
    lambda_: float
    omega: float
    vacuous_flags: tuple[str, ...] = ()
    epsilon_hat_split_prob: float | None = None
    delta: float = 0.05
    vc: int = 0
    practical_mode: str = "off"
    seed: int = 0

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lambda_")
        out["vacuous_flags"] = list(self.vacuous_flags)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "AnalysisReportRow":
        obj = dict(obj)
        obj["lambda_"] = obj.pop("lambda")
        obj["vacuous_flags"] = tuple(obj.get("vacuous_flags", ()))
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ValueError(f"unknown fields {sorted(unknown)}")
        return cls(**obj)


REPORT_FIELDS = [f.name if f.name != "lambda_" else "lambda" for f in dataclasses.fields(AnalysisReportRow)]


@dataclass(frozen=True)
class AnalyzeOptions:
    delta: float = 0.05
    vc: int | None = None
    practical_mode: str = "off"  # off | drop | constant
    holdout: float = 0.3
    seed: int = 0
    tv: str = "auto"  # auto | exact | variational
    standardize: bool = True
    witness: TvWitnessConfig = field(default_factory=TvWitnessConfig)
    minimax: MinimaxConfig = field(default_factory=MinimaxConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if not 0.0 < self.holdout < 1.0:
            raise ValueError("holdout must lie in (0, 1)")
        if self.practical_mode not in ("off", DROP, CONSTANT):
            raise ValueError(f"unknown practical mode {self.practical_mode!r}")
        if self.tv not in ("auto", "exact", "variational"):
            raise ValueError(f"unknown tv method {self.tv!r}")


def holdout_split(data: GroupedDataset, fraction: float, seed: int) -> tuple[GroupedDataset, GroupedDataset]:
    """Per-group random split; at least one sample per group on each side."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for s in data.groups:
        idx = rng.permutation(np.flatnonzero(data.g == s))
        if idx.size < 2:
            raise PreprocessError(f"group {s} has fewer than two samples")
        k = min(max(1, int(round(fraction * idx.size))), idx.size - 1)
        test.append(idx[:k])
        train.append(idx[k:])
    return (data.subset(np.sort(np.concatenate(train))), data.subset(np.sort(np.concatenate(test))))


def standardize(train: GroupedDataset, test: GroupedDataset, columns: Sequence[int]):
    """Scale the given columns to zero mean and unit variance using training statistics."""
    if not columns:
        return train, test
    cols = list(columns)
    mu = train.X[:, cols].mean(axis=0)
    sd = train.X[:, cols].std(axis=0)
    sd[sd == 0] = 1.0

    def apply(d: GroupedDataset) -> GroupedDataset:
        X = d.X.copy()
        X[:, cols] = (X[:, cols] - mu) / sd
        return GroupedDataset(X, d.y, d.g)

    return apply(train), apply(test)


def analyze_dataset(name: str, data: GroupedDataset, opts: AnalyzeOptions = AnalyzeOptions(),
                    numeric_columns: Sequence[int] = ()) -> AnalysisReportRow:
    """Train split and group-blind linear classifiers and bound their gap."""
    train, test = holdout_split(data, opts.holdout, opts.seed)
    if opts.standardize:
        train, test = standardize(train, test, numeric_columns)
    cls = HypothesisClass.linear(data.dimension)
    vc = opts.vc if opts.vc is not None else cls.vc_dimension

    h_split = {s: train_split(train, s, cls, opts.train) for s in (0, 1)}
    h_blind, _ = train_group_blind(train, cls, opts.minimax, opts.train)
    hard_split = {s: binarize(h) for s, h in h_split.items()}
    hard_blind = binarize(h_blind)

    X0, X1 = train.group(0)[0], train.group(1)[0]
    method = opts.tv
    if method == "auto":
        method = "exact" if is_discrete_binary(train.X) else "variational"
    if method == "exact":
        if not is_discrete_binary(train.X):
            raise PreprocessError("exact TV requires all-binary features")
        tv = tv_exact_discrete(X0, X1)
    else:
        tv = tv_variational(X0, X1, dataclasses.replace(opts.witness, seed=opts.seed))

    practical = opts.practical_mode != "off"
    analysis = finite_sample_bounds_cor1(
        hard_split[0], hard_split[1], train, tv, delta=opts.delta, vc=vc,
        practical_mode=practical, practical_variant=opts.practical_mode if practical else DROP)
    held = dataset_evaluator(test)
    comps = analysis.components
    return AnalysisReportRow(
        dataset=name,
        n0=train.counts[0],
        n1=train.counts[1],
        epsilon_hat_split=sample_limited_splitting(hard_blind, hard_split, held),
        epsilon_hat_empirical=empirical_benefit_of_splitting(hard_blind, hard_split, train),
        upper_bound=analysis.upper_bound,
        lower_bound=analysis.lower_bound,
        tv_estimate=comps.tv_estimate.value,
        tv_method=comps.tv_estimate.method,
        disagreement_mean=comps.disagreement_mean,
        lambda_=comps.lambda_,
        omega=comps.omega,
        vacuous_flags=tuple(sorted(analysis.vacuous_flags)),
        epsilon_hat_split_prob=sample_limited_splitting(h_blind, h_split, held),
        delta=opts.delta,
        vc=vc,
        practical_mode=opts.practical_mode,
        seed=opts.seed,
    )


def analyze_file(path, fmt: str | None, pcfg: PreprocessConfig,
                 opts: AnalyzeOptions) -> AnalysisReportRow:
    table = load_table(path, fmt)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        rep = preprocess_with_report(table, pcfg)
    numeric = [j for j, c in enumerate(rep.feature_names) if rep.feature_kinds[c] != BINARY]
    return analyze_dataset(Path(path).stem, rep.dataset, opts, numeric)


# --------------------------------------------------------------------------
# report


def _report_key(row: AnalysisReportRow):
    return (min(row.n0, row.n1), row.dataset)


def read_reports(directory) -> list[AnalysisReportRow]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    rows = []
    for path in sorted(directory.glob("*.json")):
        try:
            rows.append(AnalysisReportRow.from_json(json.loads(path.read_text())))
        except (ValueError, KeyError, TypeError) as exc:
            warnings.warn(f"skipping {path.name}: {exc}", stacklevel=2)
    if not rows:
        raise FileNotFoundError(f"no analysis reports in {directory}")
    return sorted(rows, key=_report_key)


def write_report_csv(rows: Sequence[AnalysisReportRow], out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for row in rows:
        obj = row.to_json()
        obj["vacuous_flags"] = ";".join(obj["vacuous_flags"])
        obj = {k: "" if v is None else v for k, v in obj.items()}
        # str(float) is the shortest round-tripping repr
        writer.writerow([obj[k] for k in REPORT_FIELDS])


# --------------------------------------------------------------------------
# synth

SYNTH_REGIMES = ("example1",) + synthetic.REGIMES


def synthesize(regime: str, mu: float, n: int, seed: int) -> tuple[GroupedDataset, dict]:
    if regime not in SYNTH_REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if mu < 0:
        warnings.warn(f"negative mu {mu} replaced by {-mu}", stacklevel=2)
        mu = -mu
    params = {"mu": mu, "n_per_group": n}
    if regime == "example1":
        data = synthetic.gen_gaussian_shift(synthetic.GaussianShiftInstance(mu, n, seed))
    else:
        data = synthetic.gen_taxonomy_regime(regime, params, seed)
    sidecar = {"regime": regime, "seed": seed, **params}
    if regime in ("example1", synthetic.BOTH_DIFFERENT):
        sidecar["analytic"] = dataclasses.asdict(synthetic.analytic_example1(mu))
    return data, sidecar


def write_dataset_csv(data: GroupedDataset, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["group"] + [f"x{j}" for j in range(data.dimension)] + ["label"])
    for x, y, g in zip(data.X, data.y, data.g):
        writer.writerow([int(g)] + [repr(float(v)) for v in x] + [int(y)])


# --------------------------------------------------------------------------
# argument parsing


class _UsageError(Exception):
    pass


def _selector(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitbound", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="bound the benefit of splitting on tabular datasets")
    a.add_argument("--input", nargs="+", required=True, help="CSV or ARFF files")
    a.add_argument("--format", choices=["csv", "arff"])
    a.add_argument("--sensitive-col", type=_selector)
    a.add_argument("--label-col", type=_selector)
    a.add_argument("--max-per-group", type=int, default=10_000)
    a.add_argument("--delta", type=float, default=0.05)
    a.add_argument("--vc", type=int, help="VC dimension (default: features + 1)")
    a.add_argument("--practical-mode", choices=["off", DROP, CONSTANT], default="off")
    a.add_argument("--holdout", type=float, default=0.3)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--tv", choices=["auto", "exact", "variational"], default="auto")
    a.add_argument("--no-standardize", action="store_true",
                   help="keep numeric features on their original scale")
    a.add_argument("--out", help="output file (single input) or directory")

    s = sub.add_parser("synth", help="generate a synthetic dataset with its analytic summary")
    s.add_argument("regime", choices=SYNTH_REGIMES)
    s.add_argument("--mu", type=float, default=2.0)
    s.add_argument("--n", type=int, default=1000, help="samples per group")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="CSV path; the summary goes next to it as .json")

    r = sub.add_parser("report", help="collect analysis JSON files into one CSV")
    r.add_argument("inputs", help="directory of analysis JSON files")
    r.add_argument("--sort", choices=["min_group", "name"], default="min_group")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", help="CSV path (default: stdout)")
    return p


def _analyze_one(job):
    path, fmt, pcfg, opts = job
    return analyze_file(path, fmt, pcfg, opts)


def _cmd_analyze(args) -> int:
    try:
        pcfg = PreprocessConfig(args.sensitive_col, args.label_col, args.max_per_group, seed=args.seed)
        opts = AnalyzeOptions(delta=args.delta, vc=args.vc, practical_mode=args.practical_mode,
                              holdout=args.holdout, seed=args.seed, tv=args.tv,
                              standardize=not args.no_standardize)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if args.jobs < 1:
        raise _UsageError("--jobs must be >= 1")
    for path in args.input:
        if not Path(path).is_file():
            raise FileNotFoundError(f"no such file: {path}")
    jobs = [(path, args.format, pcfg, opts) for path in args.input]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_analyze_one, jobs))
    else:
        rows = [_analyze_one(j) for j in jobs]

    if args.out is None:
        for row in rows:
            print(json.dumps(row.to_json()))
        return EXIT_OK
    out = Path(args.out)
    if len(rows) == 1 and out.suffix == ".json":
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(rows[0].to_json(), indent=1) + "\n")
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    for row in rows:
        (out / f"{row.dataset}.json").write_text(json.dumps(row.to_json(), indent=1) + "\n")
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.n < 1:
        raise _UsageError("--n must be >= 1")
    data, sidecar = synthesize(args.regime, args.mu, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        write_dataset_csv(data, fh)
    out.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_report(args) -> int:
    rows = read_reports(args.inputs)
    if args.sort == "name":
        rows = sorted(rows, key=lambda r: r.dataset)
    if args.out is None:
        write_report_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_report_csv(rows, fh)
    return EXIT_OK


_COMMANDS = {"analyze": _cmd_analyze, "synth": _cmd_synth, "report": _cmd_report}
_INPUT_ERRORS = (_UsageError, FileNotFoundError, TableParseError, PreprocessError, FetchError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except _INPUT_ERRORS as exc:
        print(f"{type(exc).__module__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level guard
        print(f"{type(exc).__module__}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
