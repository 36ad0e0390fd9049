"""Core data model: observational records with a binary treatment, a short-term
outcome, an optionally missing long-term outcome, and an observation flag.

Datasets are immutable after construction. Missing long-term outcomes are
stored as NaN and guarded by the observation indicator ``r``; they are never
folded into arithmetic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class UnitRecord:
    """One observational unit."""

    x: np.ndarray
    a: int
    s: float
    y: Optional[float]
    r: int


@dataclass(frozen=True)
class PotentialTruth:
    """Per-unit potential outcomes, available for synthetic data only."""

    s0: np.ndarray
    s1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray

    def __len__(self):
        return len(self.s0)


def _readonly(arr):
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ObservationalDataset:
    """Columnar storage of units, plus optional ground truth.

    ``y`` holds NaN exactly where ``r == 0``. ``dgp`` carries the generating
    table for fully enumerable synthetic data (used by oracle nuisances).
    """

    x: np.ndarray          # (n, p) float64
    a: np.ndarray          # (n,) int
    s: np.ndarray          # (n,) float64
    y: np.ndarray          # (n,) float64, NaN when unobserved
    r: np.ndarray          # (n,) int
    truth: Optional[PotentialTruth] = None
    dgp: object = None

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(np.atleast_2d(np.asarray(self.x, dtype=np.float64))))
        object.__setattr__(self, "a", _readonly(np.asarray(self.a, dtype=np.int64)))
        object.__setattr__(self, "s", _readonly(np.asarray(self.s, dtype=np.float64)))
        object.__setattr__(self, "y", _readonly(np.asarray(self.y, dtype=np.float64)))
        object.__setattr__(self, "r", _readonly(np.asarray(self.r, dtype=np.int64)))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def n_observed(self) -> int:
        return int(np.sum(self.r == 1))

    @property
    def n_missing(self) -> int:
        return int(np.sum(self.r == 0))

    def unit(self, i: int) -> UnitRecord:
        return UnitRecord(
            x=self.x[i],
            a=int(self.a[i]),
            s=float(self.s[i]),
            y=float(self.y[i]) if self.r[i] == 1 else None,
            r=int(self.r[i]),
        )

    @property
    def units(self) -> Sequence[UnitRecord]:
        return [self.unit(i) for i in range(self.n)]

    def replace(self, **kwargs) -> "ObservationalDataset":
        fields = dict(x=self.x, a=self.a, s=self.s, y=self.y, r=self.r,
                      truth=self.truth, dgp=self.dgp)
        fields.update(kwargs)
        return ObservationalDataset(**fields)


def from_units(units: Sequence[UnitRecord], truth: Optional[PotentialTruth] = None,
               dgp=None) -> ObservationalDataset:
    if not units:
        raise DataError("cannot build a dataset from zero units")
    dim = len(np.atleast_1d(units[0].x))
    x = np.zeros((len(units), dim))
    a = np.zeros(len(units), dtype=np.int64)
    s = np.zeros(len(units))
    y = np.full(len(units), np.nan)
    r = np.zeros(len(units), dtype=np.int64)
    for i, u in enumerate(units):
        xu = np.atleast_1d(np.asarray(u.x, dtype=np.float64))
        if len(xu) != dim:
            raise DataError(f"unit {i}: covariate dimension {len(xu)} != {dim}")
        x[i] = xu
        a[i] = u.a
        s[i] = u.s
        y[i] = np.nan if u.y is None else u.y
        r[i] = u.r
    return ObservationalDataset(x=x, a=a, s=s, y=y, r=r, truth=truth, dgp=dgp)


def validate(ds: ObservationalDataset) -> list[str]:
    """Check every dataset invariant; return one message per violation.

    An empty report means the dataset is well formed. Violations name the
    offending unit index and the broken rule.
    """
    report: list[str] = []
    arrays = {"a": ds.a, "s": ds.s, "r": ds.r}
    n = ds.n
    for name, arr in arrays.items():
        if len(arr) != n:
            report.append(f"column {name}: length {len(arr)} != {n}")
    if len(ds.y) != n:
        report.append(f"column y: length {len(ds.y)} != {n}")
    if report:
        return report

    for i in range(n):
        if ds.a[i] not in (0, 1):
            report.append(f"unit {i}: treatment a={ds.a[i]} not in {{0,1}}")
        if ds.r[i] not in (0, 1):
            report.append(f"unit {i}: observation flag r={ds.r[i]} not in {{0,1}}")
        if not np.all(np.isfinite(ds.x[i])):
            report.append(f"unit {i}: non-finite covariate")
        if not np.isfinite(ds.s[i]):
            report.append(f"unit {i}: non-finite short-term outcome")
        y_present = np.isfinite(ds.y[i])
        if ds.r[i] == 1 and not y_present:
            report.append(f"unit {i}: y absent while r=1")
        if ds.r[i] == 0 and y_present:
            report.append(f"unit {i}: y present while r=0")

    if ds.truth is not None:
        t = ds.truth
        if len(t) != n:
            report.append(f"truth: length {len(t)} != {n}")
        else:
            s_expect = np.where(ds.a == 1, t.s1, t.s0)
            for i in np.nonzero(ds.s != s_expect)[0]:
                report.append(f"unit {i}: s inconsistent with potential outcome s({ds.a[i]})")
            y_expect = np.where(ds.a == 1, t.y1, t.y0)
            obs = ds.r == 1
            for i in np.nonzero(obs & ~np.isclose(ds.y, y_expect, equal_nan=True))[0]:
                if np.isfinite(ds.y[i]):
                    report.append(f"unit {i}: y inconsistent with potential outcome y({ds.a[i]})")
    return report


@dataclass(frozen=True)
class CsvSchema:
    """Column-name mapping for CSV ingestion.

    Covariates are either an explicit column list or every column whose name
    starts with ``covariate_prefix``.
    """

    a: str = "a"
    s: str = "s"
    y: Optional[str] = "y"
    r: Optional[str] = "r"
    covariates: Optional[Sequence[str]] = None
    covariate_prefix: str = "x"


def _parse_float(raw: str, row: int, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"row {row}, column {col}: cannot parse {raw!r} as a number")


def _parse_binary(raw: str, row: int, col: str) -> int:
    v = _parse_float(raw, row, col)
    if v not in (0.0, 1.0):
        raise DataError(f"row {row}, column {col}: value {raw!r} is not 0/1")
    return int(v)


def load_csv(path, schema: CsvSchema = CsvSchema()) -> ObservationalDataset:
    """Read a dataset from CSV.

    Empty ``y`` cells become missing outcomes. When the schema has no ``r``
    column, ``r`` is inferred from ``y`` presence.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (header row required)")
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")

    cols = {name: idx for idx, name in enumerate(header)}
    if schema.covariates is not None:
        xcols = list(schema.covariates)
    else:
        xcols = [c for c in header if c.startswith(schema.covariate_prefix)
                 and c not in (schema.a, schema.s, schema.y, schema.r)]
    if not xcols:
        raise DataError(f"{path}: no covariate columns found")
    for c in xcols + [schema.a, schema.s]:
        if c not in cols:
            raise DataError(f"{path}: required column {c!r} missing from header")
    has_y = schema.y is not None and schema.y in cols
    has_r = schema.r is not None and schema.r in cols

    n = len(rows)
    x = np.zeros((n, len(xcols)))
    a = np.zeros(n, dtype=np.int64)
    s = np.zeros(n)
    y = np.full(n, np.nan)
    r = np.zeros(n, dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {i}: expected {len(header)} cells, found {len(row)}")
        for j, c in enumerate(xcols):
            x[i, j] = _parse_float(row[cols[c]], i, c)
        a[i] = _parse_binary(row[cols[schema.a]], i, schema.a)
        s[i] = _parse_float(row[cols[schema.s]], i, schema.s)
        y_raw = row[cols[schema.y]].strip() if has_y else ""
        if y_raw:
            y[i] = _parse_float(y_raw, i, schema.y)
        if has_r:
            r[i] = _parse_binary(row[cols[schema.r]], i, schema.r)
            if r[i] == 1 and not y_raw:
                raise DataError(f"row {i}: r=1 but column {schema.y!r} is empty")
            if r[i] == 0 and y_raw:
                raise DataError(f"row {i}: r=0 but column {schema.y!r} has a value")
        else:
            r[i] = 1 if y_raw else 0
    return ObservationalDataset(x=x, a=a, s=s, y=y, r=r)


def save_csv(ds: ObservationalDataset, path, truth_path=None) -> None:
    """Write the dataset (and optionally its truth sidecar) as CSV.

    Floats are written with ``repr`` so a save/load round trip is bit-exact.
    """
    header = [f"x{j}" for j in range(ds.dim)] + ["a", "s", "y", "r"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.x[i]]
            row.append(str(int(ds.a[i])))
            row.append(repr(float(ds.s[i])))
            row.append(repr(float(ds.y[i])) if ds.r[i] == 1 else "")
            row.append(str(int(ds.r[i])))
            writer.writerow(row)
    if truth_path is not None:
        if ds.truth is None:
            raise DataError("dataset carries no potential-outcome truth to save")
        t = ds.truth
        with open(truth_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s0", "s1", "y0", "y1"])
            for i in range(ds.n):
                writer.writerow([repr(float(t.s0[i])), repr(float(t.s1[i])),
                                 repr(float(t.y0[i])), repr(float(t.y1[i]))])


def split_folds(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Partition {0..n-1} into k disjoint folds with sizes differing by <= 1.

    Deterministic in (n, k, seed).
    """
    if not 2 <= k <= n:
        raise ValueError(f"fold count k={k} must satisfy 2 <= k <= n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]
