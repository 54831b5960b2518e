"""Model specification, observation records and design-matrix construction."""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field, fields
from functools import cached_property
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, DomainError

INTERCEPT = "Constant"


@dataclass(frozen=True)
class EstimationSettings:
    """Optimizer tolerances and multi-start controls."""

    gtol: float = 1e-6
    ftol: float = 1e-9
    ftol_window: int = 3
    max_iter: int = 5000
    n_starts: int = 5
    perturbation_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ConfigurationError("n_starts must be at least 1")
        if self.gtol <= 0 or self.ftol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.ftol_window < 1 or self.max_iter < 1:
            raise ConfigurationError("ftol_window and max_iter must be positive")


@dataclass(frozen=True)
class DerivedColumn:
    """A covariate computed from other columns before estimation.

    ``kind`` is ``"interaction"`` (product of binary ``sources``) or
    ``"threshold"`` (indicator that ``sources[0] >= cutoff``).
    """

    name: str
    kind: str
    sources: tuple[str, ...]
    cutoff: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.kind == "interaction":
            if len(self.sources) < 2:
                raise ConfigurationError(f"interaction {self.name!r} needs two or more sources")
        elif self.kind == "threshold":
            if len(self.sources) != 1 or self.cutoff is None:
                raise ConfigurationError(f"threshold {self.name!r} needs one source and a cutoff")
        else:
            raise ConfigurationError(f"unknown derived column kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "sources": list(self.sources)}
        if self.cutoff is not None:
            out["cutoff"] = self.cutoff
        return out


@dataclass(frozen=True)
class ModelSpec:
    """Covariates of both equations, the travel-time category scheme and
    estimation settings.

    The duration equation is ``ln d = gamma . y + alpha`` and the ordinal
    equation ``z = beta . x + eps``.  Intercept columns are named
    ``"Constant"`` and are prepended when the corresponding flag is set.
    """

    duration_covariates: tuple[str, ...]
    ordinal_covariates: tuple[str, ...]
    include_duration_intercept: bool = True
    include_ordinal_intercept: bool = True
    category_bounds: tuple[float, ...] = (1.0, 3.0)
    derived: tuple[DerivedColumn, ...] = ()
    estimation: EstimationSettings = field(default_factory=EstimationSettings)

    def __post_init__(self):
        object.__setattr__(self, "duration_covariates", tuple(self.duration_covariates))
        object.__setattr__(self, "ordinal_covariates", tuple(self.ordinal_covariates))
        object.__setattr__(self, "category_bounds", tuple(float(b) for b in self.category_bounds))
        object.__setattr__(self, "derived", tuple(self.derived))
        for label, names in (("duration", self.duration_covariates),
                             ("ordinal", self.ordinal_covariates)):
            if len(set(names)) != len(names):
                raise ConfigurationError(f"duplicate names in {label} covariates: {list(names)}")
            if INTERCEPT in names:
                raise ConfigurationError(f"{INTERCEPT!r} is reserved for the intercept column")
        _check_bounds(self.category_bounds, ConfigurationError)
        if self.n_categories != 3:
            raise ConfigurationError(
                "the joint model has a single free threshold; category_bounds must hold "
                f"exactly 2 cut points (got {len(self.category_bounds)})")
        names = [d.name for d in self.derived]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate derived column names: {names}")
        if not self.duration_columns or not self.ordinal_columns:
            raise ConfigurationError("each equation needs at least one column")

    @property
    def n_categories(self) -> int:
        return len(self.category_bounds) + 1

    @property
    def duration_columns(self) -> tuple[str, ...]:
        head = (INTERCEPT,) if self.include_duration_intercept else ()
        return head + self.duration_covariates

    @property
    def ordinal_columns(self) -> tuple[str, ...]:
        head = (INTERCEPT,) if self.include_ordinal_intercept else ()
        return head + self.ordinal_covariates

    def to_dict(self) -> dict:
        return {
            "duration_covariates": list(self.duration_covariates),
            "ordinal_covariates": list(self.ordinal_covariates),
            "include_duration_intercept": self.include_duration_intercept,
            "include_ordinal_intercept": self.include_ordinal_intercept,
            "category_bounds": list(self.category_bounds),
            "derived": [d.to_dict() for d in self.derived],
            "estimation": {f.name: getattr(self.estimation, f.name)
                           for f in fields(EstimationSettings)},
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ModelSpec":
        known = {"duration_covariates", "ordinal_covariates", "include_duration_intercept",
                 "include_ordinal_intercept", "category_bounds", "derived", "estimation"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown model keys: {sorted(unknown)}")
        try:
            est_raw = dict(raw.get("estimation") or {})
            est_fields = {f.name: f.type for f in fields(EstimationSettings)}
            bad = set(est_raw) - set(est_fields)
            if bad:
                raise ConfigurationError(f"unknown estimation keys: {sorted(bad)}")
            est = EstimationSettings(**{
                k: (int(v) if k in ("ftol_window", "max_iter", "n_starts", "seed") else float(v))
                for k, v in est_raw.items()})
            derived = tuple(
                DerivedColumn(name=d["name"], kind=d["kind"], sources=tuple(d["sources"]),
                              cutoff=None if d.get("cutoff") is None else float(d["cutoff"]))
                for d in raw.get("derived") or ())
            return cls(
                duration_covariates=tuple(raw.get("duration_covariates") or ()),
                ordinal_covariates=tuple(raw.get("ordinal_covariates") or ()),
                include_duration_intercept=bool(raw.get("include_duration_intercept", True)),
                include_ordinal_intercept=bool(raw.get("include_ordinal_intercept", True)),
                category_bounds=tuple(raw.get("category_bounds", (1.0, 3.0))),
                derived=derived,
                estimation=est,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed model specification: {exc}") from exc


@dataclass(frozen=True)
class Observation:
    """One respondent: departure time in hours, travel-time category and
    the raw covariate values used by either equation."""

    id: Any
    departure_hours: float
    travel_category: int
    covariates: Mapping[str, float]

    def __post_init__(self):
        if not (self.departure_hours > 0 and math.isfinite(self.departure_hours)):
            raise DomainError(f"observation {self.id!r}: departure_hours must be positive "
                              f"and finite, got {self.departure_hours}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Row-aligned observations and the two design matrices.

    Data are held column-wise: ``departure_hours`` and ``travel_category``
    arrays, a name -> column map of covariates, the duration design ``Y``
    (N x p) and the ordinal design ``X`` (N x q).  ``observations`` gives
    the same rows as :class:`Observation` records, built on first access.
    Arrays are read-only.
    """

    ids: tuple[str, ...]
    departure_hours: np.ndarray
    travel_category: np.ndarray
    covariates: Mapping[str, np.ndarray]
    Y: np.ndarray
    X: np.ndarray
    duration_columns: tuple[str, ...]
    ordinal_columns: tuple[str, ...]
    dropped_rows: tuple[int, ...] = ()

    def __post_init__(self):
        d = np.array(self.departure_hours, dtype=float, ndmin=1)
        cats = np.array(self.travel_category, ndmin=1)
        n = d.size
        if n == 0:
            raise DataError("dataset has no observations")
        ids = tuple(str(i) for i in self.ids)
        Y = np.array(self.Y, dtype=float, ndmin=2)
        X = np.array(self.X, dtype=float, ndmin=2)
        if len(ids) != n or cats.shape != (n,):
            raise DataError("ids, departure_hours and travel_category lengths differ")
        if Y.shape != (n, len(self.duration_columns)) or X.shape != (n, len(self.ordinal_columns)):
            raise DataError(f"design matrices {Y.shape}, {X.shape} do not match {n} observations "
                            f"and columns {tuple(self.duration_columns)}, "
                            f"{tuple(self.ordinal_columns)}")
        if not (np.isfinite(Y).all() and np.isfinite(X).all()):
            raise DataError("design matrices contain non-finite entries")
        bad = np.flatnonzero(~(d > 0) | ~np.isfinite(d))
        if bad.size:
            raise DataError(f"departure_hours must be positive and finite (row index {bad[0]})")
        if not np.array_equal(cats, np.round(cats)):
            raise DataError("travel_category must be integer-valued")
        cats = cats.astype(int)
        covs = {}
        for name, col in self.covariates.items():
            col = np.array(col, dtype=float)
            if col.shape != (n,):
                raise DataError(f"covariate {name!r} has {col.size} rows, expected {n}")
            col.setflags(write=False)
            covs[name] = col
        log_d = np.log(d)
        for arr in (Y, X, d, cats, log_d):
            arr.setflags(write=False)
        for name, value in (("ids", ids), ("departure_hours", d), ("travel_category", cats),
                            ("covariates", MappingProxyType(covs)), ("Y", Y), ("X", X),
                            ("duration_columns", tuple(self.duration_columns)),
                            ("ordinal_columns", tuple(self.ordinal_columns)),
                            ("dropped_rows", tuple(self.dropped_rows)), ("log_d", log_d)):
            object.__setattr__(self, name, value)

    @property
    def n_obs(self) -> int:
        return self.departure_hours.size

    @property
    def n_dropped(self) -> int:
        return len(self.dropped_rows)

    @property
    def categories(self) -> np.ndarray:
        return self.travel_category

    @cached_property
    def observations(self) -> tuple[Observation, ...]:
        names = list(self.covariates)
        cols = [self.covariates[k] for k in names]
        return tuple(
            Observation(id=self.ids[i], departure_hours=float(self.departure_hours[i]),
                        travel_category=int(self.travel_category[i]),
                        covariates=MappingProxyType({k: float(c[i]) for k, c in zip(names, cols)}))
            for i in range(self.n_obs))

    def category_counts(self, n_categories: int = 3) -> np.ndarray:
        return np.bincount(self.travel_category - 1, minlength=n_categories)

    def take(self, indices: Sequence[int]) -> "Dataset":
        """Row subset or reordering; repeated indices duplicate rows."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            ids=tuple(self.ids[i] for i in idx),
            departure_hours=self.departure_hours[idx],
            travel_category=self.travel_category[idx],
            covariates={k: v[idx] for k, v in self.covariates.items()},
            Y=self.Y[idx], X=self.X[idx],
            duration_columns=self.duration_columns,
            ordinal_columns=self.ordinal_columns,
        )

    def equals(self, other: "Dataset") -> bool:
        """Field-for-field equality (dropped-row bookkeeping excluded)."""
        return (self.ids == other.ids
                and self.duration_columns == other.duration_columns
                and self.ordinal_columns == other.ordinal_columns
                and np.array_equal(self.departure_hours, other.departure_hours)
                and np.array_equal(self.travel_category, other.travel_category)
                and self.covariates.keys() == other.covariates.keys()
                and all(np.array_equal(v, other.covariates[k]) for k, v in self.covariates.items())
                and np.array_equal(self.Y, other.Y) and np.array_equal(self.X, other.X))


def _check_bounds(bounds, exc_type):
    if len(bounds) == 0:
        raise exc_type("at least one cut point is required")
    if any(not math.isfinite(b) or b <= 0 for b in bounds):
        raise exc_type(f"cut points must be positive and finite: {list(bounds)}")
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise exc_type(f"cut points must be strictly increasing: {list(bounds)}")


def categorize_travel_time(hours: float, bounds: Sequence[float] = (1.0, 3.0)) -> int:
    """Map a travel time in hours to its 1-based category.

    A value equal to a cut point falls in the lower category, so with the
    default bounds 1.0 -> 1, 3.0 -> 2 and 5.0 -> 3.
    """
    _check_bounds(bounds, DomainError)
    if not (hours > 0 and math.isfinite(hours)):
        raise DomainError(f"travel time must be positive and finite, got {hours}")
    return bisect_left(list(bounds), hours) + 1


def _as_column(values, label) -> np.ndarray:
    col = np.asarray(values, dtype=float)
    if col.ndim != 1:
        raise DomainError(f"{label} must be one-dimensional")
    return col


def make_interaction(a, b) -> np.ndarray:
    """Elementwise AND of two 0/1 columns."""
    a = _as_column(a, "first column")
    b = _as_column(b, "second column")
    if a.shape != b.shape:
        raise DomainError(f"column lengths differ: {a.size} vs {b.size}")
    for col in (a, b):
        if not np.isin(col, (0.0, 1.0)).all():
            raise DomainError("interaction inputs must contain only 0 and 1")
    return a * b


def make_threshold_indicator(values, cutoff: float) -> np.ndarray:
    """1 where ``value >= cutoff`` else 0."""
    col = _as_column(values, "values")
    if not np.isfinite(col).all() or not math.isfinite(cutoff):
        raise DomainError("threshold indicator requires finite values and cutoff")
    return (col >= cutoff).astype(float)


def _is_missing(value) -> bool:
    if value is None:
        return True
    if isinstance(value, str):
        return value.strip() == ""
    try:
        return math.isnan(value)
    except TypeError:
        return False


def _to_float(value, column, where) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise DataError(f"{where}: column {column!r} is not numeric: {value!r}") from None
    if not math.isfinite(out):
        raise DataError(f"{where}: column {column!r} is not finite: {value!r}")
    return out


def raw_columns(spec: ModelSpec, available: Iterable[str]) -> list[str]:
    """Raw input columns needed to build every covariate of ``spec``.

    A column present in the input is used as-is even when a derived
    column of the same name is declared.

    Raises
    ------
    ConfigurationError
        A name is neither available nor a declared derived column.
    """
    available = set(available)
    derived = {d.name: d for d in spec.derived}
    needed: list[str] = []

    def resolve(name, chain=()):
        if name in chain:
            raise ConfigurationError(f"derived column cycle through {name!r}")
        if name in available:
            if name not in needed:
                needed.append(name)
        elif name in derived:
            for src in derived[name].sources:
                resolve(src, chain + (name,))
        else:
            raise ConfigurationError(f"column {name!r} not found in data or derived columns")

    for name in dict.fromkeys(spec.duration_covariates + spec.ordinal_covariates):
        resolve(name)
    return needed


def derive_columns(spec: ModelSpec, columns: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Covariate columns of ``spec`` computed from raw ``columns``."""
    derived = {d.name: d for d in spec.derived}
    cache = {k: np.asarray(v, dtype=float) for k, v in columns.items()}

    def column(name):
        if name not in cache:
            if name not in derived:
                raise ConfigurationError(f"column {name!r} not found in data or derived columns")
            dc = derived[name]
            srcs = [column(src) for src in dc.sources]
            if dc.kind == "interaction":
                out = srcs[0]
                for src in srcs[1:]:
                    out = make_interaction(out, src)
            else:
                out = make_threshold_indicator(srcs[0], dc.cutoff)
            cache[name] = out
        return cache[name]

    return {name: column(name)
            for name in dict.fromkeys(spec.duration_covariates + spec.ordinal_covariates)}


def assemble_dataset(spec: ModelSpec, ids, departure_hours, travel_category,
                     covariates: Mapping[str, np.ndarray], dropped_rows=()) -> Dataset:
    """Dataset from column arrays; the intercept column is added here."""
    n = len(departure_hours)
    ones = np.ones(n)
    Y = np.column_stack([ones if c == INTERCEPT else covariates[c] for c in spec.duration_columns])
    X = np.column_stack([ones if c == INTERCEPT else covariates[c] for c in spec.ordinal_columns])
    return Dataset(ids=ids, departure_hours=departure_hours, travel_category=travel_category,
                   covariates=covariates, Y=Y, X=X,
                   duration_columns=spec.duration_columns, ordinal_columns=spec.ordinal_columns,
                   dropped_rows=dropped_rows)


def build_design_matrices(spec: ModelSpec, rows: Iterable[Mapping[str, Any]],
                          row_labels: Sequence[int] | None = None) -> Dataset:
    """Build a :class:`Dataset` from raw row mappings.

    Each row needs ``departure_hours`` and either ``travel_category`` or
    ``travel_hours`` (categorized with ``spec.category_bounds``); ``id`` is
    optional.  Rows with a missing required value are dropped listwise and
    their labels (``row_labels`` or 0-based positions) recorded in
    ``Dataset.dropped_rows``.

    Raises
    ------
    ConfigurationError
        A covariate is neither a row key nor a declared derived column.
    DataError
        Invalid values, or no rows survive.
    """
    rows = list(rows)
    labels = list(row_labels) if row_labels is not None else list(range(len(rows)))
    available = set().union(*(r.keys() for r in rows)) if rows else set()
    needed_raw = raw_columns(spec, available)
    if "departure_hours" not in available:
        raise ConfigurationError("column 'departure_hours' not found in data")
    if "travel_category" in available:
        travel_key = "travel_category"
    elif "travel_hours" in available:
        travel_key = "travel_hours"
    else:
        raise ConfigurationError("data needs a 'travel_category' or 'travel_hours' column")

    ids, hours, cats, dropped = [], [], [], []
    raw = {k: [] for k in needed_raw}
    for row, label in zip(rows, labels):
        where = f"row {label}"
        if any(_is_missing(row.get(k)) for k in ["departure_hours", travel_key] + needed_raw):
            dropped.append(label)
            continue
        d = _to_float(row["departure_hours"], "departure_hours", where)
        if d <= 0:
            raise DataError(f"{where}: departure_hours must be positive, got {d}")
        t = _to_float(row[travel_key], travel_key, where)
        if travel_key == "travel_hours":
            if t <= 0:
                raise DataError(f"{where}: travel_hours must be positive, got {t}")
            cat = categorize_travel_time(t, spec.category_bounds)
        else:
            if t != int(t) or not 1 <= t <= spec.n_categories:
                raise DataError(f"{where}: travel_category must be an integer in "
                                f"1..{spec.n_categories}, got {row[travel_key]!r}")
            cat = int(t)
        for k in needed_raw:
            raw[k].append(_to_float(row[k], k, where))
        ids.append(row.get("id", label))
        hours.append(d)
        cats.append(cat)

    if not hours:
        raise DataError(f"no complete rows remain ({len(dropped)} dropped)")
    covariates = derive_columns(spec, {k: np.array(v) for k, v in raw.items()})
    return assemble_dataset(spec, ids, np.array(hours), np.array(cats), covariates,
                            tuple(dropped))
