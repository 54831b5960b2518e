"""CSV ingestion and output, ego-network rosters, and run configuration."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .errors import ConfigurationError, SchemaError
from .likelihood import ParameterVector
from .model import INTERCEPT, Dataset, ModelSpec, build_design_matrices, raw_columns
from .network import EgoNetwork
from .simulate import SimulationConfig, generator_from_dict

OUTPUT_FORMATS = ("text", "json")


def _read_rows(path) -> tuple[list[str], list[tuple[int, dict]]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if not header:
            raise SchemaError(f"{path}: missing header row")
        reader.fieldnames = header
        rows = []
        for row in reader:
            if None in row:
                raise SchemaError(f"{path}: line {reader.line_num} has more cells than the header")
            rows.append((reader.line_num, row))
    return header, rows


def _parse_cell(value, column, line, path):
    if value is None or value.strip() == "":
        return None
    try:
        out = float(value)
    except ValueError:
        raise SchemaError(f"{path}: line {line}: column {column!r} is not numeric: {value!r}") \
            from None
    if math.isnan(out):
        return None
    return out


def load_csv(path, spec: ModelSpec, departure_origin: float | None = None) -> Dataset:
    """Read an observation CSV into a :class:`Dataset`.

    Columns are matched by header name.  Required: ``id``; ``departure_hours``
    or ``departure_raw`` (then ``departure_origin`` is subtracted);
    ``travel_category`` or ``travel_hours``; every raw covariate the model
    needs.  Empty cells are missing, and such rows are dropped with their
    line numbers kept in ``Dataset.dropped_rows``.

    Raises
    ------
    SchemaError
        Missing column, or a cell that does not parse as a number.
    """
    header, rows = _read_rows(path)
    cols = set(header)

    def require(*names):
        for name in names:
            if name in cols:
                return name
        raise SchemaError(f"{path}: missing required column {' or '.join(map(repr, names))}")

    require("id")
    dep = require("departure_hours", "departure_raw")
    if dep == "departure_raw" and departure_origin is None:
        raise SchemaError(f"{path}: 'departure_raw' requires a declared departure origin")
    travel = require("travel_category", "travel_hours")
    try:
        needed = raw_columns(spec, cols)
    except ConfigurationError as exc:
        raise SchemaError(f"{path}: {exc}") from None

    parsed, labels = [], []
    for line, row in rows:
        rec = {"id": row["id"].strip()}
        d = _parse_cell(row[dep], dep, line, path)
        if d is not None and dep == "departure_raw":
            d -= departure_origin
        rec["departure_hours"] = d
        rec[travel] = _parse_cell(row[travel], travel, line, path)
        for name in needed:
            rec[name] = _parse_cell(row[name], name, line, path)
        parsed.append(rec)
        labels.append(line)
    return build_design_matrices(spec, parsed, row_labels=labels)


def dataset_to_csv(data: Dataset, path_or_file, travel_hours: Sequence[float] | None = None):
    """Write ``data`` in the schema :func:`load_csv` reads.

    Floats are written with ``repr`` so a reload is exact.
    """
    names = list(data.covariates)
    header = ["id", "departure_hours", "travel_category"]
    if travel_hours is not None:
        header.append("travel_hours")
    header += names

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        cols = [data.covariates[k] for k in names]
        for i in range(data.n_obs):
            row = [data.ids[i], repr(float(data.departure_hours[i])),
                   int(data.travel_category[i])]
            if travel_hours is not None:
                row.append(repr(float(travel_hours[i])))
            row += [repr(float(c[i])) for c in cols]
            w.writerow(row)

    if hasattr(path_or_file, "write"):
        write(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            write(fh)


def load_rosters(path) -> dict[str, EgoNetwork]:
    """Read long-format rosters: ``ego_id, alter_index, attribute, value``.

    A row with an empty ``alter_index`` declares an ego with no alters.
    Egos keep file order; alters are ordered by first appearance.
    """
    header, rows = _read_rows(path)
    for col in ("ego_id", "alter_index", "attribute", "value"):
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r}")
    egos: dict[str, dict[str, dict]] = {}
    for line, row in rows:
        ego = row["ego_id"].strip()
        if not ego:
            raise SchemaError(f"{path}: line {line}: empty ego_id")
        alters = egos.setdefault(ego, {})
        idx = row["alter_index"].strip()
        if not idx:
            continue
        attr = row["attribute"].strip()
        if not attr:
            raise SchemaError(f"{path}: line {line}: empty attribute name")
        value = row["value"].strip()
        alters.setdefault(idx, {})[attr] = value if value else None
    return {ego: EgoNetwork(ego, list(alters.values())) for ego, alters in egos.items()}


def load_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return raw


def theta_from_dict(raw: Mapping, spec: ModelSpec) -> ParameterVector:
    """``{gamma: {col: value}, beta: {col: value}, sigma, mu1, rho}``.

    Coefficients missing from the maps default to 0.
    """
    try:
        gamma_raw = dict(raw.get("gamma") or {})
        beta_raw = dict(raw.get("beta") or {})
        for block, cols, values in (("gamma", spec.duration_columns, gamma_raw),
                                    ("beta", spec.ordinal_columns, beta_raw)):
            extra = set(values) - set(cols)
            if extra:
                raise ConfigurationError(f"{block} names unknown columns {sorted(extra)}")
        return ParameterVector(
            gamma=[float(gamma_raw.get(c, 0.0)) for c in spec.duration_columns],
            beta=[float(beta_raw.get(c, 0.0)) for c in spec.ordinal_columns],
            sigma=float(raw["sigma"]), mu1=float(raw["mu1"]), rho=float(raw["rho"]))
    except KeyError as exc:
        raise ConfigurationError(f"theta is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed theta: {exc}") from None


def theta_to_dict(theta: ParameterVector, duration_columns, ordinal_columns) -> dict:
    return {"gamma": dict(zip(duration_columns, theta.gamma.tolist())),
            "beta": dict(zip(ordinal_columns, theta.beta.tolist())),
            "sigma": theta.sigma, "mu1": theta.mu1, "rho": theta.rho}


@dataclass
class RunConfig:
    """Options for one CLI run, read from YAML and overridden by flags."""

    data_path: str | None = None
    spec: ModelSpec | None = None
    output_path: str | None = None
    output_format: str = "text"
    seed: int | None = None
    replications: int | None = None
    confidence_levels: tuple[float, ...] = (0.95, 0.99, 0.9999)
    departure_origin: float | None = None
    simulation: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigurationError(f"output format must be one of {OUTPUT_FORMATS}, "
                                     f"got {self.output_format!r}")
        for label, p in (("data", self.data_path), ("output", self.output_path)):
            if p is not None and not str(p).strip():
                raise ConfigurationError(f"{label} path is empty")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "RunConfig":
        known = {"data", "model", "output", "format", "seed", "replications",
                 "confidence_levels", "departure_origin", "simulation"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(
                data_path=raw.get("data"),
                spec=ModelSpec.from_dict(raw["model"]) if raw.get("model") else None,
                output_path=raw.get("output"),
                output_format=raw.get("format", "text"),
                seed=None if raw.get("seed") is None else int(raw["seed"]),
                replications=None if raw.get("replications") is None
                else int(raw["replications"]),
                confidence_levels=tuple(float(c) for c in
                                        raw.get("confidence_levels", (0.95, 0.99, 0.9999))),
                departure_origin=None if raw.get("departure_origin") is None
                else float(raw["departure_origin"]),
                simulation=dict(raw.get("simulation") or {}),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed configuration: {exc}") from None


def simulation_config(run: RunConfig, n_obs: int | None = None,
                      seed: int | None = None) -> SimulationConfig:
    """Build a :class:`SimulationConfig` from the ``simulation`` block.

    ``simulation`` holds ``theta``, ``generators`` (column -> generator),
    ``n_obs``, optional ``seed`` and ``emit_travel_hours``.
    """
    if run.spec is None:
        raise ConfigurationError("configuration has no 'model' section")
    sim = run.simulation
    for key in ("theta", "generators"):
        if key not in sim:
            raise ConfigurationError(f"simulation section is missing {key!r}")
    theta = theta_from_dict(sim["theta"], run.spec)
    gens = {k: generator_from_dict(v) for k, v in dict(sim["generators"]).items()}
    if INTERCEPT in gens:
        raise ConfigurationError(f"{INTERCEPT!r} cannot have a generator")
    n = n_obs if n_obs is not None else sim.get("n_obs")
    if n is None:
        raise ConfigurationError("number of observations not given (simulation.n_obs or --n)")
    s = seed if seed is not None else (run.seed if run.seed is not None else sim.get("seed", 0))
    return SimulationConfig(run.spec, theta, int(n), gens, int(s),
                            bool(sim.get("emit_travel_hours", False)))


def undefined_to_none(values) -> list:
    """NaN and infinities become ``None`` for JSON."""
    return [None if v is None or not math.isfinite(v) else float(v) for v in np.ravel(values)]
