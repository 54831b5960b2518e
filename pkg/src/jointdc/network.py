"""Composition measures for ego-centric personal networks."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DomainError


@dataclass
class EgoNetwork:
    """A respondent (ego) and the attribute maps of their alters."""

    ego_id: Any
    alters: list[Mapping[str, Any]] = field(default_factory=list)

    def add_alter(self, attributes: Mapping[str, Any]) -> None:
        self.alters.append(dict(attributes))


def _present(network: EgoNetwork, attribute: str):
    values, missing = [], 0
    for alter in network.alters:
        v = alter.get(attribute)
        if v is None or (isinstance(v, str) and not v.strip()) or (
                isinstance(v, float) and math.isnan(v)):
            missing += 1
        else:
            values.append(v)
    return values, missing


def attribute_values(network: EgoNetwork, attribute: str) -> tuple[list, int]:
    """Values of ``attribute`` across alters, and the count of alters lacking it."""
    return _present(network, attribute)


def network_size(network: EgoNetwork) -> int:
    return len(network.alters)


def continuous_heterogeneity(network: EgoNetwork, attribute: str) -> float:
    """Population standard deviation of ``attribute`` over the alters that
    report it; NaN when none do."""
    values, _ = _present(network, attribute)
    if not values:
        return math.nan
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean((v - v.mean()) ** 2)))


def iqv_from_counts(counts: Sequence[int], n_categories: int | None = None) -> float:
    """Index of qualitative variation, ``C/(C-1) * (1 - sum p_j^2)``.

    ``n_categories`` defaults to ``max(2, number of counts)``.
    """
    counts = [int(c) for c in counts]
    total = sum(counts)
    if total == 0:
        return math.nan
    C = max(2, len(counts)) if n_categories is None else n_categories
    if C < 2:
        raise DomainError(f"IQV needs at least two categories, got {C}")
    if len([c for c in counts if c > 0]) > C:
        raise DomainError(f"{len(counts)} observed categories exceed the declared {C}")
    gini = 1.0 - sum((c / total) ** 2 for c in counts)
    return C / (C - 1) * gini


def iqv(network: EgoNetwork, attribute: str, n_categories: int | None = None) -> float:
    """IQV of a categorical alter attribute; NaN when no alter reports it.

    The category count is ``n_categories`` when given, otherwise the
    number of distinct observed labels but at least 2.
    """
    if n_categories is not None and n_categories < 2:
        raise DomainError(f"IQV needs at least two categories, got {n_categories}")
    values, _ = _present(network, attribute)
    counts = Counter(values)
    if n_categories is None:
        n_categories = max(2, len(counts))
    return iqv_from_counts(list(counts.values()), n_categories)
