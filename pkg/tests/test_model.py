import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointdc import (DerivedColumn, ModelSpec, build_design_matrices, categorize_travel_time,
                     make_interaction, make_threshold_indicator)
from jointdc.errors import ConfigurationError, DataError, DomainError


@pytest.mark.parametrize("hours,expected", [(1.0, 1), (3.0, 2), (5.0, 3), (0.5, 1), (1.0001, 2)])
def test_categorize_examples(hours, expected):
    assert categorize_travel_time(hours, [1, 3]) == expected


@pytest.mark.parametrize("hours", [0.0, -1.0, math.nan, math.inf])
def test_categorize_rejects_bad_hours(hours):
    with pytest.raises(DomainError):
        categorize_travel_time(hours, [1, 3])


def test_categorize_rejects_unordered_bounds():
    with pytest.raises(DomainError):
        categorize_travel_time(2.0, [3, 1])


@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3))
def test_categorize_monotone(h1, h2):
    lo, hi = sorted((h1, h2))
    assert categorize_travel_time(lo) <= categorize_travel_time(hi)


@given(st.lists(st.floats(1e-3, 20), min_size=1, max_size=50))
def test_categorize_histogram_round_trip(hours):
    rows = [{"departure_hours": 1.0, "travel_hours": h} for h in hours]
    data = build_design_matrices(ModelSpec((), ()), rows)
    expected = np.bincount([categorize_travel_time(h) for h in hours], minlength=4)[1:]
    assert data.category_counts().tolist() == expected.tolist()


@pytest.mark.parametrize("a,b,expected", [([1, 0, 1], [1, 1, 0], [1, 0, 0]),
                                          ([0, 0], [0, 0], [0, 0]),
                                          ([1, 1], [1, 1], [1, 1])])
def test_interaction_examples(a, b, expected):
    assert make_interaction(a, b).tolist() == expected


@given(st.lists(st.sampled_from([0, 1]), max_size=30).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.sampled_from([0, 1]), min_size=len(a),
                                              max_size=len(a)))))
def test_interaction_commutes(ab):
    a, b = ab
    assert make_interaction(a, b).tolist() == make_interaction(b, a).tolist()


def test_interaction_rejects_non_binary():
    with pytest.raises(DomainError):
        make_interaction([0, 2], [1, 1])


@pytest.mark.parametrize("values,cutoff,expected", [([14.9, 15.0, 20.0], 15, [0, 1, 1]),
                                                    ([0.89, 0.90], 0.9, [0, 1]),
                                                    ([], 15, [])])
def test_threshold_examples(values, cutoff, expected):
    assert make_threshold_indicator(values, cutoff).tolist() == expected


def test_threshold_rejects_nan():
    with pytest.raises(DomainError):
        make_threshold_indicator([1.0, math.nan], 0.5)


def test_design_shapes():
    spec = ModelSpec(duration_covariates=("u",), ordinal_covariates=("v",),
                     include_ordinal_intercept=False)
    rows = [{"departure_hours": 2.0, "travel_category": 1, "u": 1, "v": 0},
            {"departure_hours": 3.0, "travel_category": 3, "u": 0, "v": 1}]
    data = build_design_matrices(spec, rows)
    assert data.Y.shape == (2, 2) and data.X.shape == (2, 1)
    assert data.Y[:, 0].tolist() == [1.0, 1.0]


def test_design_listwise_deletion():
    spec = ModelSpec(duration_covariates=("u",), ordinal_covariates=("v",))
    rows = [{"departure_hours": 2.0, "travel_category": 1, "u": 1, "v": 0},
            {"departure_hours": 3.0, "travel_category": 2, "u": None, "v": 1},
            {"departure_hours": 4.0, "travel_category": 3, "u": 0, "v": ""}]
    data = build_design_matrices(spec, rows, row_labels=[2, 3, 4])
    assert data.n_obs == 1 and data.n_dropped == 2 and data.dropped_rows == (3, 4)
    assert not np.isnan(data.Y).any() and not np.isnan(data.X).any()


def test_design_unknown_column():
    spec = ModelSpec(("missing",), ())
    with pytest.raises(ConfigurationError, match="missing"):
        build_design_matrices(spec, [{"departure_hours": 1.0, "travel_category": 1}])


def test_design_zero_rows_is_data_error():
    spec = ModelSpec(("u",), ())
    with pytest.raises(DataError):
        build_design_matrices(spec, [{"departure_hours": 1.0, "travel_category": 1, "u": None}])


@pytest.mark.parametrize("bad", [{"departure_hours": 0.0}, {"departure_hours": -2.0},
                                 {"travel_category": 4}])
def test_design_rejects_invalid_values(bad):
    row = {"departure_hours": 1.0, "travel_category": 1}
    row.update(bad)
    with pytest.raises(DataError):
        build_design_matrices(ModelSpec((), ()), [row])


def test_derived_columns():
    spec = ModelSpec(duration_covariates=("ab",), ordinal_covariates=("old",),
                     derived=(DerivedColumn("ab", "interaction", ("a", "b")),
                              DerivedColumn("old", "threshold", ("age",), 15.0)))
    rows = [{"departure_hours": 1.0, "travel_category": 1, "a": 1, "b": 1, "age": 15.0},
            {"departure_hours": 1.0, "travel_category": 2, "a": 1, "b": 0, "age": 14.9}]
    data = build_design_matrices(spec, rows)
    assert data.covariates["ab"].tolist() == [1.0, 0.0]
    assert data.covariates["old"].tolist() == [1.0, 0.0]


def test_spec_dict_round_trip():
    spec = ModelSpec(duration_covariates=("ab", "x"), ordinal_covariates=("x",),
                     category_bounds=(0.5, 2.0),
                     derived=(DerivedColumn("ab", "interaction", ("a", "b")),))
    assert ModelSpec.from_dict(spec.to_dict()) == spec


def test_dataset_is_read_only(small_data):
    with pytest.raises(ValueError):
        small_data.Y[0, 0] = 5.0
