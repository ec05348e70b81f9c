import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pogit.data import Dataset, dataset_to_columns, format_float, read_csv, write_csv
from pogit.design import Design, Intercept, Linear, Spline
from pogit.exceptions import SchemaError
from pogit.splines import SplineSpec

finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(finite)
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_csv_round_trip_bitwise(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    cols = {"a": np.array([r[0] for r in rows]), "b": np.array([r[1] for r in rows])}
    write_csv(path, cols, ["seed: 1"])
    back = read_csv(path)
    for k in cols:
        assert back[k].tobytes() == cols[k].astype(float).tobytes()


def test_dataset_validation():
    with pytest.raises(SchemaError, match="row 0"):
        Dataset({"x": [1.0]}, [-1])
    with pytest.raises(SchemaError):
        Dataset({"x": [1.0]}, [0.5])
    with pytest.raises(SchemaError):
        Dataset({"x": [1.0, 2.0]}, [1])
    with pytest.raises(SchemaError, match="row 1"):
        Dataset({"x": [1.0, 2.0]}, [1, 3], y_true=[1, 2])
    with pytest.raises(SchemaError):
        Dataset({"x": [1.0]}, [1], exposure=[0.0])


def test_dataset_immutable_and_columns():
    d = Dataset({"x": [1.0, 2.0]}, [1, 2], y_true=[1, 3])
    with pytest.raises(ValueError):
        d.y[0] = 5
    cols = dataset_to_columns(d)
    assert set(cols) == {"x", "y", "y_true"}
    back = Dataset.from_columns(cols, "y", ["x"], true_count="y_true")
    assert back.y.tolist() == [1, 2] and back.y_true.tolist() == [1, 3]
    assert d.subset([1]).y.tolist() == [2]


def test_from_columns_missing():
    with pytest.raises(SchemaError, match="'count'"):
        Dataset.from_columns({"x": [1.0]}, "count")


def test_design_build_and_names():
    sp = SplineSpec(2, (0.5,))
    d = Design([Intercept(), Linear("x", name="dose"), Spline("u", sp, drop_first=True)])
    assert d.column_names == ["intercept", "dose", "u[1]", "u[2]", "u[3]"]
    assert d.term_names == ["intercept", "dose", "u"]
    X = d.build({"x": [1.0, 2.0], "u": [0.0, 1.0]})
    assert X.shape == (2, 5)
    np.testing.assert_array_equal(X[:, 0], 1.0)
    np.testing.assert_array_equal(X[:, 1], [1.0, 2.0])
    assert d.covariates == ("x", "u")


def test_design_errors():
    with pytest.raises(ValueError):
        Design([Linear("x"), Linear("x")])
    with pytest.raises(SchemaError):
        Design([Linear("x")]).build({"y": [1.0]}, 1)
    with pytest.raises(KeyError):
        Design([Linear("x")]).term_slice("nope")
