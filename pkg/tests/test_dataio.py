"""CSV dataset parsing, validation messages, and schema JSON."""
import numpy as np
import pytest

from madseq.dataio import (
    ColumnSpec,
    Dataset,
    DatasetSchema,
    parse_dataset,
    schema_from_json,
    schema_to_json,
    write_dataset,
)
from madseq.errors import ConfigurationError, DataError
from madseq.grids import Binary, Count

COUNT_SCHEMA = DatasetSchema((ColumnSpec("y", "count", "response", ymax=10),))
MIXED_SCHEMA = DatasetSchema(
    (
        ColumnSpec("x1", "binary", "covariate"),
        ColumnSpec("x2", "count", "covariate", ymax=4),
        ColumnSpec("y", "count", "response", ymax=10),
    )
)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_simple_counts(tmp_path):
    path = write(tmp_path, "y\n3\n5\n")
    data = parse_dataset(path, COUNT_SCHEMA)
    assert len(data) == 2
    assert data.points() == [(3,), (5,)]


def test_parse_error_names_row_and_column(tmp_path):
    path = write(tmp_path, "y\n11\n")
    with pytest.raises(DataError, match=r"value 11 out of range \[0, 10\] at row 1, column 'y'"):
        parse_dataset(path, COUNT_SCHEMA)


def test_binary_value_out_of_range(tmp_path):
    path = write(tmp_path, "x1,x2,y\n2,0,1\n")
    with pytest.raises(DataError, match="binary column 'x1' has value 2 at row 1"):
        parse_dataset(path, MIXED_SCHEMA)


def test_non_integer_and_missing_cells(tmp_path):
    with pytest.raises(DataError, match="non-integer value 'a' at row 2"):
        parse_dataset(write(tmp_path, "y\n1\na\n"), COUNT_SCHEMA)
    with pytest.raises(DataError, match="missing value at row 1, column 'x2'"):
        parse_dataset(write(tmp_path, "x1,x2,y\n0,,3\n", name="d2.csv"), MIXED_SCHEMA)


def test_unknown_column_and_header_mismatch(tmp_path):
    with pytest.raises(DataError, match="unknown column 'z'"):
        parse_dataset(write(tmp_path, "z\n1\n"), COUNT_SCHEMA)
    with pytest.raises(DataError, match="does not match schema columns"):
        parse_dataset(write(tmp_path, "x1,y,x2\n0,1,0\n", name="d2.csv"), MIXED_SCHEMA)


def test_empty_file_and_ragged_row(tmp_path):
    with pytest.raises(DataError, match="empty file"):
        parse_dataset(write(tmp_path, ""), COUNT_SCHEMA)
    with pytest.raises(DataError, match="row 1 has 2 fields, expected 3"):
        parse_dataset(write(tmp_path, "x1,x2,y\n0,1\n", name="d2.csv"), MIXED_SCHEMA)


def test_round_trip(tmp_path):
    rows = np.array([[0, 2, 7], [1, 4, 0], [0, 0, 10]], dtype=np.int64)
    data = Dataset(schema=MIXED_SCHEMA, rows=rows)
    path = str(tmp_path / "out.csv")
    write_dataset(data, path)
    back = parse_dataset(path, MIXED_SCHEMA)
    np.testing.assert_array_equal(back.rows, rows)


def test_schema_grid_and_axes():
    grid = MIXED_SCHEMA.to_grid()
    assert grid.coordinates == (Binary(), Count(4), Count(10))
    assert MIXED_SCHEMA.covariate_axes() == (0, 1)
    assert MIXED_SCHEMA.response_axes() == (2,)
    assert MIXED_SCHEMA.names == ("x1", "x2", "y")


def test_schema_json_round_trip():
    obj = schema_to_json(MIXED_SCHEMA)
    assert obj[0] == {"name": "x1", "kind": "binary", "role": "covariate"}
    assert obj[2] == {"name": "y", "kind": "count", "role": "response", "ymax": 10}
    assert schema_from_json(obj) == MIXED_SCHEMA
    with pytest.raises(ConfigurationError, match="missing key"):
        schema_from_json([{"name": "y", "kind": "count"}])


def test_column_spec_validation():
    with pytest.raises(ConfigurationError):
        ColumnSpec("", "count", "response", ymax=5)
    with pytest.raises(ConfigurationError):
        ColumnSpec("y", "float", "response", ymax=5)
    with pytest.raises(ConfigurationError):
        ColumnSpec("y", "count", "thing", ymax=5)
    with pytest.raises(ConfigurationError):
        ColumnSpec("y", "count", "response")
    with pytest.raises(ConfigurationError):
        ColumnSpec("x", "binary", "covariate", ymax=3)


def test_schema_validation():
    with pytest.raises(ConfigurationError, match="unique"):
        DatasetSchema(
            (
                ColumnSpec("y", "count", "response", ymax=2),
                ColumnSpec("y", "binary", "covariate"),
            )
        )
    with pytest.raises(ConfigurationError, match="response"):
        DatasetSchema((ColumnSpec("x", "binary", "covariate"),))


def test_dataset_shape_check():
    with pytest.raises(DataError):
        Dataset(schema=COUNT_SCHEMA, rows=np.zeros((3, 2), dtype=np.int64))
