"""Round-trip behaviour of the delimited-output helpers."""

import math

import numpy as np
import pytest

from driftlab.records import (
    FLOAT_FMT,
    format_value,
    read_csv,
    read_csv_columns,
    read_record,
    to_plain,
    write_csv,
    write_record,
)

# Values chosen to lose digits under any format shorter than %.17g.
AWKWARD = [
    0.1,
    1.0 / 3.0,
    math.pi,
    1e-300,
    1e300,
    -2.7302778013234312,
    6.02214076e23,
    np.nextafter(1.0, 2.0),
]


def test_float_format_is_17_significant_digits():
    assert FLOAT_FMT == "%.17g"
    for x in AWKWARD:
        assert float(format_value(x)) == x


def test_format_value_types():
    assert format_value(True) == "true"
    assert format_value(np.bool_(False)) == "false"
    assert format_value(7) == "7"
    assert format_value(np.int64(-3)) == "-3"
    assert format_value("label") == "label"
    assert float(format_value(np.float64(0.1))) == 0.1


def test_csv_round_trip(tmp_path):
    path = tmp_path / "table.csv"
    rows = [(x, 2 * x, i) for i, x in enumerate(AWKWARD)]
    write_csv(path, ("a", "b", "idx"), rows)

    header, raw = read_csv(path)
    assert header == ["a", "b", "idx"]
    assert len(raw) == len(AWKWARD)

    cols = read_csv_columns(path)
    assert set(cols) == {"a", "b", "idx"}
    np.testing.assert_array_equal(cols["a"], np.array(AWKWARD))
    np.testing.assert_array_equal(cols["b"], 2 * np.array(AWKWARD))


def test_csv_exact_binary_round_trip(tmp_path):
    # every double must survive text and come back bit-identical
    rng = np.random.default_rng(7)
    vals = rng.standard_normal(50) * np.exp(rng.uniform(-30, 30, 50))
    path = tmp_path / "bits.csv"
    write_csv(path, ("v",), [(v,) for v in vals])
    back = read_csv_columns(path)["v"]
    assert np.array_equal(back, vals)


def test_to_plain_handles_numpy_and_nested():
    obj = {
        "arr": np.arange(3, dtype=float),
        "scalar": np.float64(0.5),
        "flag": np.bool_(True),
        "nested": {"n": np.int32(4), "seq": [np.float32(1.0), 2]},
    }
    plain = to_plain(obj)
    assert plain["arr"] == [0.0, 1.0, 2.0]
    assert isinstance(plain["scalar"], float)
    assert plain["flag"] is True
    assert plain["nested"]["n"] == 4
    assert isinstance(plain["nested"]["seq"][0], float)


def test_record_round_trip(tmp_path):
    record = {
        "omega": 1.0,
        "gap": 2.7302778013234312,
        "counts": [1, 2, 3],
        "meta": {"ok": True, "note": "frozen"},
    }
    path = tmp_path / "cert.yaml"
    write_record(path, record, kind="certificate")
    back = read_record(path)
    for key, val in record.items():
        assert back[key] == val


def test_record_kind_label(tmp_path):
    path = write_record(tmp_path / "r.yaml", {"x": 1.0}, kind="summary")
    assert read_record(path)["record"] == "summary"


def test_read_record_rejects_non_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        read_record(path)


def test_empty_csv_columns(tmp_path):
    path = write_csv(tmp_path / "empty.csv", ("t", "q"), [])
    cols = read_csv_columns(path)
    assert cols["t"].shape == (0,)
    assert cols["q"].shape == (0,)
