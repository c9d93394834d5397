import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from linfsketch import io
from linfsketch.errors import DimensionMismatch, NonFinite
from linfsketch.rng import SeedSpec
from linfsketch.verify import ExperimentSpec, run_check

finite = st.floats(allow_nan=False, allow_infinity=False)
shapes = st.tuples(st.integers(0, 6), st.integers(0, 5))


@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite)))
@settings(max_examples=100, deadline=None)
def test_binary_round_trip_bit_exact(tmp_path_factory, A):
    path = tmp_path_factory.mktemp("bin") / "m.lsk"
    io.write_binary(path, A)
    assert path.stat().st_size == 20 + 8 * A.size
    B = io.read_matrix(path)
    assert B.shape == A.shape
    assert B.tobytes(order="F") == np.asfortranarray(A).tobytes(order="F")


def test_binary_layout(tmp_path):
    A = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    io.write_binary(tmp_path / "a.lsk", A)
    raw = (tmp_path / "a.lsk").read_bytes()
    assert raw[:4] == b"LSK1"
    assert struct.unpack("<QQ", raw[4:20]) == (3, 2)
    assert struct.unpack("<6d", raw[20:]) == (1.0, 3.0, 5.0, 2.0, 4.0, 6.0)


def test_binary_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.lsk"
    p.write_bytes(b"LSK1" + struct.pack("<QQ", 2, 2) + b"\0" * 24)
    with pytest.raises(io.FormatError):
        io.read_matrix(p)
    p.write_bytes(b"LSK1" + struct.pack("<QQ", 1, 1) + struct.pack("<d", float("inf")))
    with pytest.raises(NonFinite):
        io.read_matrix(p)
    p.write_bytes(b"LSK")
    with pytest.raises(io.FormatError):
        io.read_binary(p)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=finite))
@settings(max_examples=60, deadline=None)
def test_csv_round_trip(tmp_path_factory, A):
    path = tmp_path_factory.mktemp("csv") / "m.csv"
    io.write_csv(path, A)
    np.testing.assert_array_equal(io.read_matrix(path), A)


def test_csv_header_detection(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("2,3\n1,2,3\n4,5,6\n")
    np.testing.assert_array_equal(io.read_csv(p), [[1, 2, 3], [4, 5, 6]])
    # a row of two integers that does not describe the body is data
    p.write_text("2,3\n4,5\n")
    np.testing.assert_array_equal(io.read_csv(p), [[2, 3], [4, 5]])
    p.write_text("1.5,2\n3,4\n")
    assert io.read_csv(p).shape == (2, 2)
    p.write_text("1,2\n3\n")
    with pytest.raises(io.FormatError):
        io.read_csv(p)
    p.write_text("1,x\n")
    with pytest.raises(io.FormatError):
        io.read_csv(p)
    p.write_text("1,nan\n")
    with pytest.raises(NonFinite):
        io.read_csv(p)


def test_read_vector(tmp_path):
    io.write_csv(tmp_path / "v.csv", np.arange(4.0))
    np.testing.assert_array_equal(io.read_vector(tmp_path / "v.csv"), np.arange(4.0))
    (tmp_path / "r.csv").write_text("1,2,3\n")
    np.testing.assert_array_equal(io.read_vector(tmp_path / "r.csv"), [1, 2, 3])
    io.write_csv(tmp_path / "m.csv", np.ones((2, 2)))
    with pytest.raises(DimensionMismatch):
        io.read_vector(tmp_path / "m.csv")


def _doc(**exp):
    base = {"sketch_kind": "srht", "n": 64, "d": 2, "m_grid": [8, 16], "check": "colnorm", "trials": 30}
    base.update(exp)
    return {"experiment": base}


def test_config_parsing():
    cfg = io.parse_config(_doc(seed=7))
    spec = io.build_spec(cfg["experiment"])
    assert spec.seed == SeedSpec(7) and spec.m_grid == (8, 16)
    assert io.build_spec(cfg["experiment"], SeedSpec(9)).seed == SeedSpec(9)
    assert io.parse_seed({"master_seed": 3, "stream_id": 4}) == SeedSpec(3, 4)


@pytest.mark.parametrize("doc,needle", [
    ({"experiment": {}, "extra": {}}, "extra"),
    (_doc(colour="red"), "colour"),
    (dict(_doc(), io={"report": "r.json", "plot": "x"}), "plot"),
    (dict(_doc(), output={"format": "yaml"}), "format"),
    ({"io": {}}, "experiment"),
])
def test_config_rejects_unknown_keys(doc, needle):
    with pytest.raises(io.ConfigError, match=needle):
        io.parse_config(doc)


def test_config_revalidates_spec():
    with pytest.raises(io.ConfigError):
        io.build_spec(io.parse_config(_doc(trials=5))["experiment"])
    with pytest.raises(io.ConfigError):
        io.build_spec(io.parse_config(_doc(m_grid=[16, 8]))["experiment"])
    with pytest.raises(io.ConfigError):
        io.build_spec(io.parse_config(_doc(sketch_kind="nope"))["experiment"])
    with pytest.raises(io.ConfigError):
        io.parse_seed(True)


def test_load_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(io.ConfigError):
        io.load_config(p)
    with pytest.raises(io.ConfigError):
        io.load_config(tmp_path / "missing.json")
    p.write_text(json.dumps(_doc()))
    assert io.load_config(p)["experiment"]["n"] == 64


def test_report_json_round_trip():
    spec = ExperimentSpec("gaussian", 64, 2, (8, 32), "colnorm", trials=30, seed=SeedSpec(2))
    report = run_check(spec)
    text = io.report_to_json(report)
    assert io.report_from_json(text) == report
    assert io.report_to_json(io.report_from_json(text)) == text
    assert list(json.loads(text)) == ["check", "kind", "delta", "trials", "per_cell",
                                      "overall_pass", "scaling_fit", "flags"]


def test_seed_from_env():
    assert io.seed_from_env(None) is None
    assert io.seed_from_env(" ") is None
    assert io.seed_from_env("12") == SeedSpec(12)
    with pytest.raises(io.ConfigError):
        io.seed_from_env("-3")
