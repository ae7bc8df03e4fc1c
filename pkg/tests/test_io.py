import numpy as np
import pytest

from uqpipe import io
from uqpipe.errors import ArtifactError, CsvFormatError


class TestCsv:
    def test_matrix_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        matrix = rng.normal(size=(20, 5)) * 10.0 ** rng.integers(-8, 8, (20, 5))
        path = tmp_path / "m.csv"
        io.write_matrix_csv(path, [f"c{i}" for i in range(5)], matrix)
        header, back = io.read_matrix_csv(path)
        assert header == [f"c{i}" for i in range(5)]
        assert back.tobytes() == matrix.tobytes()

    def test_row_length_mismatch_reports_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n3\n", encoding="utf-8")
        with pytest.raises(CsvFormatError, match="row 3"):
            io.read_csv(path)

    def test_non_numeric_cell_reports_position(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n3,x\n", encoding="utf-8")
        with pytest.raises(CsvFormatError, match="column 2"):
            io.read_matrix_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError):
            io.read_csv(tmp_path / "nope.csv")

    def test_lf_line_endings(self, tmp_path):
        path = tmp_path / "m.csv"
        io.write_matrix_csv(path, ["a"], np.array([[1.0]]))
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")


class TestJsonArtifacts:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        arr = rng.normal(size=(7, 3))
        path = tmp_path / "a.json"
        io.write_json_artifact(path, "thing", {"payload": io.encode_array(arr)})
        doc = io.read_json_artifact(path, "thing")
        back = io.decode_array(doc["payload"])
        assert back.tobytes() == arr.tobytes()
        assert back.shape == arr.shape

    def test_schema_version_mismatch(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text('{"schema_version": "0", "kind": "thing"}',
                        encoding="utf-8")
        with pytest.raises(ArtifactError, match="schema_version"):
            io.read_json_artifact(path, "thing")

    def test_kind_mismatch(self, tmp_path):
        path = tmp_path / "a.json"
        io.write_json_artifact(path, "thing", {})
        with pytest.raises(ArtifactError, match="kind"):
            io.read_json_artifact(path, "other")

    def test_deterministic_bytes(self, tmp_path):
        arr = np.linspace(0, 1, 11)
        p1, p2 = tmp_path / "x.json", tmp_path / "y.json"
        io.write_json_artifact(p1, "thing", {"v": io.encode_array(arr)})
        io.write_json_artifact(p2, "thing", {"v": io.encode_array(arr)})
        assert p1.read_bytes() == p2.read_bytes()


class TestBinaryMatrix:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        arr = rng.normal(size=(3, 4, 5))
        path = tmp_path / "m.bin"
        io.write_binary_matrix(path, arr)
        back = io.read_binary_matrix(path, (3, 4, 5))
        assert back.tobytes() == arr.tobytes()

    def test_shape_mismatch(self, tmp_path):
        path = tmp_path / "m.bin"
        io.write_binary_matrix(path, np.zeros((2, 2)))
        with pytest.raises(ArtifactError):
            io.read_binary_matrix(path, (3, 3))
