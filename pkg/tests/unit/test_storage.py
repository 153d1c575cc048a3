"""Unit tests for src/core/storage.py."""

import json

import numpy as np
import pytest

from src.core.errors import StorageError
from src.core.storage import (
    build_checkpoint_path,
    build_sweep_path,
    content_hash,
    format_float,
    read_csv_rows,
    render_csv,
    write_bytes_atomic,
    write_csv,
    write_json,
)


# ---------------------------------------------------------------------------
# Path builders
# ---------------------------------------------------------------------------


class TestPathBuilders:
    def test_paths_live_under_out_dir(self, tmp_path):
        assert build_checkpoint_path(tmp_path) == tmp_path / "checkpoint.json"
        assert build_sweep_path(tmp_path) == tmp_path / "sweep.csv"


# ---------------------------------------------------------------------------
# Float formatting and CSV
# ---------------------------------------------------------------------------


class TestFormatting:
    @pytest.mark.parametrize("value", [0.1, 1 / 3, 1e-300, -2.5, 123456789.125])
    def test_float_round_trips(self, value):
        assert float(format_float(value)) == value

    def test_numpy_scalar(self):
        assert format_float(np.float64(0.5)) == "0.5"

    def test_render_csv(self):
        text = render_csv(["a", "b"], [[1, 0.25], ["x,y", 2.0]])
        assert text == 'a,b\n1,0.25\n"x,y",2.0\n'

    def test_read_back(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ["a", "b"], [[1, 2], [3, 4]])
        header, rows = read_csv_rows(path)
        assert header == ["a", "b"]
        assert rows == [["1", "2"], ["3", "4"]]

    def test_read_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert read_csv_rows(path) == ([], [])


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------


class TestAtomicWrites:
    def test_creates_parent_dirs(self, tmp_path):
        path = tmp_path / "a" / "b" / "out.bin"
        write_bytes_atomic(path, b"abc")
        assert path.read_bytes() == b"abc"

    def test_no_temp_files_left(self, tmp_path):
        write_bytes_atomic(tmp_path / "out.bin", b"abc")
        assert [p.name for p in tmp_path.iterdir()] == ["out.bin"]

    def test_failed_write_keeps_old_content(self, tmp_path, mocker):
        path = tmp_path / "out.bin"
        path.write_bytes(b"old")
        mocker.patch("src.core.storage.os.replace", side_effect=OSError("disk full"))
        with pytest.raises(StorageError, match="disk full") as excinfo:
            write_bytes_atomic(path, b"new")
        assert excinfo.value.path == path
        assert isinstance(excinfo.value.cause, OSError)
        assert path.read_bytes() == b"old"
        assert [p.name for p in tmp_path.iterdir()] == ["out.bin"]

    def test_parent_is_a_regular_file(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        with pytest.raises(StorageError):
            write_bytes_atomic(blocker / "out" / "report.json", b"{}")

    def test_json_is_sorted_and_stable(self, tmp_path):
        write_json(tmp_path / "a.json", {"b": 1, "a": [1.5]})
        write_json(tmp_path / "b.json", {"a": [1.5], "b": 1})
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert json.loads((tmp_path / "a.json").read_text()) == {"a": [1.5], "b": 1}


# ---------------------------------------------------------------------------
# Content hash
# ---------------------------------------------------------------------------


class TestContentHash:
    def test_order_independent(self, tmp_path):
        (tmp_path / "x").write_text("1")
        (tmp_path / "y").write_text("2")
        assert content_hash([tmp_path / "x", tmp_path / "y"]) == content_hash([tmp_path / "y", tmp_path / "x"])

    def test_changes_with_content(self, tmp_path):
        path = tmp_path / "x"
        path.write_text("1")
        before = content_hash([path])
        path.write_text("2")
        assert content_hash([path]) != before
