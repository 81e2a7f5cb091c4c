"""Plain-text tables, matrices, digests, and run manifests."""

import hashlib

import numpy as np
import pytest

from specswap.io import (
    MANIFEST_NAME,
    file_digest,
    read_matrix,
    read_table,
    write_manifest,
    write_matrix,
    write_table,
)


class TestTables:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "trace.txt"
        x = np.linspace(-2.0, 2.0, 21)
        y = 0.5 * (1.0 + np.cos(3.0 * x))
        n = np.arange(21)
        header = {"axis": "tau_s", "pulses": 400000, "subtracted": False,
                  "scale": 0.125}
        write_table(path, [("delay", x), ("rate", y), ("count", n)], header)
        got_header, data = read_table(path)
        assert got_header["axis"] == "tau_s"
        assert got_header["pulses"] == 400000 and isinstance(got_header["pulses"], int)
        assert got_header["subtracted"] is False
        assert got_header["scale"] == 0.125
        assert list(data) == ["delay", "rate", "count"]
        assert np.allclose(data["delay"], x, rtol=1e-9)
        assert np.allclose(data["rate"], y, rtol=1e-9)
        assert np.array_equal(data["count"], n)

    def test_write_validation(self, tmp_path):
        with pytest.raises(ValueError):
            write_table(tmp_path / "empty.txt", [])
        with pytest.raises(ValueError):
            write_table(tmp_path / "ragged.txt",
                        [("a", np.arange(3)), ("b", np.arange(4))])
        with pytest.raises(ValueError):
            write_table(tmp_path / "matrix.txt", [("a", np.ones((2, 2)))])

    def test_read_needs_columns_line(self, tmp_path):
        path = tmp_path / "bare.txt"
        path.write_text("1\t2\n3\t4\n")
        with pytest.raises(ValueError):
            read_table(path)

    def test_deterministic_bytes(self, tmp_path):
        x = np.linspace(0.0, 1.0, 11)
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        write_table(a, [("x", x)], {"seed": 7})
        write_table(b, [("x", x)], {"seed": 7})
        assert file_digest(a) == file_digest(b)


class TestMatrices:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "map.txt"
        rows = np.arange(-2, 3, dtype=float)
        cols = np.arange(-3, 4, dtype=float)
        m = np.outer(np.exp(-(rows**2)), np.exp(-(cols**2) / 2.0))
        write_matrix(path, m, ("pixel_c", rows), ("pixel_d", cols),
                     {"pixel_nm": 0.1})
        header, got_rows, got_cols, got = read_matrix(path)
        assert header["pixel_nm"] == 0.1
        assert header["rows"] == "pixel_c" and header["cols"] == "pixel_d"
        assert np.allclose(got_rows, rows)
        assert np.allclose(got_cols, cols)
        assert np.allclose(got, m, rtol=1e-9)

    def test_shape_validation(self, tmp_path):
        with pytest.raises(ValueError):
            write_matrix(tmp_path / "bad.txt", np.ones((2, 3)),
                         ("r", np.arange(3)), ("c", np.arange(3)))

    def test_read_needs_axis_row(self, tmp_path):
        path = tmp_path / "noaxis.txt"
        path.write_text("# a = 1\n1\t2\n")
        with pytest.raises(ValueError):
            read_matrix(path)


class TestManifest:
    def test_content_and_determinism(self, tmp_path):
        write_table(tmp_path / "fringe.txt", [("x", np.arange(3.0))])
        write_table(tmp_path / "peak.txt", [("y", np.arange(4.0))])
        path = write_manifest(tmp_path, "specswap fringe", "cafe" * 16, 7,
                              ["peak.txt", "fringe.txt"],
                              extra={"points": 3})
        text = (tmp_path / MANIFEST_NAME).read_text()
        lines = text.splitlines()
        assert lines[0] == "command = specswap fringe"
        assert lines[1].startswith("config_hash = cafe")
        assert lines[2] == "seed = 7"
        assert lines[3] == "points = 3"
        # files listed sorted by name with their content digests
        assert lines[4].startswith("file = fringe.txt sha256 = ")
        assert lines[5].startswith("file = peak.txt sha256 = ")
        expect = file_digest(tmp_path / "fringe.txt")
        assert lines[4].endswith(expect)
        first = file_digest(path)
        write_manifest(tmp_path, "specswap fringe", "cafe" * 16, 7,
                       ["peak.txt", "fringe.txt"], extra={"points": 3})
        assert file_digest(path) == first


class TestDigest:
    def test_matches_hashlib(self, tmp_path):
        path = tmp_path / "blob.bin"
        payload = b"spectral pixels\n" * 1000
        path.write_bytes(payload)
        assert file_digest(path) == hashlib.sha256(payload).hexdigest()
