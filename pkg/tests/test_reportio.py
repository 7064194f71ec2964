"""Tests for canonical JSON, CSV tables, path binaries, and manifests."""

import json
import os
from types import SimpleNamespace

import numpy as np
import pytest

from sfavg.harness import (
    ConvergenceReport,
    DeltaResult,
    EpsilonResult,
    RateFit,
)
from sfavg.integrate import PathSample, SeedRecord
from sfavg.reportio import (
    CSV_COLUMNS,
    MANIFEST_NAME,
    canonical_json_bytes,
    convergence_csv_rows,
    csv_text,
    dump_json,
    load_json,
    read_path_bin,
    sha256_bytes,
    sha256_file,
    verify_manifest,
    write_csv,
    write_manifest,
    write_path_bin,
    write_report,
)
from sfavg.spaces import InvalidArgument, TimeGrid

SHA256_EMPTY = ("e3b0c44298fc1c149afbf4c8996fb9242"
                "7ae41e4649b934ca495991b7852b855")


def eps_result(eps, error, wall_time=0.5):
    return EpsilonResult(eps=eps, error=error, stderr=0.01, failed_paths=0,
                         n_paths=4, flagged_invalid=False, conditional=False,
                         w1_checksum="abcdef0123456789", wall_time=wall_time)


def small_report():
    rate = RateFit(slope=0.5, intercept=0.0, r2=1.0, slope_stderr=0.0,
                   n_points=2)
    return ConvergenceReport(
        kind="T1", results=(eps_result(0.5, 1.25), eps_result(0.25, 0.5)),
        rate=rate, bound_satisfied=True, monotone=True, passed=True,
        inconclusive_reasons=(), moment_p=1.0, horizon=1.0, step=0.1,
        seed_base=7)


class TestCanonicalJson:
    def test_key_order_independent_and_newline_terminated(self):
        a = canonical_json_bytes({"b": 1, "a": [1.5, 2]})
        b = canonical_json_bytes({"a": [1.5, 2], "b": 1})
        assert a == b
        assert a.endswith(b"\n")
        assert a.index(b'"a"') < a.index(b'"b"')
        assert json.loads(a.decode("utf-8")) == {"a": [1.5, 2], "b": 1}

    def test_utf8_not_escaped(self):
        data = canonical_json_bytes({"label": "μ"})
        assert "μ".encode("utf-8") in data
        assert b"\\u" not in data

    def test_dump_load_roundtrip(self, tmp_path):
        obj = {"x": [0.1, -3], "name": "run", "flag": True}
        target = str(tmp_path / "obj.json")
        dump_json(obj, target)
        assert load_json(target) == obj
        with open(target, "rb") as fh:
            assert fh.read() == canonical_json_bytes(obj)


class TestHashes:
    def test_sha256_of_known_bytes(self):
        assert sha256_bytes(b"") == SHA256_EMPTY

    def test_file_hash_matches_byte_hash(self, tmp_path):
        payload = b"reproducible payload\n"
        target = str(tmp_path / "blob.bin")
        with open(target, "wb") as fh:
            fh.write(payload)
        assert sha256_file(target) == sha256_bytes(payload)


class TestCsv:
    def test_shortest_roundtrip_float_cells(self):
        text = csv_text([(1.0 / 3.0, np.float64(0.25), np.int64(3), 7, "x")],
                        ("a", "b", "c", "d", "e"))
        lines = text.split("\r\n")
        assert lines[0] == "a,b,c,d,e"
        cells = lines[1].split(",")
        assert float(cells[0]) == 1.0 / 3.0
        assert cells[1] == "0.25"
        assert cells[2] == "3"
        assert cells[3] == "7"
        assert cells[4] == "x"

    def test_crlf_and_quoting(self):
        text = csv_text([(0.1, "a,b")], ("eps", "label"))
        assert text == 'eps,label\r\n0.1,"a,b"\r\n'

    def test_write_csv_preserves_line_endings(self, tmp_path):
        target = str(tmp_path / "t.csv")
        write_csv([(1e-09, 2)], ("x", "y"), target)
        with open(target, "rb") as fh:
            assert fh.read() == b"x,y\r\n1e-09,2\r\n"

    def test_convergence_rows_key_on_eps_or_delta(self):
        eps_rep = SimpleNamespace(results=(eps_result(0.5, 1.25),))
        assert convergence_csv_rows(eps_rep) == [(0.5, 1.25, 0.01, 0, 4)]
        delta_res = DeltaResult(delta=0.2, error=2.0, stderr=0.2,
                                failed_paths=1, n_paths=8,
                                flagged_invalid=False, wall_time=0.0)
        delta_rep = SimpleNamespace(results=(delta_res,))
        assert convergence_csv_rows(delta_rep) == [(0.2, 2.0, 0.2, 1, 8)]


class TestWriteReport:
    def test_files_hashes_and_timing_split(self, tmp_path):
        rep = small_report()
        out = str(tmp_path)
        written = write_report(rep, out, "T1")
        table_rel = os.path.join("tables", "T1.csv")
        assert set(written) == {"results.json", "timing.json", table_rel}
        for rel, digest in written.items():
            full = os.path.join(out, rel)
            assert os.path.exists(full)
            assert sha256_file(full) == digest
        with open(os.path.join(out, "results.json"), "rb") as fh:
            results_bytes = fh.read()
        expected = canonical_json_bytes(rep.as_dict(include_timing=False))
        assert results_bytes == expected
        assert b"wall_time" not in results_bytes
        timing = load_json(os.path.join(out, "timing.json"))
        assert timing == {"kind": "T1", "wall_times": [0.5, 0.5]}
        with open(os.path.join(out, table_rel), encoding="utf-8",
                  newline="") as fh:
            table = fh.read()
        assert table.startswith(",".join(CSV_COLUMNS) + "\r\n")
        assert "0.5,1.25,0.01,0,4" in table


class TestPathBin:
    def grid(self):
        return TimeGrid(0.0, 1.0, 0.25, cell_exponent=8)

    def record(self):
        return SeedRecord(seed=42, streams=(("w1", 1), ("w2", 2)))

    def test_roundtrip_both_components(self, tmp_path):
        grid = self.grid()
        slow = np.linspace(-1.0, 1.0, 10).reshape(5, 2)
        fast = np.linspace(0.0, 7.0, 15).reshape(5, 3) / 3.0
        sample = PathSample(grid=grid, slow=slow, fast=fast,
                            seed_record=self.record())
        target = str(tmp_path / "path.bin")
        write_path_bin(sample, target, eps=0.25)
        back = read_path_bin(target)
        assert np.array_equal(back.slow, slow)
        assert np.array_equal(back.fast, fast)
        assert back.grid.t0 == grid.t0
        assert back.grid.t_end == grid.t_end
        assert back.grid.step == grid.step
        assert back.grid.cell_exponent == grid.cell_exponent
        assert back.seed_record == sample.seed_record

    def test_roundtrip_fast_only(self, tmp_path):
        grid = self.grid()
        fast = np.arange(15.0).reshape(5, 3)
        sample = PathSample(grid=grid, slow=None, fast=fast,
                            seed_record=self.record())
        target = str(tmp_path / "fast.bin")
        write_path_bin(sample, target)
        back = read_path_bin(target)
        assert back.slow is None
        assert np.array_equal(back.fast, fast)

    def test_header_is_single_json_line(self, tmp_path):
        grid = self.grid()
        sample = PathSample(grid=grid, slow=np.zeros((5, 2)), fast=None,
                            seed_record=self.record())
        target = str(tmp_path / "p.bin")
        write_path_bin(sample, target, eps=0.1)
        with open(target, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            body = fh.read()
        assert header["magic"] == "sfavg-path-v1"
        assert header["slow_dim"] == 2
        assert header["fast_dim"] == 0
        assert header["n_points"] == 5
        assert header["eps"] == 0.1
        assert len(body) == 8 * 5 * 2

    def test_bad_magic_rejected(self, tmp_path):
        target = str(tmp_path / "bad.bin")
        with open(target, "wb") as fh:
            fh.write(b'{"magic":"other-format"}\n')
        with pytest.raises(InvalidArgument, match="bad magic"):
            read_path_bin(target)

    def test_truncated_body_rejected(self, tmp_path):
        grid = self.grid()
        sample = PathSample(grid=grid, slow=np.zeros((5, 2)), fast=None,
                            seed_record=self.record())
        target = str(tmp_path / "trunc.bin")
        write_path_bin(sample, target)
        with open(target, "rb") as fh:
            data = fh.read()
        with open(target, "wb") as fh:
            fh.write(data[:-8])
        with pytest.raises(InvalidArgument, match="expected"):
            read_path_bin(target)


class TestManifest:
    def populate(self, out):
        files = {}
        dump_json({"v": 1}, os.path.join(out, "results.json"))
        files["results.json"] = sha256_file(os.path.join(out,
                                                         "results.json"))
        write_csv([(1, 2)], ("a", "b"), os.path.join(out, "t.csv"))
        files["t.csv"] = sha256_file(os.path.join(out, "t.csv"))
        return files

    def test_write_then_verify_clean(self, tmp_path):
        out = str(tmp_path)
        files = self.populate(out)
        write_manifest(out, files, config_sha256="c" * 64, seed_base=7,
                       tool_version="0.1.0")
        assert verify_manifest(out) == []
        manifest = load_json(os.path.join(out, MANIFEST_NAME))
        assert manifest["config_sha256"] == "c" * 64
        assert manifest["seed_base"] == 7
        assert manifest["tool_version"] == "0.1.0"
        assert manifest["files"] == files

    def test_missing_manifest_reported(self, tmp_path):
        assert verify_manifest(str(tmp_path)) == ["missing manifest.json"]

    def test_missing_file_reported(self, tmp_path):
        out = str(tmp_path)
        files = self.populate(out)
        write_manifest(out, files, config_sha256="c" * 64, seed_base=7,
                       tool_version="0.1.0")
        os.remove(os.path.join(out, "t.csv"))
        problems = verify_manifest(out)
        assert problems == ["missing file t.csv"]

    def test_hash_mismatch_reported(self, tmp_path):
        out = str(tmp_path)
        files = self.populate(out)
        write_manifest(out, files, config_sha256="c" * 64, seed_base=7,
                       tool_version="0.1.0")
        with open(os.path.join(out, "t.csv"), "ab") as fh:
            fh.write(b"tampered")
        problems = verify_manifest(out)
        assert len(problems) == 1
        assert problems[0].startswith("hash mismatch for t.csv")
