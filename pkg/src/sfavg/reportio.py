"""Result persistence: canonical JSON, per-epsilon CSV tables, binary path
spills, and content-hash manifests.

Scientific results and wall-clock data are written to separate files
(results.json vs timing.json) so that determinism checks on results.json can
be byte-exact. JSON uses sorted keys and UTF-8; CSV follows RFC 4180 with
shortest round-trip float formatting; binary path files are a one-line JSON
header followed by little-endian float64 columns.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .spaces import InvalidArgument, TimeGrid
from .integrate import PathSample, SeedRecord

PATH_MAGIC = "sfavg-path-v1"
MANIFEST_NAME = "manifest.json"
RESULTS_NAME = "results.json"
TIMING_NAME = "timing.json"
CSV_COLUMNS = ("eps", "error", "stderr", "failures", "n_paths")
_HASH_CHUNK = 1 << 20


def canonical_json_bytes(obj) -> bytes:
    """Serialize with sorted keys and no locale-dependent formatting."""
    text = json.dumps(obj, sort_keys=True, ensure_ascii=False,
                      separators=(",", ": "), indent=1)
    return (text + "\n").encode("utf-8")


def dump_json(obj, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(canonical_json_bytes(obj))


def load_json(path: str):
    with open(path, "rb") as fh:
        return json.loads(fh.read().decode("utf-8"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(_HASH_CHUNK)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def _format_cell(value) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def csv_text(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    """RFC 4180 CSV (CRLF line endings, minimal quoting)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    return buf.getvalue()


def write_csv(rows: Iterable[Sequence], header: Sequence[str],
              path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(rows, header))


def convergence_csv_rows(report) -> List[tuple]:
    """Per-scale table rows (eps, error, stderr, failures, n_paths)."""
    rows = []
    for res in report.results:
        key = getattr(res, "eps", None)
        if key is None:
            key = res.delta
        rows.append((key, res.error, res.stderr, res.failed_paths,
                     res.n_paths))
    return rows


def write_report(report, out_dir: str, name: str) -> Dict[str, str]:
    """Write results.json, timing.json and tables/<name>.csv.

    Returns a map of written relative paths to their content hashes.
    """
    os.makedirs(os.path.join(out_dir, "tables"), exist_ok=True)
    written: Dict[str, str] = {}

    results_rel = RESULTS_NAME
    dump_json(report.as_dict(include_timing=False),
              os.path.join(out_dir, results_rel))
    written[results_rel] = sha256_file(os.path.join(out_dir, results_rel))

    timing = {
        "kind": getattr(report, "kind", name),
        "wall_times": [res.wall_time for res in report.results],
    }
    dump_json(timing, os.path.join(out_dir, TIMING_NAME))
    written[TIMING_NAME] = sha256_file(os.path.join(out_dir, TIMING_NAME))

    table_rel = os.path.join("tables", f"{name}.csv")
    write_csv(convergence_csv_rows(report), CSV_COLUMNS,
              os.path.join(out_dir, table_rel))
    written[table_rel] = sha256_file(os.path.join(out_dir, table_rel))
    return written


def write_path_bin(sample: PathSample, path: str, eps: float = 0.0) -> None:
    """Binary column file: one-line JSON header + little-endian f64 columns.

    Columns are stored mode-contiguous: all slow modes first, then all fast
    modes, each as n_points consecutive float64 values.
    """
    grid = sample.grid
    block = sample.slow if sample.slow is not None else sample.fast
    n_points = block.shape[0]
    slow_dim = sample.slow.shape[1] if sample.slow is not None else 0
    fast_dim = sample.fast.shape[1] if sample.fast is not None else 0
    header = {
        "magic": PATH_MAGIC,
        "t0": grid.t0,
        "t_end": grid.t_end,
        "step": grid.step,
        "cell_exponent": grid.cell_exponent,
        "n_points": int(n_points),
        "slow_dim": int(slow_dim),
        "fast_dim": int(fast_dim),
        "eps": eps,
        "seeds": sample.seed_record.as_dict(),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(head.encode("utf-8") + b"\n")
        if slow_dim:
            fh.write(np.ascontiguousarray(sample.slow.T,
                                          dtype="<f8").tobytes())
        if fast_dim:
            fh.write(np.ascontiguousarray(sample.fast.T,
                                          dtype="<f8").tobytes())


def read_path_bin(path: str) -> PathSample:
    with open(path, "rb") as fh:
        head_line = fh.readline()
        header = json.loads(head_line.decode("utf-8"))
        if header.get("magic") != PATH_MAGIC:
            raise InvalidArgument(f"{path}: not a path file (bad magic)")
        n = header["n_points"]
        slow_dim = header["slow_dim"]
        fast_dim = header["fast_dim"]
        body = fh.read()
    need = 8 * n * (slow_dim + fast_dim)
    if len(body) != need:
        raise InvalidArgument(
            f"{path}: body has {len(body)} bytes, expected {need}")
    flat = np.frombuffer(body, dtype="<f8")
    slow = None
    if slow_dim:
        slow = flat[:n * slow_dim].reshape(slow_dim, n).T.copy()
    fast = None
    if fast_dim:
        fast = flat[n * slow_dim:].reshape(fast_dim, n).T.copy()
    grid = TimeGrid(header["t0"], header["t_end"], header["step"],
                    cell_exponent=header["cell_exponent"])
    record = SeedRecord.from_dict(header["seeds"])
    return PathSample(grid=grid, slow=slow, fast=fast, seed_record=record,
                      newton_failures=0)


def write_manifest(out_dir: str, files: Dict[str, str],
                   config_sha256: str, seed_base: int,
                   tool_version: str) -> None:
    manifest = {
        "config_sha256": config_sha256,
        "seed_base": seed_base,
        "tool_version": tool_version,
        "files": dict(sorted(files.items())),
    }
    dump_json(manifest, os.path.join(out_dir, MANIFEST_NAME))


def verify_manifest(out_dir: str) -> List[str]:
    """Recompute content hashes; return a list of mismatch descriptions."""
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        return [f"missing {MANIFEST_NAME}"]
    manifest = load_json(manifest_path)
    problems = []
    for rel, expected in manifest.get("files", {}).items():
        full = os.path.join(out_dir, rel)
        if not os.path.exists(full):
            problems.append(f"missing file {rel}")
            continue
        actual = sha256_file(full)
        if actual != expected:
            problems.append(f"hash mismatch for {rel}: "
                            f"recorded {expected[:12]}.., found {actual[:12]}..")
    return problems
