"""File formats.

* Matrices and point spaces: CSV, row-major, floats written with ``repr`` so
  they round-trip exactly; an optional single header line is auto-detected.
* Patterns: ``iteration,atom,measurement,amplitude`` lines with 1-based indices.
* Run metadata: JSON, with infinities written as the string ``"inf"``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .dictionary import Dictionary, build_dictionary
from .solver import Solution
from .spaces import MetricKind, Pattern, PointSpace

PATTERN_HEADER = ["iteration", "atom", "measurement", "amplitude"]


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_matrix(path):
    """Read a numeric CSV; a first line with a non-numeric field is treated as a header."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    return np.array([[float(c) for c in r] for r in rows])


def write_matrix(path, matrix, header=None):
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in a:
            w.writerow([repr(float(v)) for v in row])


def read_points(path, metric=MetricKind.ABSOLUTE_1D) -> PointSpace:
    return PointSpace(read_matrix(path), metric)


def write_points(path, space: PointSpace):
    write_matrix(path, space.points)


def write_patterns(path, patterns, X):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATTERN_HEADER)
        for it, pat in enumerate(patterns, start=1):
            for j, k in sorted(pat, key=lambda p: (p[1], p[0])):
                w.writerow([it, j + 1, k + 1, repr(float(X[j, k]))])


def read_patterns(path):
    """Return ``(patterns, amplitudes)``; indices are converted back to 0-based."""
    by_iter, amps = {}, {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PATTERN_HEADER:
            raise ValueError(f"{path}: expected header {','.join(PATTERN_HEADER)}")
        for row in reader:
            if not row:
                continue
            it, j, k = int(row[0]), int(row[1]) - 1, int(row[2]) - 1
            by_iter.setdefault(it, []).append((j, k))
            amps[(j, k)] = float(row[3])
    patterns = [Pattern(by_iter[i]) for i in sorted(by_iter)]
    return patterns, amps


def encode_real(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def decode_real(x):
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        return float(x)
    return float(x)


def _encode(obj):
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    return encode_real(obj)


def dump_json(path, obj):
    Path(path).write_text(json.dumps(_encode(obj), indent=2, sort_keys=True) + "\n")


def config_hash(config) -> str:
    text = json.dumps(_encode(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def write_solution(out_dir, solution: Solution, metadata: dict):
    """Write ``X.csv``, ``patterns.txt`` and ``run.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "X.csv", solution.X)
    write_patterns(out / "patterns.txt", solution.patterns, solution.X)
    run = dict(metadata)
    run.update({
        "method": solution.method,
        "iterations": solution.iterations,
        "residual_norms": [float(v) for v in solution.residual_norms],
        "weakness_trace": [float(v) for v in solution.weakness_trace],
        "lambda": float(min(solution.weakness_trace)) if solution.weakness_trace else None,
        "stagnated": bool(solution.stagnated),
        "nnz": solution.nnz,
    })
    dump_json(out / "run.json", run)


def read_solution(sol_dir) -> tuple[Solution, dict]:
    d = Path(sol_dir)
    X = read_matrix(d / "X.csv")
    patterns, _ = read_patterns(d / "patterns.txt")
    run = json.loads((d / "run.json").read_text())
    sol = Solution(X, patterns, list(run.get("residual_norms", [])),
                   list(run.get("weakness_trace", [])), bool(run.get("stagnated", False)),
                   run.get("method", "gm-omp"))
    return sol, run


def export_dictionary(out_dir, D: Dictionary, stem="dictionary"):
    """Write ``<stem>.csv`` (atoms), ``<stem>_params.csv`` (parameter points) and a JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / f"{stem}.csv", D.atoms)
    write_points(out / f"{stem}_params.csv", D.pspace)
    dump_json(out / f"{stem}.json", {"kind": D.kind, "params": D.params,
                                     "metric": D.pspace.metric.value,
                                     "shape": list(D.shape)})


def import_dictionary(csv_path, params_csv=None, metric=MetricKind.ABSOLUTE_1D) -> Dictionary:
    """Load atoms from CSV; parameter points default to 1..P on the line."""
    atoms = read_matrix(csv_path)
    if params_csv is None:
        pspace = PointSpace.line(atoms.shape[1])
    else:
        pspace = read_points(params_csv, metric)
    return Dictionary(atoms, pspace, kind="csv", params={"path": str(csv_path)})


def load_dictionary_sidecar(json_path) -> Dictionary:
    """Rebuild a dictionary from the builder recorded in its JSON sidecar."""
    meta = json.loads(Path(json_path).read_text())
    return build_dictionary(meta["kind"], **meta["params"])
