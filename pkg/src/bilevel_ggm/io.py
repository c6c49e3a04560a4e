"""CSV and JSON interchange for matrices, edge lists and reports.

Matrices are written with a ``v1..vp`` header and 17 significant digits, so
a write/read round trip reproduces every float exactly.
"""
import json
import re
import warnings
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput
from .simgen import EdgeSet

FLOAT_FMT = "%.17g"


def write_matrix(path, M):
    M = np.asarray(M, dtype=float)
    header = ",".join(f"v{j + 1}" for j in range(M.shape[1]))
    np.savetxt(path, M, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


def read_matrix(path):
    """Read a headed CSV matrix; raises on ragged rows or non-finite values."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        try:
            M = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DimensionMismatch(f"{path}: {exc}") from exc
    if M.size == 0:
        M = M.reshape(0, len(header))
    if M.shape[1] != len(header):
        raise DimensionMismatch(f"{path}: {M.shape[1]} columns but {len(header)} headers")
    if not np.all(np.isfinite(M)):
        raise NonFiniteInput(f"{path} contains NaN or Inf")
    return M


def write_edges(path, edges):
    with open(path, "w") as fh:
        fh.write("j,jp\n")
        for a, b in edges.sorted_edges():
            fh.write(f"{a},{b}\n")


def read_edges(path, p):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # an empty edge list is valid
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=int)
    return EdgeSet(p, frozenset(map(tuple, rows.reshape(-1, 2).tolist())))


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def indexed_files(directory, pattern):
    """Files matching ``pattern`` (a regex with one integer group), ordered
    by that integer."""
    rx = re.compile(pattern)
    found = []
    for f in Path(directory).iterdir():
        m = rx.fullmatch(f.name)
        if m:
            found.append((int(m.group(1)), f))
    return [f for _, f in sorted(found)]
