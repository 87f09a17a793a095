"""Serialization for the sampling structures and dataset files.

Binary format: magic bytes (``SQT1`` for vectors, ``SQM1`` for matrices),
little-endian u64 dimensions, then the signed f64 payload. Trees are rebuilt
on load, so only the raw entries travel.

Matrices are also ingested from row-major CSV (optional header) with a JSON
manifest carrying dimensions and provenance.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .ledger import CostLedger
from .matrix_sq import MatrixSQ
from .weight_tree import WeightTree

VECTOR_MAGIC = b"SQT1"
MATRIX_MAGIC = b"SQM1"


def save_vector(tree: WeightTree, path) -> None:
    with open(path, "wb") as f:
        f.write(VECTOR_MAGIC)
        f.write(struct.pack("<Q", tree.n))
        f.write(tree.to_array().astype("<f8").tobytes())


def load_vector(path, ledger: CostLedger | None = None) -> WeightTree:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != VECTOR_MAGIC:
            raise InvalidInput(f"bad magic {magic!r}, expected {VECTOR_MAGIC!r}")
        (n,) = struct.unpack("<Q", f.read(8))
        values = np.frombuffer(f.read(8 * n), dtype="<f8")
        if values.size != n:
            raise InvalidInput("truncated vector payload")
    return WeightTree(values, ledger=ledger)


def save_matrix(mat: MatrixSQ, path) -> None:
    with open(path, "wb") as f:
        f.write(MATRIX_MAGIC)
        f.write(struct.pack("<QQ", mat.n, mat.d))
        f.write(mat.to_array().astype("<f8").tobytes())


def load_matrix(path, ledger: CostLedger | None = None) -> MatrixSQ:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MATRIX_MAGIC:
            raise InvalidInput(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
        n, d = struct.unpack("<QQ", f.read(16))
        values = np.frombuffer(f.read(8 * n * d), dtype="<f8")
        if values.size != n * d:
            raise InvalidInput("truncated matrix payload")
    return MatrixSQ(values.reshape(n, d), ledger=ledger)


def load_csv(path, header: bool | None = None) -> np.ndarray:
    """Row-major CSV. If header is None, the first line is sniffed."""
    path = Path(path)
    with open(path) as f:
        first = f.readline()
    if header is None:
        tokens = first.strip().split(",")
        header = False
        for tok in tokens:
            try:
                float(tok)
            except ValueError:
                header = True
                break
    data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return data


def save_csv(array: np.ndarray, path, header: list[str] | None = None) -> None:
    array = np.atleast_2d(np.asarray(array, dtype=np.float64))
    hdr = ",".join(header) if header else ""
    np.savetxt(path, array, delimiter=",", header=hdr, comments="", fmt="%.17g")


def write_manifest(path, n: int, d: int, provenance: dict) -> None:
    payload = {"n": int(n), "d": int(d), "provenance": provenance}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path) -> dict:
    with open(path) as f:
        return json.load(f)
