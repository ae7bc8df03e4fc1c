"""Artifact codecs: CSV tables and JSON documents with binary payloads.

CSV files are UTF-8 with LF line endings, one header row, '.' decimal
marks and floats printed with 17 significant digits so write-read
round-trips are bit exact.  JSON artifacts carry a ``schema_version``
field and embed matrices as base64 little-endian float64, row-major.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .errors import ArtifactError, CsvFormatError

SCHEMA_VERSION = "1"


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    """Write rows (iterables of str/float/int) under a header row."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [format_float(c) if isinstance(c, float)
                     else str(c) for c in row]
            if len(cells) != len(header):
                raise CsvFormatError(
                    f"row with {len(cells)} cells under {len(header)} headers")
            fh.write(",".join(cells) + "\n")


def write_matrix_csv(path, header, matrix) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    write_csv(path, header, ([float(v) for v in row] for row in matrix))


def read_csv(path):
    """Read a CSV table; returns (header, rows of str cells).

    Malformed rows raise with the offending 1-based row number.
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing file: {path}")
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CsvFormatError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvFormatError(
                f"{path}: row {lineno} has {len(cells)} cells, "
                f"expected {len(header)}")
        rows.append(cells)
    return header, rows


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    header, rows = read_csv(path)
    out = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError as exc:
                raise CsvFormatError(
                    f"{path}: row {i + 2}, column {j + 1}: "
                    f"not a number: {cell!r}") from exc
    return header, out


def encode_array(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    data = np.ascontiguousarray(arr).astype("<f8", copy=False)
    return {
        "dtype": "<f8",
        "shape": list(arr.shape),
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def decode_array(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(payload["shape"])


def write_json_artifact(path, kind: str, body: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind}
    doc.update(body)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json_artifact(path, kind: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing file: {path}")
    with path.open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ArtifactError(
            f"{path}: schema_version {version!r} does not match "
            f"expected {SCHEMA_VERSION!r}")
    if doc.get("kind") != kind:
        raise ArtifactError(
            f"{path}: artifact kind {doc.get('kind')!r}, expected {kind!r}")
    return doc


def write_binary_matrix(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    Path(path).write_bytes(arr.astype("<f8", copy=False).tobytes())


def read_binary_matrix(path, shape) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing file: {path}")
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    expected = int(np.prod(shape))
    if raw.size != expected:
        raise ArtifactError(
            f"{path}: {raw.size} values do not fill shape {tuple(shape)}")
    return raw.astype(np.float64).reshape(shape)
