"""Plain-text file formats used by the command line.

Matrix files are CSV with an ``m,n`` header line followed by ``m`` rows of
``n`` values; ``NA`` marks an unobserved entry. Ground-truth labels live in a
sidecar ``<stem>.labels.csv`` with one ``z_R,...`` and one ``z_C,...`` line.
Numbers are written with ``repr`` so a round trip is lossless and never
depends on the locale.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .matrix import DataMatrix

MISSING = "NA"


class FormatError(OSError):
    """A file exists but its contents do not parse; carries the line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _num(x) -> str:
    return repr(float(x))


def write_matrix(path, A: DataMatrix) -> None:
    m, n = A.shape
    lines = [f"{m},{n}"]
    for i in range(m):
        row = A.values[i]
        lines.append(",".join(MISSING if np.isnan(x) else _num(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_float(token, path, line):
    token = token.strip()
    if token == MISSING:
        return np.nan
    try:
        value = float(token)
    except ValueError:
        raise FormatError(path, line, f"not a number: {token!r}") from None
    if not np.isfinite(value):
        raise FormatError(path, line, f"non-finite value {token!r}")
    return value


def read_matrix(path) -> DataMatrix:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(path, 1, "empty file")
    head = lines[0].split(",")
    try:
        m, n = (int(t) for t in head)
    except ValueError:
        raise FormatError(path, 1, "header must be 'm,n'") from None
    if m < 1 or n < 1:
        raise FormatError(path, 1, "dimensions must be positive")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != m:
        raise FormatError(path, len(lines), f"expected {m} data rows, found {len(body)}")
    values = np.empty((m, n))
    for i, ln in enumerate(body):
        tokens = ln.split(",")
        if len(tokens) != n:
            raise FormatError(path, i + 2, f"expected {n} values, found {len(tokens)}")
        values[i] = [_parse_float(t, path, i + 2) for t in tokens]
    mask = ~np.isnan(values)
    try:
        return DataMatrix(values, None if mask.all() else mask)
    except ValueError as exc:
        raise FormatError(path, 1, str(exc)) from None


def labels_path(matrix_path) -> Path:
    p = Path(matrix_path)
    return p.with_name(p.name[: -len(p.suffix)] + ".labels.csv" if p.suffix else p.name + ".labels.csv")


def write_labels(path, z_R, z_C=None) -> None:
    lines = ["z_R," + ",".join(str(int(z)) for z in z_R)]
    if z_C is not None:
        lines.append("z_C," + ",".join(str(int(z)) for z in z_C))
    Path(path).write_text("\n".join(lines) + "\n")


def read_labels(path) -> tuple:
    """Return ``(z_R, z_C)``; ``z_C`` is None when the file has no column line."""
    found = {}
    for lineno, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        if not ln.strip():
            continue
        key, _, rest = ln.partition(",")
        key = key.strip()
        if key not in ("z_R", "z_C"):
            raise FormatError(path, lineno, f"expected a 'z_R' or 'z_C' line, got {key!r}")
        try:
            found[key] = np.array([int(t) for t in rest.split(",") if t.strip()], dtype=int)
        except ValueError:
            raise FormatError(path, lineno, "labels must be integers") from None
    if "z_R" not in found:
        raise FormatError(path, 1, "missing z_R line")
    return found["z_R"], found.get("z_C")


def write_vector(path, values) -> None:
    """Two-column ``index value`` lines with a 1-based index."""
    lines = [f"{i} {_num(x)}" for i, x in enumerate(np.asarray(values, dtype=float), start=1)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vector(path) -> np.ndarray:
    out = []
    for lineno, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise FormatError(path, lineno, "expected 'index value'")
        out.append(_parse_float(parts[1], path, lineno))
    return np.array(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def read_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, exc.msg) from None
