"""File formats: MatrixMarket coordinate adjacency, label lists, edge lists."""
from __future__ import annotations

import re

import numpy as np

from .types import BiAdjacency, Membership

MM_HEADER = "%%MatrixMarket matrix coordinate integer general"
MM_REAL_HEADER = "%%MatrixMarket matrix coordinate real general"


class FormatError(ValueError):
    """Malformed input; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def write_matrix_market(path, a):
    x = a.entries if isinstance(a, BiAdjacency) else np.asarray(a, dtype=float)
    rows, cols = np.nonzero(x)
    vals = x[rows, cols]
    integral = bool(np.all(vals == np.round(vals)))
    with open(path, "w") as fh:
        fh.write((MM_HEADER if integral else MM_REAL_HEADER) + "\n")
        fh.write(f"{x.shape[0]} {x.shape[1]} {rows.size}\n")
        for i, j, v in zip(rows, cols, vals):
            val = str(int(v)) if integral else repr(float(v))
            fh.write(f"{i + 1} {j + 1} {val}\n")


def read_matrix_market(path) -> BiAdjacency:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket matrix coordinate"):
        raise FormatError("missing MatrixMarket coordinate header", 1)
    header = lines[0].lower().split()
    if len(header) < 5 or header[3] not in ("integer", "real", "pattern"):
        raise FormatError("unsupported MatrixMarket field", 1)
    pattern = header[3] == "pattern"
    pos = 1
    while pos < len(lines) and (not lines[pos].strip() or lines[pos].startswith("%")):
        pos += 1
    if pos >= len(lines):
        raise FormatError("missing size line")
    try:
        n1, n2, nnz = (int(t) for t in lines[pos].split())
    except ValueError:
        raise FormatError("bad size line", pos + 1) from None
    x = np.zeros((n1, n2))
    count = 0
    for ln in range(pos + 1, len(lines)):
        text = lines[ln].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        want = 2 if pattern else 3
        if len(parts) != want:
            raise FormatError(f"expected {want} fields, got {len(parts)}", ln + 1)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = 1.0 if pattern else float(parts[2])
        except ValueError:
            raise FormatError("non-numeric entry", ln + 1) from None
        if not (1 <= i <= n1 and 1 <= j <= n2):
            raise FormatError(f"index ({i}, {j}) out of range", ln + 1)
        x[i - 1, j - 1] = v
        count += 1
    if count != nnz:
        raise FormatError(f"header declares {nnz} entries, found {count}")
    return BiAdjacency(x)


def write_labels(path, m: Membership):
    with open(path, "w") as fh:
        fh.write(m.to_text())


def read_labels(path, k=None) -> Membership:
    with open(path) as fh:
        text = fh.read()
    for ln, line in enumerate(text.splitlines(), start=1):
        if line.strip() and not re.fullmatch(r"\s*\d+\s*", line):
            raise FormatError("label must be a positive integer", ln)
    return Membership.from_text(text, k)


_SPLIT = re.compile(r"[,\s]+")


def parse_edge_list(text, one_based=True, shape=None) -> BiAdjacency:
    """Edges as "row col [weight]" lines, whitespace or comma separated.

    Duplicate edges collapse to a single 1; weights only need to be
    positive numbers (zero-weight lines are dropped). Lines starting with
    '#' or '%' are comments.
    """
    offset = 1 if one_based else 0
    edges = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        if len(parts) not in (2, 3):
            raise FormatError(f"expected 'row col [weight]', got {len(parts)} fields", ln)
        try:
            i, j = int(parts[0]) - offset, int(parts[1]) - offset
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise FormatError("non-numeric field", ln) from None
        if i < 0 or j < 0:
            raise FormatError("negative index", ln)
        if w < 0:
            raise FormatError("negative weight", ln)
        if w > 0:
            edges.append((i, j, ln))
    rmax = max((e[0] for e in edges), default=-1) + 1
    cmax = max((e[1] for e in edges), default=-1) + 1
    if shape is None:
        shape = (rmax, cmax)
    n1, n2 = shape
    x = np.zeros((n1, n2))
    for i, j, ln in edges:
        if i >= n1 or j >= n2:
            raise FormatError(f"index ({i + offset}, {j + offset}) outside {n1}x{n2}", ln)
        x[i, j] = 1.0
    return BiAdjacency(x)


def read_edge_list(path, one_based=True, shape=None) -> BiAdjacency:
    with open(path) as fh:
        return parse_edge_list(fh.read(), one_based, shape)
