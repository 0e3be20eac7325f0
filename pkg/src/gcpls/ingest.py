"""Sparse labeled text files, fingerprint rows and gap (differential) encoding.

Column indices are 1-based everywhere in this module.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed sparse input; ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: Optional[int] = None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class CorruptDataError(ValueError):
    pass


@dataclass(frozen=True)
class ResponseVector:
    """Responses ``y``; ``mean`` is the constant already subtracted from ``values``."""

    values: np.ndarray
    mean: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self):
        return len(self.values)

    def centered(self) -> "ResponseVector":
        """Return a copy whose values sum to zero; ``mean`` accumulates the shift."""
        shift = float(self.values.mean()) if len(self.values) else 0.0
        return ResponseVector(self.values - shift, self.mean + shift)

    def original(self) -> np.ndarray:
        return self.values + self.mean


@dataclass
class FingerprintMatrix:
    rows: list
    dim: int
    labels: Optional[ResponseVector] = None
    # set when 0/1 classification labels were rewritten to -1/+1
    remapped_labels: bool = field(default=False, compare=False)

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            validate_row(row, self.dim, context=f"row {i + 1}")
        if self.labels is not None and len(self.labels) != len(self.rows):
            raise ValueError(
                f"{len(self.labels)} labels for {len(self.rows)} rows")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        X = np.zeros((self.n, self.dim), dtype=dtype)
        for i, row in enumerate(self.rows):
            if row:
                X[i, np.asarray(row) - 1] = 1
        return X

    @classmethod
    def from_dense(cls, X, labels=None) -> "FingerprintMatrix":
        X = np.asarray(X)
        rows = [tuple(int(j) + 1 for j in np.flatnonzero(r)) for r in X]
        if labels is not None and not isinstance(labels, ResponseVector):
            labels = ResponseVector(labels)
        return cls(rows, X.shape[1], labels)


def validate_row(row: Sequence[int], dim: int, context: str = "row") -> None:
    prev = 0
    for p in row:
        if p <= prev:
            raise ValueError(f"{context}: positions not strictly increasing at {p}")
        prev = p
    if prev > dim:
        raise ValueError(f"{context}: position {prev} exceeds dimension {dim}")


def to_gap_sequence(row: Sequence[int]) -> list:
    """``(p1, p2, ..., pm)`` -> ``(p1, p2 - p1, ..., pm - p(m-1))``."""
    gaps = []
    prev = 0
    for p in row:
        gaps.append(p - prev)
        prev = p
    return gaps


def from_gap_sequence(gaps: Iterable[int], dim: Optional[int] = None) -> tuple:
    """Prefix-sum a gap sequence back into positions.

    Raises CorruptDataError on a non-positive gap or, when ``dim`` is given,
    a prefix sum beyond it.
    """
    out = []
    acc = 0
    for g in gaps:
        if g < 1:
            raise CorruptDataError(f"non-positive gap {g}")
        acc += g
        out.append(acc)
    if dim is not None and acc > dim:
        raise CorruptDataError(f"position {acc} exceeds dimension {dim}")
    return tuple(out)


def parse_sparse_lines(lines: Iterable[str], expected_dim: Optional[int] = None,
                       *, classification: bool = False, path=None) -> FingerprintMatrix:
    rows = []
    labels = []
    max_idx = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        try:
            label = float(fields[0])
        except ValueError:
            raise ParseError(f"bad label {fields[0]!r}", lineno, path) from None
        if not np.isfinite(label):
            raise ParseError(f"non-finite label {fields[0]!r}", lineno, path)
        row = []
        prev = 0
        for tok in fields[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno, path)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno, path) from None
            if val != 1:
                raise ParseError(f"value {val_s!r} at index {idx} is not 1", lineno, path)
            if idx < 1:
                raise ParseError(f"index {idx} is not 1-based", lineno, path)
            if idx == prev:
                raise ParseError(f"duplicate index {idx}", lineno, path)
            if idx < prev:
                raise ParseError(f"index {idx} out of ascending order", lineno, path)
            if expected_dim is not None and idx > expected_dim:
                raise ParseError(
                    f"index {idx} exceeds expected dimension {expected_dim}", lineno, path)
            row.append(idx)
            prev = idx
        max_idx = max(max_idx, prev)
        rows.append(tuple(row))
        labels.append(label)

    dim = expected_dim if expected_dim is not None else max_idx
    y = np.asarray(labels, dtype=np.float64)
    remapped = False
    if classification and len(y):
        seen = set(np.unique(y).tolist())
        if seen <= {0.0, 1.0} and 0.0 in seen:
            y = np.where(y > 0, 1.0, -1.0)
            remapped = True
            log.warning("%s: remapped {0,1} labels to {-1,+1}", path or "input")
        elif not seen <= {-1.0, 1.0}:
            raise ParseError(f"classification labels must be in {{-1,+1}} or {{0,1}}, "
                             f"got {sorted(seen)[:5]}", None, path)
    return FingerprintMatrix(rows, dim, ResponseVector(y), remapped_labels=remapped)


def parse_sparse_file(path, expected_dim: Optional[int] = None,
                      *, classification: bool = False) -> FingerprintMatrix:
    """Read ``<label> <idx>:1 <idx>:1 ...`` lines (ascending, 1-based idx).

    ``dim`` is ``expected_dim`` when given, otherwise the largest index seen.
    Labels are returned uncentered. With ``classification=True`` a file whose
    labels are all 0/1 is remapped to -1/+1.
    """
    with open(path, "r", encoding="utf-8") as fh:
        return parse_sparse_lines(fh, expected_dim, classification=classification,
                                  path=os.fspath(path))


def format_sparse_line(label: float, row: Sequence[int]) -> str:
    lab = repr(float(label))
    if lab.endswith(".0"):
        lab = lab[:-2]
    return " ".join([lab] + [f"{p}:1" for p in row])


def write_sparse_file(path, matrix: FingerprintMatrix) -> None:
    labels = matrix.labels.original() if matrix.labels is not None else np.zeros(matrix.n)
    with open(path, "w", encoding="utf-8") as fh:
        for lab, row in zip(labels, matrix.rows):
            fh.write(format_sparse_line(lab, row) + "\n")
