"""Grammar-compressed binary matrix with row/column access and products.

Rows and columns are addressed 1-based in the public accessors; dense vectors
passed to or returned from the products are ordinary 0-based numpy arrays.
"""

from __future__ import annotations

import io
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Optional, Sequence, Set

import numpy as np

from .grammar import Grammar, GrammarError
from .ingest import CorruptDataError, FingerprintMatrix, from_gap_sequence

GCMX_MAGIC = b"GCMX1"


class FormatError(ValueError):
    pass


class WeightArray:
    """Sum of terminal gap values under each non-terminal.

    ``P[t] == t`` for a terminal and ``P[z] == P[left] + P[right]`` for a rule
    ``z -> (left, right)``. Storage covers the rules only.
    """

    __slots__ = ("terminal_bound", "values")

    def __init__(self, terminal_bound: int, values):
        self.terminal_bound = terminal_bound
        self.values = np.asarray(values, dtype=np.int64)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, sym: int) -> int:
        if sym <= self.terminal_bound:
            return sym
        return int(self.values[sym - self.terminal_bound - 1])

    def as_dict(self) -> dict:
        base = self.terminal_bound + 1
        return {base + k: int(v) for k, v in enumerate(self.values)}

    def lookup_list(self) -> list:
        """Plain list indexed by symbol id (index 0 unused), for hot loops."""
        return list(range(self.terminal_bound + 1)) + self.values.tolist()


def build_weight_array(grammar: Grammar) -> WeightArray:
    G = grammar.terminal_bound
    P = list(range(G + 1))
    for k, (a, b) in enumerate(zip(grammar.left, grammar.right)):
        z = G + 1 + k
        if not (1 <= a < z and 1 <= b < z):
            raise GrammarError(f"rule {z} -> ({a}, {b}) is cyclic or forward-referencing")
        P.append(P[a] + P[b])
    return WeightArray(G, P[G + 1:])


def _expanded_lengths(grammar: Grammar) -> list:
    G = grammar.terminal_bound
    L = [1] * (G + 1)
    for a, b in zip(grammar.left, grammar.right):
        L.append(L[a] + L[b])
    return L


class CompressedMatrix:
    """Binary ``n x d`` matrix stored as a grammar plus compressed gap rows.

    Parameters
    ----------
    grammar : Grammar
        Rule dictionary shared by all rows.
    sequences : sequence of sequences of int
        Compressed gap sequence for each row.
    n, d : int
        Matrix shape.
    cache_size : int, default 0
        Capacity of an LRU cache of expanded non-terminals. 0 disables it.
    """

    def __init__(self, grammar: Grammar, sequences, n: int, d: int, cache_size: int = 0):
        if len(sequences) != n:
            raise ValueError(f"{len(sequences)} sequences for n={n}")
        self.grammar = grammar
        self.sequences: List[tuple] = [tuple(s) for s in sequences]
        self.n = int(n)
        self.d = int(d)
        self.cache_size = int(cache_size)
        self._cache: "OrderedDict[int, list]" = OrderedDict()
        self._P: Optional[list] = None

    @property
    def shape(self):
        return (self.n, self.d)

    @property
    def weights(self) -> WeightArray:
        return build_weight_array(self.grammar)

    def _weights(self) -> list:
        if self._P is None:
            self._P = build_weight_array(self.grammar).lookup_list()
        return self._P

    def __eq__(self, other):
        if not isinstance(other, CompressedMatrix):
            return NotImplemented
        return (self.n == other.n and self.d == other.d
                and self.grammar == other.grammar and self.sequences == other.sequences)

    def __repr__(self):
        return (f"CompressedMatrix(n={self.n}, d={self.d}, rules={len(self.grammar)}, "
                f"symbols={self.compressed_length})")

    @property
    def compressed_length(self) -> int:
        return sum(len(s) for s in self.sequences)

    # -- row access -------------------------------------------------------

    def _expand_symbol(self, sym: int) -> list:
        if self.cache_size <= 0:
            return self.grammar.expand(sym)
        cache = self._cache
        hit = cache.get(sym)
        if hit is not None:
            cache.move_to_end(sym)
            return hit
        out = self.grammar.expand(sym)
        cache[sym] = out
        if len(cache) > self.cache_size:
            cache.popitem(last=False)
        return out

    def row_gaps(self, idx: int) -> list:
        """Uncompressed gap sequence of row ``idx`` (0-based)."""
        seq = self.sequences[idx]
        if self.cache_size <= 0:
            return self.grammar.expand_sequence(seq)
        G = self.grammar.terminal_bound
        out = []
        for s in seq:
            if s <= G:
                out.append(s)
            else:
                out.extend(self._expand_symbol(s))
        return out

    def row_positions(self, idx: int) -> np.ndarray:
        """1-based column positions of row ``idx`` (0-based) as an int64 array."""
        return np.cumsum(np.asarray(self.row_gaps(idx), dtype=np.int64))

    def access_row(self, i: int) -> tuple:
        """Recover row ``i`` (1-based) as its sorted tuple of 1-based positions."""
        if not 1 <= i <= self.n:
            raise IndexError(f"row {i} out of range 1..{self.n}")
        return from_gap_sequence(self.row_gaps(i - 1), self.d)

    def iter_rows(self):
        for idx in range(self.n):
            yield from_gap_sequence(self.row_gaps(idx), self.d)

    def decompress(self) -> FingerprintMatrix:
        return FingerprintMatrix(list(self.iter_rows()), self.d)

    # -- column access ----------------------------------------------------

    def _row_has(self, seq, j: int, P: list, G: int) -> bool:
        left, right = self.grammar.left, self.grammar.right
        u = 0
        for s in seq:
            w = P[s]
            if j <= u + w:
                while s > G:
                    k = s - G - 1
                    a = left[k]
                    pa = P[a]
                    if j <= u + pa:
                        s = a
                    else:
                        u += pa
                        s = right[k]
                return u + s == j
            u += w
        return False

    def access_column(self, j: int) -> Set[int]:
        """1-based ids of the rows with a 1 in column ``j`` (1-based).

        Each row walks its compressed symbols accumulating weight-array sums
        until the running total reaches ``j``, then descends that symbol's
        grammar tree to the single leaf that can land on ``j``.
        """
        if not 1 <= j <= self.d:
            raise IndexError(f"column {j} out of range 1..{self.d}")
        P = self._weights()
        G = self.grammar.terminal_bound
        has = self._row_has
        return {i + 1 for i, seq in enumerate(self.sequences) if has(seq, j, P, G)}

    # -- products -----------------------------------------------------------

    def matvec(self, w) -> np.ndarray:
        """``X @ w`` for a dense vector of length d."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.d,):
            raise ValueError(f"matvec: expected vector of length {self.d}, got shape {w.shape}")
        out = np.zeros(self.n)
        for idx in range(self.n):
            pos = self.row_positions(idx)
            if len(pos):
                out[idx] = w[pos - 1].sum()
        return out

    def tmatvec(self, r, strategy: str = "row-scan") -> np.ndarray:
        """``X.T @ r`` for a dense vector of length n.

        ``row-scan`` expands each row once and scatters ``r[i]``; ``column-scan``
        probes every column with :meth:`access_column`.
        """
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (self.n,):
            raise ValueError(f"tmatvec: expected vector of length {self.n}, got shape {r.shape}")
        out = np.zeros(self.d)
        if strategy == "row-scan":
            for idx in range(self.n):
                ri = r[idx]
                if ri == 0.0:
                    continue
                pos = self.row_positions(idx)
                # positions within a row are distinct, so fancy-index += is safe
                out[pos - 1] += ri
        elif strategy == "column-scan":
            for j in range(1, self.d + 1):
                rows = self.access_column(j)
                if rows:
                    out[j - 1] = r[np.fromiter(rows, dtype=np.int64, count=len(rows)) - 1].sum()
        else:
            raise ValueError(f"unknown tmatvec strategy {strategy!r}")
        return out

    def row_nnz(self) -> np.ndarray:
        L = _expanded_lengths(self.grammar)
        return np.array([sum(L[s] for s in seq) for seq in self.sequences], dtype=np.int64)

    # -- reporting ----------------------------------------------------------

    def stats(self) -> "MatrixStats":
        nnz = int(self.row_nnz().sum())
        rules = len(self.grammar)
        symbols = self.compressed_length
        return MatrixStats(n=self.n, d=self.d, nnz=nnz, rules=rules,
                           compressed_symbols=symbols,
                           raw_bytes=4 * nnz, grammar_bytes=4 * (2 * rules + symbols))

    def validate(self) -> None:
        """Raise if any row leaves the grammar or decodes outside ``1..d``."""
        self.grammar.check()
        top = self.grammar.num_symbols
        for idx, seq in enumerate(self.sequences):
            for s in seq:
                if not 1 <= s <= top:
                    raise CorruptDataError(f"row {idx + 1}: symbol {s} not in grammar")
            try:
                from_gap_sequence(self.row_gaps(idx), self.d)
            except CorruptDataError as exc:
                raise CorruptDataError(f"row {idx + 1}: {exc}") from None


@dataclass(frozen=True)
class MatrixStats:
    n: int
    d: int
    nnz: int
    rules: int
    compressed_symbols: int
    raw_bytes: int
    grammar_bytes: int

    @property
    def ratio(self) -> float:
        """Grammar size over raw 32-bit-per-position size."""
        return self.grammar_bytes / self.raw_bytes if self.raw_bytes else 0.0

    def report(self) -> str:
        lines = [
            f"rows: {self.n}  columns: {self.d}  nonzeros: {self.nnz}",
            f"rules: {self.rules}  compressed symbols: {self.compressed_symbols}",
            f"raw 32-bit positions: {self.raw_bytes} bytes; "
            f"grammar: {self.grammar_bytes} bytes ({100 * self.ratio:.2f}%)",
        ]
        lines += [f"{k}={v}" for k, v in self.as_pairs()]
        return "\n".join(lines)

    def as_pairs(self):
        return [("n", self.n), ("d", self.d), ("nnz", self.nnz), ("rules", self.rules),
                ("compressed_symbols", self.compressed_symbols),
                ("raw_bytes", self.raw_bytes), ("grammar_bytes", self.grammar_bytes),
                ("ratio", f"{self.ratio:.6f}")]


# -- GCMX1 serialization ---------------------------------------------------
#
# magic "GCMX1"
# n, d, G (terminal bound), rule count        4 x uint64 LE
# rules: (left, right)                        2 x uint32 LE each, creation order
# per row: length (uint64 LE), symbol ids     uint32 LE each

_U64 = struct.Struct("<Q")
_HEADER = struct.Struct("<QQQQ")
_U32_MAX = 2 ** 32 - 1


def dumps_gcmx(cm: CompressedMatrix) -> bytes:
    g = cm.grammar
    if g.num_symbols > _U32_MAX:
        raise FormatError("symbol ids exceed 32 bits")
    buf = io.BytesIO()
    buf.write(GCMX_MAGIC)
    buf.write(_HEADER.pack(cm.n, cm.d, g.terminal_bound, len(g)))
    rules = np.empty(2 * len(g), dtype="<u4")
    rules[0::2] = g.left
    rules[1::2] = g.right
    buf.write(rules.tobytes())
    for seq in cm.sequences:
        buf.write(_U64.pack(len(seq)))
        buf.write(np.asarray(seq, dtype="<u4").tobytes())
    return buf.getvalue()


def loads_gcmx(data: bytes, validate: bool = True) -> CompressedMatrix:
    view = memoryview(data)
    if bytes(view[:5]) != GCMX_MAGIC:
        raise FormatError("not a GCMX1 file (bad magic)")
    off = 5
    try:
        n, d, G, R = _HEADER.unpack_from(view, off)
        off += _HEADER.size
        rules = np.frombuffer(view, dtype="<u4", count=2 * R, offset=off)
        off += 8 * R
        grammar = Grammar(G)
        grammar.left = rules[0::2].astype(np.int64).tolist()
        grammar.right = rules[1::2].astype(np.int64).tolist()
        seqs = []
        for _ in range(n):
            (length,) = _U64.unpack_from(view, off)
            off += 8
            seqs.append(tuple(np.frombuffer(view, dtype="<u4", count=length,
                                            offset=off).tolist()))
            off += 4 * length
    except (struct.error, ValueError) as exc:
        raise FormatError(f"truncated GCMX1 data: {exc}") from None
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after GCMX1 payload")
    cm = CompressedMatrix(grammar, seqs, n, d)
    if validate:
        try:
            cm.validate()
        except (GrammarError, CorruptDataError) as exc:
            raise FormatError(f"corrupt GCMX1 payload: {exc}") from None
    return cm


def save_gcmx(path, cm: CompressedMatrix) -> None:
    atomic_write_bytes(path, dumps_gcmx(cm))


def load_gcmx(path, validate: bool = True) -> CompressedMatrix:
    with open(path, "rb") as fh:
        return loads_gcmx(fh.read(), validate=validate)


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
