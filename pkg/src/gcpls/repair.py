"""Top-k batch Re-Pair over a corpus of gap sequences."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from .counters import PairCounter, make_counter
from .grammar import Grammar
from .ingest import FingerprintMatrix, to_gap_sequence

log = logging.getLogger(__name__)

MIN_PAIR_FREQ = 2
COUNTER_MODES = ("exact", "lossy", "freq")


@dataclass(frozen=True)
class CompressorConfig:
    k: int = 1024
    counter: str = "exact"
    interval: Optional[int] = None   # lossy: interval length
    capacity: Optional[int] = None   # freq: max table size
    vacancy: float = 30.0            # freq: percent of the table freed per sweep

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("top-k batch size must be >= 1")
        if self.counter not in COUNTER_MODES:
            raise ValueError(f"counter must be one of {COUNTER_MODES}, got {self.counter!r}")
        if self.counter == "lossy" and (self.interval is None or self.interval < 1):
            raise ValueError("lossy counter needs interval >= 1")
        if self.counter == "freq":
            if self.capacity is None or self.capacity < 1:
                raise ValueError("freq counter needs capacity >= 1")
            if not 0 < self.vacancy < 100:
                raise ValueError("vacancy must satisfy 0 < vacancy < 100")

    @property
    def min_pair_freq(self) -> int:
        return MIN_PAIR_FREQ

    def make_counter(self) -> PairCounter:
        return make_counter(self.counter, interval=self.interval,
                            capacity=self.capacity, vacancy=self.vacancy)


def iter_pairs(rows: Sequence[Sequence[int]]):
    """Adjacent pairs row by row, left to right, never across rows.

    Runs of one symbol are taken non-overlapping: ``aaa`` yields one ``aa``.
    """
    for row in rows:
        run_open = False
        for i in range(len(row) - 1):
            a = row[i]
            b = row[i + 1]
            if a == b:
                if run_open:
                    run_open = False
                    continue
                run_open = True
            else:
                run_open = False
            yield (a, b)


def count_pairs(rows: Sequence[Sequence[int]], counter: PairCounter) -> PairCounter:
    observe = counter.observe
    for pair in iter_pairs(rows):
        observe(pair)
    return counter


def select_topk(counter: PairCounter, k: int) -> List[Tuple[int, int]]:
    """Up to ``k`` pairs with count >= 2; count descending, ties lexicographic."""
    cands = [(-c, p) for p, c in counter.items() if c >= MIN_PAIR_FREQ]
    cands.sort()
    return [p for _, p in cands[:k]]


def replace_pairs(rows: Sequence[Sequence[int]], selected: Sequence[Tuple[int, int]],
                  grammar: Grammar) -> Tuple[List[tuple], Grammar]:
    """Rewrite every selected pair that occurs at least twice.

    Each row is scanned once left to right; a selected pair starting at the
    current position is matched and the scan skips past it, so in ``abc`` with
    ``ab`` and ``bc`` both selected only ``ab`` is taken. A pair matched only
    once is left in place and gets no rule. New rule ids follow the order of
    ``selected``. ``grammar`` is extended in place and returned.
    """
    if not selected:
        return [tuple(r) for r in rows], grammar
    priority = {p: i for i, p in enumerate(selected)}
    hits = [0] * len(selected)
    matches = []
    get = priority.get
    for row in rows:
        found = []
        i = 0
        end = len(row) - 1
        while i < end:
            pr = get((row[i], row[i + 1]))
            if pr is None:
                i += 1
            else:
                found.append((i, pr))
                hits[pr] += 1
                i += 2
        matches.append(found)

    new_id = {}
    for pr, pair in enumerate(selected):
        if hits[pr] >= MIN_PAIR_FREQ:
            new_id[pr] = grammar.add_rule(*pair)
    if not new_id:
        return [tuple(r) for r in rows], grammar

    out = []
    for row, found in zip(rows, matches):
        if not found:
            out.append(tuple(row))
            continue
        buf = []
        last = 0
        for pos, pr in found:
            z = new_id.get(pr)
            if z is None:
                continue
            buf.extend(row[last:pos])
            buf.append(z)
            last = pos + 2
        buf.extend(row[last:])
        out.append(tuple(buf))
    return out, grammar


def compress_sequences(seqs: Sequence[Sequence[int]], config: CompressorConfig,
                       terminal_bound: Optional[int] = None,
                       observer: Optional[Callable[[int, PairCounter], None]] = None
                       ) -> Tuple[Grammar, List[tuple]]:
    """Run count -> select -> replace until no selected pair repeats.

    ``observer(iteration, counter)`` is called after every counting pass.
    """
    rows = [tuple(s) for s in seqs]
    if terminal_bound is None:
        terminal_bound = max((max(r) for r in rows if r), default=0)
    grammar = Grammar(terminal_bound)
    it = 0
    while True:
        counter = count_pairs(rows, config.make_counter())
        if observer is not None:
            observer(it, counter)
        selected = select_topk(counter, config.k)
        if not selected:
            break
        before = len(grammar)
        rows, grammar = replace_pairs(rows, selected, grammar)
        if len(grammar) == before and len(selected) > 1:
            # every batch pair was blocked by an earlier match; fall back to
            # the single best pair, which cannot be blocked when counts are exact
            rows, grammar = replace_pairs(rows, selected[:1], grammar)
        if len(grammar) == before:
            # only reachable with approximate counts that overstate a pair
            log.debug("iteration %d: no selected pair repeats; stopping", it)
            break
        log.debug("iteration %d: %d rules total, corpus length %d",
                  it, len(grammar), sum(map(len, rows)))
        it += 1
    return grammar, rows


def compress(matrix: FingerprintMatrix, config: CompressorConfig = CompressorConfig(),
             observer=None):
    """Grammar-compress the gap-encoded rows of ``matrix``."""
    from .cmatrix import CompressedMatrix

    gaps = [to_gap_sequence(r) for r in matrix.rows]
    grammar, seqs = compress_sequences(gaps, config, observer=observer)
    return CompressedMatrix(grammar, seqs, matrix.n, matrix.dim)
