"""Pair-frequency tables used by the Re-Pair counting step.

Three interchangeable counters share the ``observe`` / ``items`` surface:

* ``ExactCounter``  - plain hash table, true counts.
* ``LossyCounter``  - lossy counting over fixed-length intervals.
* ``FreqCounter``   - frequency counting with a hard table capacity.
"""

from __future__ import annotations

import math
from typing import Dict, Hashable, Iterable, Tuple


class PairCounter:
    mode = "abstract"

    def __init__(self):
        self.table: Dict[Hashable, int] = {}
        self.observed = 0
        self.peak_size = 0

    def observe(self, pair) -> None:
        raise NotImplementedError

    def observe_all(self, pairs: Iterable) -> "PairCounter":
        for p in pairs:
            self.observe(p)
        return self

    def __len__(self):
        return len(self.table)

    def __getitem__(self, pair) -> int:
        return self.table.get(pair, 0)

    def __contains__(self, pair):
        return pair in self.table

    def items(self):
        return self.table.items()

    def as_dict(self) -> dict:
        return dict(self.table)


class ExactCounter(PairCounter):
    mode = "exact"

    def observe(self, pair) -> None:
        t = self.table
        t[pair] = t.get(pair, 0) + 1
        self.observed += 1
        if len(t) > self.peak_size:
            self.peak_size = len(t)

    def __repr__(self):
        return f"ExactCounter(size={len(self)})"


class LossyCounter(PairCounter):
    """Lossy counting with interval length ``interval``.

    A new pair enters with ``delta + 1`` where ``delta = floor(N / interval)``;
    whenever ``floor(N / interval)`` changes, pairs whose count fell below the
    new ``delta`` are evicted.
    """

    mode = "lossy"

    def __init__(self, interval: int):
        super().__init__()
        if interval < 1:
            raise ValueError("lossy interval length must be >= 1")
        self.interval = int(interval)
        self.delta = 0
        self.boundaries = 0
        # min over boundaries of (smallest surviving count - delta); must stay >= 0
        self.min_boundary_slack = math.inf

    @property
    def N(self) -> int:
        return self.observed

    def observe(self, pair) -> None:
        t = self.table
        self.observed += 1
        c = t.get(pair, 0)
        if c:
            t[pair] = c + 1
        else:
            t[pair] = self.delta + 1
        if len(t) > self.peak_size:
            self.peak_size = len(t)
        q = self.observed // self.interval
        if q != self.delta:
            self.delta = q
            self.boundaries += 1
            dead = [k for k, v in t.items() if v < q]
            for k in dead:
                del t[k]
            if t:
                slack = min(t.values()) - q
                if slack < self.min_boundary_slack:
                    self.min_boundary_slack = slack

    def __repr__(self):
        return f"LossyCounter(interval={self.interval}, N={self.N}, size={len(self)})"


class FreqCounter(PairCounter):
    """Frequency counting bounded to ``capacity`` pairs.

    On inserting a new pair into a full table, every count is decremented
    (dropping zeros) until at most ``capacity * (1 - vacancy/100)`` pairs
    remain; the new pair then enters with count 1.
    """

    mode = "freq"

    def __init__(self, capacity: int, vacancy: float):
        super().__init__()
        if capacity < 1:
            raise ValueError("freq capacity must be >= 1")
        if not 0 < vacancy < 100:
            raise ValueError("vacancy rate must lie strictly between 0 and 100")
        self.capacity = int(capacity)
        self.vacancy = float(vacancy)
        self.target = self.capacity * (1.0 - self.vacancy / 100.0)
        self.sweeps = 0

    def observe(self, pair) -> None:
        t = self.table
        self.observed += 1
        c = t.get(pair, 0)
        if c:
            t[pair] = c + 1
            return
        if len(t) >= self.capacity:
            self._shrink()
        t[pair] = 1
        if len(t) > self.peak_size:
            self.peak_size = len(t)

    def _shrink(self) -> None:
        # Equivalent to repeating "decrement every count, drop zeros" while
        # len(table) > target: the number of sweeps needed is the (keep+1)-th
        # largest count, where keep = floor(target).
        t = self.table
        keep = math.floor(self.target)
        counts = sorted(t.values(), reverse=True)
        sweeps = counts[keep] if keep < len(counts) else 0
        if sweeps <= 0:
            return
        self.sweeps += sweeps
        for k in list(t):
            v = t[k] - sweeps
            if v > 0:
                t[k] = v
            else:
                del t[k]

    def __repr__(self):
        return (f"FreqCounter(capacity={self.capacity}, vacancy={self.vacancy}, "
                f"size={len(self)})")


def make_counter(mode: str, *, interval=None, capacity=None, vacancy=None) -> PairCounter:
    if mode == "exact":
        return ExactCounter()
    if mode == "lossy":
        if interval is None:
            raise ValueError("lossy counter needs an interval length")
        return LossyCounter(interval)
    if mode == "freq":
        if capacity is None or vacancy is None:
            raise ValueError("freq counter needs capacity and vacancy")
        return FreqCounter(capacity, vacancy)
    raise ValueError(f"unknown counter mode {mode!r}")


def ranked(counter: PairCounter) -> Iterable[Tuple[tuple, int]]:
    """Pairs by count descending, then lexicographically."""
    return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
