"""Straight-line grammar in Chomsky normal form.

Terminals are the integers ``1..terminal_bound``; rule ``k`` (0-based creation
order) defines the non-terminal ``terminal_bound + 1 + k``.
"""

from __future__ import annotations

from typing import List, Tuple


class GrammarError(ValueError):
    pass


class Grammar:
    """Dictionary of rules ``Z -> (left, right)``."""

    __slots__ = ("terminal_bound", "left", "right")

    def __init__(self, terminal_bound: int, rules=()):
        if terminal_bound < 0:
            raise GrammarError("terminal_bound must be non-negative")
        self.terminal_bound = int(terminal_bound)
        self.left: List[int] = []
        self.right: List[int] = []
        for a, b in rules:
            self.add_rule(a, b)

    def __len__(self):
        return len(self.left)

    def __eq__(self, other):
        if not isinstance(other, Grammar):
            return NotImplemented
        return (self.terminal_bound == other.terminal_bound
                and self.left == other.left and self.right == other.right)

    def __repr__(self):
        return f"Grammar(terminal_bound={self.terminal_bound}, rules={len(self)})"

    @property
    def next_id(self) -> int:
        return self.terminal_bound + 1 + len(self.left)

    @property
    def num_symbols(self) -> int:
        """Number of distinct symbol ids (terminals plus non-terminals)."""
        return self.terminal_bound + len(self.left)

    @property
    def rules(self) -> List[Tuple[int, int, int]]:
        """``(id, left, right)`` triples in creation order."""
        base = self.terminal_bound + 1
        return [(base + k, a, b) for k, (a, b) in enumerate(zip(self.left, self.right))]

    def is_terminal(self, sym: int) -> bool:
        return 1 <= sym <= self.terminal_bound

    def add_rule(self, a: int, b: int) -> int:
        nxt = self.next_id
        for s in (a, b):
            if not 1 <= s < nxt:
                raise GrammarError(f"rule {nxt} refers to undefined symbol {s}")
        self.left.append(int(a))
        self.right.append(int(b))
        return nxt

    def __getitem__(self, z: int) -> Tuple[int, int]:
        k = z - self.terminal_bound - 1
        if k < 0 or k >= len(self.left):
            raise KeyError(z)
        return self.left[k], self.right[k]

    def check(self) -> None:
        """Raise GrammarError unless every rule refers only to earlier symbols."""
        base = self.terminal_bound + 1
        for k, (a, b) in enumerate(zip(self.left, self.right)):
            z = base + k
            for s in (a, b):
                if not 1 <= s < z:
                    raise GrammarError(
                        f"rule {z} -> ({a}, {b}) references symbol {s} "
                        f"that is not defined before it (cycle or forward reference)")

    def expand(self, sym: int) -> List[int]:
        """Terminal string derived from ``sym``; iterative, no recursion limit."""
        G = self.terminal_bound
        left, right = self.left, self.right
        out = []
        stack = [sym]
        pop, push = stack.pop, stack.append
        while stack:
            s = pop()
            if s <= G:
                out.append(s)
            else:
                k = s - G - 1
                push(right[k])
                push(left[k])
        return out

    def expand_sequence(self, seq) -> List[int]:
        G = self.terminal_bound
        left, right = self.left, self.right
        out = []
        append = out.append
        for sym in seq:
            if sym <= G:
                append(sym)
                continue
            stack = [sym]
            while stack:
                s = stack.pop()
                if s <= G:
                    append(s)
                else:
                    k = s - G - 1
                    stack.append(right[k])
                    stack.append(left[k])
        return out

    def copy(self) -> "Grammar":
        g = Grammar(self.terminal_bound)
        g.left = list(self.left)
        g.right = list(self.right)
        return g
