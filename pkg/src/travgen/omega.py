"""Tangency patterns and their degeneration order.

A pattern is the ordered list of boundary multiplicities met by one
trajectory.  Admissible patterns are either a single even entry, or have odd
first/last entries and even interior entries.
"""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence


class InadmissiblePattern(ValueError):
    """Raised when a multiplicity sequence violates the parity rule."""


@dataclass(frozen=True, order=False)
class Pattern:
    entries: tuple[int, ...]

    def __init__(self, entries: Iterable[int]):
        object.__setattr__(self, "entries", tuple(int(e) for e in entries))

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __repr__(self) -> str:
        return f"Pattern({format_pattern(self)})"

    def __str__(self) -> str:
        return format_pattern(self)

    @property
    def norm(self) -> int:
        return norm(self)

    @property
    def reduced_norm(self) -> int:
        return reduced_norm(self)

    @property
    def sup(self) -> int:
        return sup_count(self)

    def sort_key(self) -> tuple:
        return canonical_key(self)


def admissibility_violation(entries: Sequence[int]) -> str | None:
    """Return a diagnostic string for the first violated rule, or None."""
    if len(entries) == 0:
        return "empty pattern: a trajectory meets the boundary at least once"
    for k, e in enumerate(entries):
        if int(e) < 1:
            return f"entry {k} is {e}; multiplicities must be >= 1"
    if len(entries) == 1:
        if entries[0] % 2:
            return f"single-point pattern must have even multiplicity, got {entries[0]}"
        return None
    if entries[0] % 2 == 0:
        return f"first entry must be odd, got {entries[0]}"
    if entries[-1] % 2 == 0:
        return f"last entry must be odd, got {entries[-1]}"
    for k in range(1, len(entries) - 1):
        if entries[k] % 2:
            return f"interior entry {k} must be even, got {entries[k]}"
    return None


def is_admissible(entries: Sequence[int]) -> bool:
    return admissibility_violation(tuple(entries)) is None


def as_pattern(obj) -> Pattern:
    """Coerce a Pattern, a sequence of ints, or a serialized string."""
    if isinstance(obj, Pattern):
        p = obj
    elif isinstance(obj, str):
        p = parse_pattern(obj)
    else:
        p = Pattern(obj)
    msg = admissibility_violation(p.entries)
    if msg is not None:
        raise InadmissiblePattern(f"{tuple(p.entries)}: {msg}")
    return p


def norm(omega) -> int:
    """Sum of multiplicities."""
    return sum(as_pattern(omega).entries)


def reduced_norm(omega) -> int:
    """Sum of (multiplicity - 1); the codimension of the pattern's stratum."""
    p = as_pattern(omega)
    return sum(p.entries) - len(p.entries)


def sup_count(omega) -> int:
    """Number of distinct support points, ``norm - reduced_norm``."""
    return len(as_pattern(omega).entries)


def canonical_key(omega: Pattern) -> tuple:
    e = omega.entries
    return (sum(e) - len(e), sum(e), e)


# ---------------------------------------------------------------- serialization

_PAREN = re.compile(r"^\(\s*\d+(\s*,\s*\d+)*\s*\)$")


def format_pattern(omega) -> str:
    e = omega.entries if isinstance(omega, Pattern) else tuple(omega)
    if all(x <= 9 for x in e):
        return "".join(str(x) for x in e)
    return "(" + ",".join(str(x) for x in e) + ")"


def parse_pattern(text: str) -> Pattern:
    s = text.strip()
    if _PAREN.match(s):
        return Pattern(int(t) for t in s[1:-1].split(","))
    if s.isdigit():
        return Pattern(int(c) for c in s)
    raise ValueError(f"cannot parse pattern {text!r}")


# ---------------------------------------------------------------- enumeration

def _compositions(total: int, max_len: int) -> Iterator[tuple[int, ...]]:
    if total == 0:
        yield ()
        return
    if max_len == 0:
        return
    for first in range(1, total + 1):
        for rest in _compositions(total - first, max_len - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _enumerate_cached(bound: int) -> tuple[Pattern, ...]:
    # |w|' <= b together with admissibility forces |w| <= 2b + 2
    found = []
    for total in range(2, 2 * bound + 3):
        for comp in _compositions(total, total):
            if is_admissible(comp) and sum(comp) - len(comp) <= bound:
                found.append(Pattern(comp))
    found.sort(key=canonical_key)
    return tuple(found)


def enumerate_patterns(max_reduced_norm: int) -> list[Pattern]:
    """All admissible patterns with reduced norm at most the bound.

    Ordered by reduced norm, then norm, then lexicographically.
    """
    if max_reduced_norm < 0:
        raise ValueError("bound must be >= 0")
    return list(_enumerate_cached(int(max_reduced_norm)))


# ---------------------------------------------------------------- moves

def _formal_moves(seq: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """One-step moves on formal multiplicity sequences.

    M1 merge two adjacent entries; M2 add 2 to an entry; M3 insert a 2 at an
    interior position; M4 adjoin a new (1,1) or 2 at either end, or insert a
    (1,1) anywhere (a complex pair of roots becoming real).
    """
    n = len(seq)
    for k in range(n - 1):
        yield seq[:k] + (seq[k] + seq[k + 1],) + seq[k + 2:]
    for k in range(n):
        yield seq[:k] + (seq[k] + 2,) + seq[k + 1:]
    for k in range(1, n):
        yield seq[:k] + (2,) + seq[k:]
    for k in range(n + 1):
        yield seq[:k] + (1, 1) + seq[k:]
    yield (2,) + seq
    yield seq + (2,)


def elementary_degenerations(omega) -> set[Pattern]:
    """Admissible patterns one move away from ``omega``."""
    p = as_pattern(omega)
    return {Pattern(s) for s in _formal_moves(p.entries) if is_admissible(s)}


@lru_cache(maxsize=4096)
def _reachable(start: tuple[int, ...], max_norm: int) -> frozenset[tuple[int, ...]]:
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in _formal_moves(s):
            if sum(t) <= max_norm and t not in seen:
                seen.add(t)
                queue.append(t)
    return frozenset(seen)


def degenerates_to(omega, omega_prime) -> bool:
    """True iff ``omega_prime`` is reachable from ``omega`` by moves.

    Admissibility is only required of the two endpoints.  Every move keeps or
    raises the norm, so the search is bounded by ``norm(omega_prime)``.
    """
    a = as_pattern(omega)
    b = as_pattern(omega_prime)
    if a == b:
        return True
    if sum(b.entries) < sum(a.entries) or reduced_norm(b) <= reduced_norm(a):
        return False
    return b.entries in _reachable(a.entries, sum(b.entries))


def generic_neighbours(omega) -> set[Pattern]:
    """Admissible patterns that degenerate to ``omega`` (including itself)."""
    p = as_pattern(omega)
    candidates = [q for q in enumerate_patterns(reduced_norm(p)) if q.norm <= p.norm]
    return {q for q in candidates if degenerates_to(q, p)}


# ---------------------------------------------------------------- Hasse diagram

@dataclass
class DegenerationDag:
    nodes: list[Pattern]
    edges: list[tuple[int, int]] = field(default_factory=list)
    max_reduced_norm: int = 0

    def to_json(self) -> str:
        doc = {
            "max_reduced_norm": self.max_reduced_norm,
            "nodes": [format_pattern(p) for p in self.nodes],
            "edges": [list(e) for e in self.edges],
        }
        return json.dumps(doc, indent=2)

    def to_dot(self) -> str:
        lines = ["digraph degenerations {"]
        for i, p in enumerate(self.nodes):
            lines.append(f'  n{i} [label="{format_pattern(p)}"];')
        for i, j in self.edges:
            lines.append(f"  n{i} -> n{j};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def hasse_diagram(max_reduced_norm: int) -> DegenerationDag:
    """Covering pairs of ``degenerates_to`` on ``enumerate_patterns(bound)``.

    An edge (i, j) means node j is a minimal strict degeneration of node i.
    """
    nodes = enumerate_patterns(max_reduced_norm)
    n = len(nodes)
    rel = [[i != j and degenerates_to(nodes[i], nodes[j]) for j in range(n)] for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            if not rel[i][j]:
                continue
            if any(rel[i][k] and rel[k][j] for k in range(n)):
                continue
            edges.append((i, j))
    return DegenerationDag(nodes=nodes, edges=edges, max_reduced_norm=max_reduced_norm)
