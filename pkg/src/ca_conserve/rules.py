"""Local rules f: A^B -> A stored as dense mixed-radix tables.

A pattern over B is a tuple of symbols aligned with ``nbhd.offsets``. Its
table index is the mixed-radix number with the first offset as the most
significant digit. For elementary rules (B = {-1, 0, 1}) this makes table
index k = 4*a_{-1} + 2*a_0 + a_1, which is the Wolfram bit position.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .lattice import Neighborhood, add, as_point, double


@dataclass(frozen=True)
class Alphabet:
    size: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("alphabet size must be at least 1")
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != self.size or len(set(names)) != self.size:
                raise ValueError("alphabet names must be distinct, one per symbol")
            object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return self.size


def encode(pattern: Sequence[int], base: int) -> int:
    idx = 0
    for s in pattern:
        idx = idx * base + int(s)
    return idx


def decode(index: int, base: int, length: int) -> tuple[int, ...]:
    digits = [0] * length
    for i in range(length - 1, -1, -1):
        index, digits[i] = divmod(index, base)
    return tuple(digits)


def all_patterns(base: int, length: int) -> np.ndarray:
    """Every pattern of the given length, shape (base**length, length), in index order."""
    n = base**length
    idx = np.arange(n, dtype=np.int64)
    out = np.empty((n, length), dtype=np.int64)
    for i in range(length - 1, -1, -1):
        idx, out[:, i] = np.divmod(idx, base)
    return out


@dataclass(frozen=True, eq=False)
class LocalRule:
    alphabet: Alphabet
    nbhd: Neighborhood
    table: tuple[int, ...]
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if isinstance(self.alphabet, int):
            object.__setattr__(self, "alphabet", Alphabet(self.alphabet))
        table = tuple(int(t) for t in self.table)
        A = self.alphabet.size
        if len(table) != A ** len(self.nbhd):
            raise ValueError(
                f"table length {len(table)} != {A}^{len(self.nbhd)}"
            )
        if any(t < 0 or t >= A for t in table):
            raise ValueError("table entries must be symbols of the alphabet")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def A(self) -> int:
        return self.alphabet.size

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.array(self.table, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LocalRule)
            and self.alphabet.size == other.alphabet.size
            and self.nbhd == other.nbhd
            and self.table == other.table
        )

    def __hash__(self) -> int:
        return hash((self.alphabet.size, self.nbhd, self.table))

    def __repr__(self) -> str:
        w = self.meta.get("wolfram")
        tag = f" wolfram={w}" if w is not None else ""
        return f"LocalRule(A={self.A}, |B|={len(self.nbhd)}{tag})"

    def code(self) -> int:
        """Canonical integer encoding sum_k table[k] * A**k (the Wolfram number for ECA)."""
        return sum(t * self.A**k for k, t in enumerate(self.table))

    def quiescent(self, symbol: int) -> bool:
        return self.table[encode([symbol] * len(self.nbhd), self.A)] == symbol

    def widen(self, nbhd: Neighborhood) -> "LocalRule":
        """The same map read through a larger neighborhood (extra cells ignored)."""
        if not set(self.nbhd.offsets) <= set(nbhd.offsets):
            raise ValueError("target neighborhood must contain the rule's neighborhood")
        pos = [nbhd.index(b) for b in self.nbhd.offsets]
        pats = all_patterns(self.A, len(nbhd))
        sub = pats[:, pos]
        idx = np.zeros(len(pats), dtype=np.int64)
        for j in range(sub.shape[1]):
            idx = idx * self.A + sub[:, j]
        return LocalRule(self.alphabet, nbhd, tuple(self.array[idx]), self.meta)

    def to_json(self) -> dict:
        return {
            "dimension": self.nbhd.dimension,
            "alphabet": self.A,
            "offsets": [list(b) for b in self.nbhd.offsets],
            "table": list(self.table),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "LocalRule":
        dim = int(doc["dimension"])
        offsets = [as_point(b, dim) for b in doc["offsets"]]
        A = int(doc["alphabet"])
        table = list(doc["table"])
        if len(table) != A ** len(offsets):
            raise ValueError(f"table length {len(table)} != {A}^{len(offsets)}")
        return _reindexed(A, offsets, table, doc.get("meta", {}))


def _reindexed(A: int, offsets: list, table: list, meta) -> LocalRule:
    """Re-index a table given over arbitrary offsets onto the padded canonical neighborhood."""
    nbhd = Neighborhood.from_offsets(offsets, len(offsets[0]))
    pos = [nbhd.index(b) for b in offsets]
    pats = all_patterns(A, len(nbhd))
    idx = np.zeros(len(pats), dtype=np.int64)
    for p in pos:
        idx = idx * A + pats[:, p]
    return LocalRule(Alphabet(A), nbhd, tuple(np.asarray(table, dtype=np.int64)[idx]), meta)


def from_wolfram(number: int) -> LocalRule:
    """Elementary rule: output at (a_{-1}, a_0, a_1) is bit 4a_{-1}+2a_0+a_1 of ``number``."""
    if not 0 <= number <= 255:
        raise ValueError("Wolfram number must be in 0..255")
    table = tuple((number >> k) & 1 for k in range(8))
    return LocalRule(Alphabet(2), Neighborhood.box(1), table, {"wolfram": number})


def to_wolfram(rule: LocalRule) -> int:
    if rule.A != 2 or rule.nbhd != Neighborhood.box(1):
        raise ValueError("not an elementary rule")
    return rule.code()


def shift_rule(k: int, alphabet: int = 2, radius: int | None = None) -> LocalRule:
    """The shift sigma^k: F(a)_x = a_{x+k} on a 1-D interval neighborhood."""
    r = abs(k) if radius is None else radius
    nbhd = Neighborhood.box(r)
    j = nbhd.index((k,))
    pats = all_patterns(alphabet, len(nbhd))
    return LocalRule(Alphabet(alphabet), nbhd, tuple(pats[:, j]), {"name": f"shift{k}"})


def identity_rule(alphabet: int = 2, nbhd: Neighborhood | None = None) -> LocalRule:
    nbhd = nbhd or Neighborhood.box(1)
    pats = all_patterns(alphabet, len(nbhd))
    return LocalRule(Alphabet(alphabet), nbhd, tuple(pats[:, nbhd.origin_index]), {"name": "identity"})


def from_function(alphabet: int, nbhd: Neighborhood, fn) -> LocalRule:
    """Tabulate ``fn(pattern_tuple) -> symbol`` over all patterns."""
    pats = all_patterns(alphabet, len(nbhd))
    return LocalRule(Alphabet(alphabet), nbhd, tuple(int(fn(tuple(p))) for p in pats))


def random_rule(rng: np.random.Generator, alphabet: int, nbhd: Neighborhood) -> LocalRule:
    table = rng.integers(0, alphabet, size=alphabet ** len(nbhd))
    return LocalRule(Alphabet(alphabet), nbhd, tuple(table))


def apply_local(rule: LocalRule, pattern: Sequence[int]) -> int:
    if len(pattern) != len(rule.nbhd):
        raise ValueError("pattern length must equal |B|")
    return rule.table[encode(pattern, rule.A)]


@dataclass(frozen=True)
class PatchIndex:
    """Positions inside the B+B pattern of each translated window v+B, v in B."""

    nbhd: Neighborhood
    outer: Neighborhood
    positions: np.ndarray  # shape (|B|, |B|): row v, column b -> index of v+b in outer


def patch_index(nbhd: Neighborhood, outer: Neighborhood | None = None) -> PatchIndex:
    outer = outer or double(nbhd)
    pos = np.array(
        [[outer.index(add(v, b)) for b in nbhd.offsets] for v in nbhd.offsets],
        dtype=np.int64,
    )
    return PatchIndex(nbhd, outer, pos)


def apply_patch(rule: LocalRule, pattern: Sequence[int]) -> tuple[int, ...]:
    """F restricted to B, computed from a pattern over B+B."""
    outer = double(rule.nbhd)
    if len(pattern) != len(outer):
        raise ValueError("pattern length must equal |B+B|")
    pi = patch_index(rule.nbhd, outer)
    p = np.asarray(pattern, dtype=np.int64)
    idx = np.zeros(len(rule.nbhd), dtype=np.int64)
    for j in range(len(rule.nbhd)):
        idx = idx * rule.A + p[pi.positions[:, j]]
    return tuple(int(t) for t in rule.array[idx])


def load_rule(path: str | Path) -> LocalRule:
    with open(path, encoding="utf-8") as fh:
        return LocalRule.from_json(json.load(fh))


def save_rule(rule: LocalRule, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rule.to_json(), fh, indent=1)
