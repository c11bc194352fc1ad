"""One-dimensional flux of a particle-counting quantity and particle displacement rules.

Throughout, the rule's neighborhood is treated as the interval [-B..B] with B
its radius (narrower rules are widened), and phi must be natural-valued and
conserved. Words are indexed relative to a center site.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import json
import numpy as np

from .conservation import finitary_holds
from .lattice import Neighborhood
from .quantity import RATIONAL, Quantity, vacuum_symbol
from .rules import LocalRule, all_patterns, encode


# --- hypotheses and helpers -------------------------------------------------

def _interval_rule(rule: LocalRule) -> LocalRule:
    if rule.nbhd.dimension != 1:
        raise ValueError("flux and displacement rules are one-dimensional")
    box = Neighborhood.box(rule.nbhd.radius)
    return rule if rule.nbhd == box else rule.widen(box)


@lru_cache(maxsize=64)
def _prepared(rule: LocalRule, phi: Quantity) -> tuple[LocalRule, np.ndarray, int]:
    """Validate the hypotheses once per (rule, phi); returns (interval rule, phi array, vacuum)."""
    if phi.domain != RATIONAL:
        raise ValueError("multi-species quantities are unsupported; recode to a scalar count")
    if not phi.is_natural():
        raise ValueError("phi must be natural-valued")
    vac = vacuum_symbol(phi)
    if not finitary_holds(rule, phi):
        raise ValueError("phi is not conserved by the rule")
    return _interval_rule(rule), np.array([int(v) for v in phi.values], dtype=np.int64), vac


def _outputs(rule: LocalRule, cells: np.ndarray) -> np.ndarray:
    """Rule outputs at the sites of ``cells`` (shape (n, L)) whose whole neighborhood lies inside."""
    r = rule.nbhd.radius
    L = cells.shape[1]
    idx = np.zeros((cells.shape[0], L - 2 * r), dtype=np.int64)
    for (b,) in rule.nbhd.offsets:
        idx = idx * rule.A + cells[:, r + b : L - r + b]
    return rule.array[idx]


def _pad(words: np.ndarray, width: int, vac: int) -> np.ndarray:
    return np.pad(words, ((0, 0), (width, width)), constant_values=vac)


def _flux_of_words(rule: LocalRule, phiv: np.ndarray, vac: int, words: np.ndarray) -> np.ndarray:
    """Right flux at the center of each embedded word (shape (n, 2B+1))."""
    B = rule.nbhd.radius
    # sites -3B..3B, outputs at -2B..2B; outputs farther out see only vacuum
    out = _outputs(rule, _pad(words, 2 * B, vac))
    before = phiv[words[:, : B + 1]].sum(axis=1)
    after = phiv[out[:, : 2 * B + 1]].sum(axis=1)
    return before - after


@lru_cache(maxsize=64)
def flux_table(rule: LocalRule, phi: Quantity) -> np.ndarray:
    """Right flux for every word over [-B..B], indexed by :func:`rules.encode`."""
    rule, phiv, vac = _prepared(rule, phi)
    B = rule.nbhd.radius
    table = _flux_of_words(rule, phiv, vac, all_patterns(rule.A, 2 * B + 1))
    table.setflags(write=False)
    return table


def _word_at(a, lo: int, hi: int) -> tuple[int, ...]:
    return tuple(int(a[(x,)]) for x in range(lo, hi + 1))


def _word_flux(rule: LocalRule, phi: Quantity, word: Sequence[int]) -> int:
    return int(flux_table(rule, phi)[encode(word, rule.A)])


# --- flux -------------------------------------------------------------------

@dataclass(frozen=True)
class FluxValue:
    """Flux at one site: ``right`` goes z -> z+1, ``left`` goes z -> z-1, ``out`` is their sum."""

    right: int
    left: int

    @property
    def out(self) -> int:
        return self.left + self.right

    def to_json(self) -> dict:
        return {"right": self.right, "left": self.left, "out": self.out}


def flux_right(rule: LocalRule, phi: Quantity, a, z: int = 0) -> int:
    """Net phi-mass crossing from z to z+1 in one step.

    ``a`` may be any 1-D configuration indexable by site, or a bare word of
    length 2B+1 centered on z. Only the word a|[z-B..z+B] matters, so
    configurations of infinite support are fine.
    """
    B = rule.nbhd.radius
    if isinstance(a, (list, tuple)):
        if len(a) != 2 * B + 1:
            raise ValueError(f"word must have length {2 * B + 1}")
        word = tuple(a)
    else:
        word = _word_at(a, z - B, z + B)
    return _word_flux(rule, phi, word)


def flux_left(rule: LocalRule, phi: Quantity, a, z: int = 0) -> int:
    return -flux_right(rule, phi, a, z - 1)


def flux(rule: LocalRule, phi: Quantity, a, z: int = 0) -> FluxValue:
    return FluxValue(flux_right(rule, phi, a, z), flux_left(rule, phi, a, z))


def _local_image(rule: LocalRule, a, x: int) -> int:
    return rule.table[encode([a[(x + b,)] for (b,) in rule.nbhd.offsets], rule.A)]


def flux_identities_check(rule: LocalRule, phi: Quantity, a, z: int = 0) -> dict:
    """Evaluate the local flux identity and the four flux bounds at site z."""
    prule, phiv, _ = _prepared(rule, phi)
    B = prule.nbhd.radius
    fv = flux(rule, phi, a, z)
    ph = lambda s: int(phiv[s])  # noqa: E731
    img = {x: _local_image(prule, a, x) for x in range(z - B, z + B + 1)}
    dphi = ph(img[z]) - ph(a[(z,)])
    bounds = {
        "i": sum(ph(a[(y,)]) for y in range(z - B, z + 1)),
        "ii": sum(ph(img[y]) for y in range(z, z + B + 1)),
        "iii": sum(ph(a[(y,)]) for y in range(z, z + B + 1)),
        "iv": sum(ph(img[y]) for y in range(z - B, z + 1)),
    }
    checks = {
        "balance": fv.out == -dphi,
        "i": fv.right <= bounds["i"],
        "ii": fv.right <= bounds["ii"],
        "iii": fv.left <= bounds["iii"],
        "iv": fv.left <= bounds["iv"],
    }
    return {
        "site": z,
        "flux": fv.to_json(),
        "dphi": dphi,
        "bounds": bounds,
        "checks": checks,
        "ok": all(checks.values()),
    }


# --- displacement rules -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class DisplacementRule:
    """Table d: A^[-2B..2B] -> N^[-B..B]; ``table[k][j]`` counts particles sent to offset j-B."""

    alphabet: int
    B: int
    table: tuple[tuple[int, ...], ...] = field(repr=False)

    def __post_init__(self):
        n = self.alphabet ** (4 * self.B + 1)
        if len(self.table) != n:
            raise ValueError(f"displacement table needs {n} entries")
        if any(len(row) != 2 * self.B + 1 or min(row) < 0 for row in self.table):
            raise ValueError("displacement counts must be nonnegative, one per offset in [-B..B]")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DisplacementRule)
            and (self.alphabet, self.B, self.table) == (other.alphabet, other.B, other.table)
        )

    def __hash__(self) -> int:
        return hash((self.alphabet, self.B, self.table))

    @property
    def array(self) -> np.ndarray:
        arr = self.__dict__.get("_array")
        if arr is None:
            arr = np.array(self.table, dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, "_array", arr)
        return arr

    def d(self, pattern: Sequence[int]) -> dict[int, int]:
        """Nonzero counts {offset: count} for one pattern over [-2B..2B]."""
        row = self.table[encode(pattern, self.alphabet)]
        return {j - self.B: c for j, c in enumerate(row) if c}

    def replace(self, index: int, row: Sequence[int]) -> "DisplacementRule":
        table = list(self.table)
        table[index] = tuple(int(c) for c in row)
        return DisplacementRule(self.alphabet, self.B, tuple(table))

    def to_json(self) -> dict:
        L = 4 * self.B + 1
        entries = []
        for k, row in enumerate(self.table):
            d = {str(j - self.B): c for j, c in enumerate(row) if c}
            if d:
                entries.append({"pattern": [int(s) for s in all_patterns(self.alphabet, L)[k]], "d": d})
        return {"B": self.B, "alphabet": self.alphabet, "entries": entries}

    @classmethod
    def from_json(cls, doc: Mapping) -> "DisplacementRule":
        A, B = int(doc["alphabet"]), int(doc["B"])
        L = 4 * B + 1
        rows = [[0] * (2 * B + 1) for _ in range(A ** L)]
        for e in doc.get("entries", []):
            pat = [int(s) for s in e["pattern"]]
            if len(pat) != L or any(not 0 <= s < A for s in pat):
                raise ValueError(f"bad displacement pattern {pat}")
            for off, c in e["d"].items():
                off = int(off)
                if abs(off) > B:
                    raise ValueError(f"displacement offset {off} outside [-{B}..{B}]")
                rows[encode(pat, A)][off + B] = int(c)
        return cls(A, B, tuple(tuple(r) for r in rows))


def load_pdr(path: str | Path) -> DisplacementRule:
    with open(path) as fh:
        return DisplacementRule.from_json(json.load(fh))


def save_pdr(pdr: DisplacementRule, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(pdr.to_json(), fh, indent=1)


def _fill(caps: Sequence[int], lo: int, hi: int) -> list[int]:
    """Share of each capacity slot falling in the cumulative interval (lo, hi].

    Slot z occupies (S(z-1), S(z)] where S is the running total of ``caps``;
    filling nearest-first means slot z receives |(S(z-1), S(z)] & (lo, hi]|.
    """
    out, prev = [], 0
    for c in caps:
        cur = prev + c
        out.append(max(0, min(cur, hi) - max(prev, lo)))
        prev = cur
    return out


def _displacement(phi_a0: int, right: int, left: int, image: Sequence[int]) -> tuple[int, ...]:
    """Counts d_{0->z} for z in [-B..B] given both fluxes and phi of the image on [-B..B]."""
    B = len(image) // 2
    j0 = image[B]
    right_caps = image[B + 1 :]
    left_caps = image[:B][::-1]
    if right <= 0 and left <= 0:
        # case 0: nothing leaves, every particle stays put
        moves_r, moves_l = [0] * B, [0] * B
    else:
        # particles arriving from one side first fill the center and then pass
        # through, so the center's own particles start after them
        skip_r = max(0, -left - j0) if left < 0 else 0
        skip_l = max(0, -right - j0) if right < 0 else 0
        moves_r = _fill(right_caps, skip_r, max(right, 0))
        moves_l = _fill(left_caps, skip_l, max(left, 0))
    stay = phi_a0 - sum(moves_r) - sum(moves_l)
    return tuple(moves_l[::-1]) + (stay,) + tuple(moves_r)


def build_pdr(rule: LocalRule, phi: Quantity) -> DisplacementRule:
    """Displacement rule read off from the flux, one entry per pattern over [-2B..2B]."""
    prule, phiv, _ = _prepared(rule, phi)
    B = prule.nbhd.radius
    A = prule.A
    pats = all_patterns(A, 4 * B + 1)
    ftab = flux_table(rule, phi)
    # word over [-B..B] sits at columns B..3B, the one around -1 at B-1..3B-1
    right = ftab[_encode_rows(pats[:, B : 3 * B + 1], A)]
    left = -ftab[_encode_rows(pats[:, B - 1 : 3 * B], A)]
    image = phiv[_outputs(prule, pats)]
    center = phiv[pats[:, 2 * B]]
    rows = []
    for k in range(len(pats)):
        row = _displacement(int(center[k]), int(right[k]), int(left[k]), [int(v) for v in image[k]])
        if row[B] < 0:
            raise ValueError("flux bookkeeping failed: negative stationary count")
        rows.append(row)
    return DisplacementRule(A, B, tuple(rows))


def _encode_rows(words: np.ndarray, A: int) -> np.ndarray:
    idx = np.zeros(len(words), dtype=np.int64)
    for j in range(words.shape[1]):
        idx = idx * A + words[:, j]
    return idx


# --- verification -------------------------------------------------------------

@dataclass
class PDRReport:
    patterns: int
    c1_failures: list = field(default_factory=list)
    c2_failures: list = field(default_factory=list)
    ledger_failures: list = field(default_factory=list)
    trials: int = 0

    @property
    def ok(self) -> bool:
        return not (self.c1_failures or self.c2_failures or self.ledger_failures)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "patterns": self.patterns,
            "trials": self.trials,
            "c1_failures": self.c1_failures[:10],
            "c2_failures": self.c2_failures[:10],
            "ledger_failures": self.ledger_failures[:10],
            "counts": {
                "c1": len(self.c1_failures),
                "c2": len(self.c2_failures),
                "ledger": len(self.ledger_failures),
            },
        }


def _site_table(pdr: DisplacementRule, cells: np.ndarray) -> np.ndarray:
    """Displacement rows for every site of ``cells`` with a full [-2B..2B] window."""
    B = pdr.B
    L = len(cells)
    idx = np.zeros(L - 4 * B, dtype=np.int64)
    for j in range(4 * B + 1):
        idx = idx * pdr.alphabet + cells[j : L - 4 * B + j]
    return pdr.array[idx]


def verify_pdr(
    rule: LocalRule,
    phi: Quantity,
    pdr: DisplacementRule,
    trials: int = 1000,
    rng: np.random.Generator | None = None,
    max_length: int = 12,
) -> PDRReport:
    """Check the two compatibility ledgers of ``pdr`` against ``rule``.

    The per-pattern condition (outflow equals phi at the center) is checked on
    every pattern. The inflow condition is checked at every site of ``trials``
    random finite configurations, together with the global mass balance.
    """
    prule, phiv, vac = _prepared(rule, phi)
    if pdr.B < prule.nbhd.radius or pdr.alphabet != prule.A:
        raise ValueError("displacement rule does not match the rule's alphabet and radius")
    B = pdr.B
    if prule.nbhd.radius < B:
        prule = prule.widen(Neighborhood.box(B))
    rng = rng if rng is not None else np.random.default_rng(0)
    pats = all_patterns(pdr.alphabet, 4 * B + 1)
    report = PDRReport(patterns=len(pats))
    sums = pdr.array.sum(axis=1)
    for k in np.nonzero(sums != phiv[pats[:, 2 * B]])[0]:
        report.c1_failures.append({"pattern": [int(s) for s in pats[k]], "d": pdr.d(pats[k])})
    for _ in range(trials):
        n = int(rng.integers(1, max_length + 1))
        word = rng.integers(0, pdr.alphabet, size=n)
        # sites -3B-pad .. n-1+3B+pad; every nonzero move starts and ends inside
        pad = 4 * B
        cells = np.concatenate([np.full(pad, vac), word, np.full(pad, vac)])
        image = _outputs(prule, cells[None, :])[0]           # sites B..len-B-1
        d = _site_table(pdr, cells)                           # sites 2B..len-2B-1
        inflow = np.zeros(len(cells), dtype=np.int64)
        for j in range(2 * B + 1):
            inflow[2 * B + j - B : len(cells) - 2 * B + j - B] += d[:, j]
        # inflow is complete on sites 3B..len-3B-1
        lo, hi = 3 * B, len(cells) - 3 * B
        expect = phiv[image[lo - B : hi - B]]
        bad = np.nonzero(inflow[lo:hi] != expect)[0]
        if len(bad):
            report.c2_failures.append(
                {"word": [int(s) for s in word], "sites": [int(x + lo - pad) for x in bad]}
            )
        mass = int(phiv[word].sum())
        moved = int(d.sum())
        if not (moved == mass == int(phiv[image].sum())):
            report.ledger_failures.append({"word": [int(s) for s in word], "mass": mass, "moved": moved})
    report.trials = trials
    return report


# --- reconstruction -----------------------------------------------------------

@dataclass(frozen=True)
class Reconstruction:
    """All local rules whose output at each pattern has phi equal to the displacement inflow."""

    alphabet: int
    nbhd: Neighborhood
    choices: tuple[tuple[int, ...], ...]
    phi: Quantity

    @property
    def count(self) -> int:
        return math.prod(len(c) for c in self.choices)

    @property
    def unique(self) -> bool:
        return all(len(c) == 1 for c in self.choices)

    def rules(self, verify: bool = True) -> Iterator[LocalRule]:
        """Every reconstructed rule, each checked to conserve phi when ``verify``."""
        for table in itertools.product(*self.choices):
            rule = LocalRule(self.alphabet, self.nbhd, table)
            if verify and not finitary_holds(rule, self.phi):
                raise AssertionError("reconstructed rule does not conserve phi")
            yield rule

    def to_json(self, limit: int = 64) -> dict:
        docs = [r.to_json() for r in itertools.islice(self.rules(), limit)]
        return {"count": self.count, "unique": self.unique, "rules": docs, "truncated": self.count > limit}


def reconstruct_ca(phi: Quantity, pdr: DisplacementRule) -> Reconstruction:
    """Rules compatible with ``pdr``: f(a) is any symbol whose phi equals the inflow at 0.

    The inflow at the origin depends on the patterns around its neighbors,
    which together span [-3B..3B]; the result is narrowed to [-2B..2B] or
    [-B..B] whenever the inflow is already determined there.
    """
    if phi.domain != RATIONAL or not phi.is_natural():
        raise ValueError("phi must be natural-valued")
    if phi.size != pdr.alphabet:
        raise ValueError("alphabet size mismatch between phi and displacement rule")
    A, B = pdr.alphabet, pdr.B
    big = all_patterns(A, 6 * B + 1)
    d = np.stack([_site_table(pdr, row) for row in big])     # (n, 2B+1 sites, 2B+1 offsets)
    # site x = j - B sends d[.., j, B - (j - B)] = d[.., j, 2B - j] to the origin
    m = sum(d[:, j, 2 * B - j] for j in range(2 * B + 1))
    by_value: dict[int, tuple[int, ...]] = {}
    for s, v in enumerate(phi.values):
        by_value.setdefault(int(v), ())
        by_value[int(v)] += (s,)
    missing = sorted({int(x) for x in m} - set(by_value))
    if missing:
        raise ValueError(f"incompatible displacement totals: no symbol carries {missing}")
    for radius in sorted({B, 2 * B, 3 * B}):
        keep = slice(3 * B - radius, 3 * B + radius + 1)
        narrow = _encode_rows(big[:, keep], A)
        table = np.full(A ** (2 * radius + 1), -1, dtype=np.int64)
        table[narrow] = m
        # determined iff every big pattern agrees with the narrowed lookup
        if np.array_equal(table[narrow], m):
            choices = tuple(by_value[int(v)] for v in table)
            return Reconstruction(A, Neighborhood.box(radius), choices, phi)
    raise AssertionError("unreachable")
