"""Detecting and characterizing cell-wise conservation laws.

The central object is the single-site perturbation system: for every pair of
patterns a, c over B+B that differ only at the origin, a conserved phi must
satisfy

    sum_{v in B} phi(F(c)_v) - sum_{v in B} phi(F(a)_v) = phi(c_0) - phi(a_0).

Each pair contributes one integer row (symbol counts of the two outputs minus
the two center symbols) and phi is conserved iff phi is orthogonal to all
rows. Everything else here is either a cross-check of that test or a cheap
necessary condition.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import linalg
from .engine import is_vacuum_preserving, step, torus_for
from .lattice import (
    Configuration,
    Neighborhood,
    PeriodicConfig,
    TorusConfig,
    Window,
    closure,
    double,
    interior,
)
from .quantity import MOD, RATIONAL, VECTOR, Quantity, format_value, total_window, vacuum_set
from .rules import LocalRule, all_patterns, decode, encode, patch_index

DEFAULT_CAP = 1 << 22


def scan_cap() -> int:
    """Largest exhaustive enumeration allowed; overridable with CA_CONSERVE_CAP."""
    env = os.environ.get("CA_CONSERVE_CAP")
    return int(env) if env else DEFAULT_CAP


class CapExceeded(ValueError):
    pass


# --- the perturbation system -------------------------------------------------

@dataclass(frozen=True, eq=False)
class PairSystem:
    """Rule-independent bookkeeping for pattern pairs over B+B differing at the origin."""

    nbhd: Neighborhood
    A: int
    outer: Neighborhood
    local_index: np.ndarray  # (P, |B|) table index of the window v+B inside each outer pattern
    center: np.ndarray  # (P,) symbol at the origin of each outer pattern
    pair_a: np.ndarray  # indices of the lower-center pattern of each pair
    pair_c: np.ndarray

    def pattern(self, index: int) -> tuple[int, ...]:
        return decode(int(index), self.A, len(self.outer))


@lru_cache(maxsize=64)
def pair_system(nbhd: Neighborhood, A: int) -> PairSystem:
    outer = double(nbhd)
    n = len(outer)
    if A**n > scan_cap():
        raise CapExceeded(f"{A}^{n} patterns over B+B exceed the scan cap")
    pats = all_patterns(A, n)
    pos = patch_index(nbhd, outer).positions
    local = np.zeros((len(pats), len(nbhd)), dtype=np.int64)
    for j in range(len(nbhd)):
        local = local * A + pats[:, pos[:, j]]
    o = outer.origin_index
    center = pats[:, o].copy()
    weight = A ** (n - 1 - o)
    pa, pc = [], []
    for delta in range(1, A):
        base = np.nonzero(center + delta < A)[0]
        pa.append(base)
        pc.append(base + delta * weight)
    pair_a = np.concatenate(pa) if pa else np.zeros(0, dtype=np.int64)
    pair_c = np.concatenate(pc) if pc else np.zeros(0, dtype=np.int64)
    for arr in (local, center, pair_a, pair_c):
        arr.setflags(write=False)
    return PairSystem(nbhd, A, outer, local, center, pair_a, pair_c)


def _symbol_counts(outputs: np.ndarray, A: int) -> np.ndarray:
    counts = np.zeros((outputs.shape[0], A), dtype=np.int64)
    rows = np.arange(outputs.shape[0])
    for j in range(outputs.shape[1]):
        np.add.at(counts, (rows, outputs[:, j]), 1)
    return counts


@dataclass(frozen=True)
class ConstraintRows:
    rows: np.ndarray  # (R, A) distinct nonzero integer rows
    witness: np.ndarray  # (R, 2) pattern indices (a, c) producing each row
    system: PairSystem


def constraint_rows(rule: LocalRule) -> ConstraintRows:
    """Deduplicated linear constraints on phi, each with one witnessing pattern pair."""
    ps = pair_system(rule.nbhd, rule.A)
    outputs = rule.array[ps.local_index]
    counts = _symbol_counts(outputs, rule.A)
    eye = np.eye(rule.A, dtype=np.int64)
    raw = (
        counts[ps.pair_c] - counts[ps.pair_a]
        - eye[ps.center[ps.pair_c]] + eye[ps.center[ps.pair_a]]
    )
    nonzero = np.any(raw != 0, axis=1)
    raw, wa, wc = raw[nonzero], ps.pair_a[nonzero], ps.pair_c[nonzero]
    if len(raw) == 0:
        return ConstraintRows(np.zeros((0, rule.A), dtype=np.int64), np.zeros((0, 2), dtype=np.int64), ps)
    rows, first = np.unique(raw, axis=0, return_index=True)
    return ConstraintRows(rows, np.stack([wa[first], wc[first]], axis=1), ps)


def _violates(phi: Quantity, row) -> bool:
    return not phi.is_zero(phi.dot(row))


@dataclass(frozen=True)
class Counterexample:
    """Two patterns over B+B (aligned with ``offsets``) differing only at the origin."""

    offsets: tuple
    a: tuple[int, ...]
    c: tuple[int, ...]
    lhs: object  # sum phi F(c) - sum phi F(a)
    rhs: object  # phi(c_0) - phi(a_0)

    def to_json(self, phi: Quantity) -> dict:
        return {
            "offsets": [list(b) for b in self.offsets],
            "a": list(self.a),
            "c": list(self.c),
            "output_difference": format_value(phi, self.lhs),
            "center_difference": format_value(phi, self.rhs),
        }


@dataclass(frozen=True)
class Verdict:
    """Outcome of a conservation test.

    For the perturbation test ``holds`` reports the pattern identity alone.
    That identity pins down how the total changes up to a fixed amount per
    cell, ``drift`` = phi(f(0,...,0)) - phi(0). Over the rationals a nonzero
    drift is impossible once the identity holds, but over Z/m it is not, so
    ``conserved`` also asks for zero drift.
    """

    holds: bool
    counterexample: Counterexample | TorusConfig | None = None
    vacuum_empty: bool = False
    vacuum_preserving: bool = True
    drift_free: bool = True
    drift: object = None

    def __bool__(self) -> bool:
        return self.holds

    @property
    def conserved(self) -> bool:
        return self.holds and self.drift_free


def _check_alphabet(rule: LocalRule, phi: Quantity) -> None:
    if phi.size != rule.A:
        raise ValueError(f"quantity has {phi.size} values but the alphabet has {rule.A} symbols")


def drift_row(rule: LocalRule) -> tuple[int, ...]:
    """Row r with r . phi = phi(f(0,...,0)) - phi(0)."""
    row = [0] * rule.A
    row[rule.table[0]] += 1
    row[0] -= 1
    return tuple(row)


def finitary_holds(rule: LocalRule, phi: Quantity) -> Verdict:
    """Single-site perturbation test for conservation of phi under the rule."""
    _check_alphabet(rule, phi)
    cr = constraint_rows(rule)
    extra = dict(
        vacuum_empty=not vacuum_set(phi),
        vacuum_preserving=is_vacuum_preserving(rule, phi),
        drift_free=not _violates(phi, drift_row(rule)),
        drift=phi.dot(drift_row(rule)),
    )
    for row, (ia, ic) in zip(cr.rows, cr.witness):
        if _violates(phi, row):
            ps = cr.system
            a, c = ps.pattern(ia), ps.pattern(ic)
            pos = patch_index(rule.nbhd, ps.outer).positions
            fa = [rule.table[encode([a[k] for k in pos[v]], rule.A)] for v in range(len(rule.nbhd))]
            fc = [rule.table[encode([c[k] for k in pos[v]], rule.A)] for v in range(len(rule.nbhd))]
            lhs = phi.add(phi.sum(fc), phi.scale(-1, phi.sum(fa)))
            o = ps.outer.origin_index
            rhs = phi.add(phi(c[o]), phi.scale(-1, phi(a[o])))
            return Verdict(False, Counterexample(ps.outer.offsets, a, c, lhs, rhs), **extra)
    return Verdict(True, None, **extra)


# --- the solution space -------------------------------------------------------

@dataclass(frozen=True)
class ConservationBasis:
    """Generators of all conserved phi; the constant quantity comes first and is flagged trivial."""

    alphabet: int
    domain: str  # RATIONAL or MOD
    modulus: int | None
    vectors: tuple[tuple, ...]
    trivial: tuple[bool, ...]
    free: bool = True  # False when the mod-m solution module needs non-independent generators
    rows: tuple[tuple[int, ...], ...] = field(default=(), repr=False)

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def contains(self, phi: Quantity) -> bool:
        """True iff phi satisfies every constraint (equivalently, lies in the span)."""
        if phi.domain == VECTOR:
            return all(self.contains(Quantity.rational(c)) for c in phi.components())
        if self.domain == MOD:
            vals = [int(v) % self.modulus for v in (phi.values if phi.domain == MOD else _as_ints(phi, self.modulus))]
            return all(sum(r * v for r, v in zip(row, vals)) % self.modulus == 0 for row in self.rows)
        return all(sum(r * v for r, v in zip(row, phi.values)) == 0 for row in self.rows)

    def in_span(self, values: Sequence) -> bool:
        """Span membership computed from the basis vectors alone."""
        if self.domain == MOD and not self.free:
            return tuple(int(v) % self.modulus for v in values) in _module_span(self.vectors, self.modulus)
        base = linalg.rank(self.vectors, self.alphabet, self.modulus)
        return linalg.rank(list(self.vectors) + [list(values)], self.alphabet, self.modulus) == base

    def quantities(self) -> list[Quantity]:
        if self.domain == MOD:
            return [Quantity.mod(v, self.modulus) for v in self.vectors]
        return [Quantity.rational(v) for v in self.vectors]


def _as_ints(phi: Quantity, m: int):
    out = []
    for v in phi.values:
        if v.denominator != 1:
            raise ValueError("cannot reduce a non-integer value mod m")
        out.append(int(v) % m)
    return out


def conserves(rule: LocalRule, phi: Quantity) -> bool:
    """Pattern identity plus zero drift: the total is invariant on every torus."""
    return finitary_holds(rule, phi).conserved


def conservation_basis(rule: LocalRule, modulus: int | None = None) -> ConservationBasis:
    """Exact basis of the conserved quantities over Q (default) or Z/m.

    The drift row is redundant over Q and is included so that the same
    system is solved in both settings.
    """
    A = rule.A
    rows = [tuple(int(x) for x in r) for r in constraint_rows(rule).rows]
    if any(drift_row(rule)):
        rows.append(drift_row(rule))
    if modulus is not None:
        rows = linalg.dedupe_rows([[x % modulus for x in r] for r in rows])
    if modulus is not None and not linalg._is_prime(modulus):
        return _composite_basis(rule, rows, modulus)
    one = 1 if modulus is not None else Fraction(1)
    # complement of the constants: quantities vanishing on symbol 0
    pinned = list(rows) + [[1] + [0] * (A - 1)]
    rest = linalg.nullspace(pinned, A, modulus)
    if rest:
        rest, _ = linalg.rref(rest, A, modulus)
    vectors = [tuple([one] * A)] + [tuple(v) for v in rest]
    return ConservationBasis(
        A,
        MOD if modulus is not None else RATIONAL,
        modulus,
        tuple(vectors),
        tuple([True] + [False] * len(rest)),
        True,
        tuple(rows),
    )


def _module_span(gens, m: int) -> set[tuple]:
    n = len(gens[0]) if gens else 0
    span = {(0,) * n}
    for g in gens:
        span = {tuple((s[i] + k * g[i]) % m for i in range(n)) for s in span for k in range(m)}
    return span


def _composite_basis(rule: LocalRule, rows, m: int) -> ConservationBasis:
    """Generators of the solution module over Z/m for composite m, by enumeration."""
    A = rule.A
    if m**A > scan_cap():
        raise CapExceeded(f"{m}^{A} candidate quantities exceed the scan cap")
    cand = all_patterns(m, A)
    ok = np.ones(len(cand), dtype=bool)
    for r in rows:
        ok &= (cand @ np.asarray(r, dtype=np.int64)) % m == 0
    sols = {tuple(int(x) for x in v) for v in cand[ok]}
    gens = [(1,) * A]
    span = _module_span(gens, m)
    for v in sorted(sols):
        if v not in span:
            gens.append(v)
            span = _module_span(gens, m)
        if span == sols:
            break
    return ConservationBasis(
        A, MOD, m, tuple(gens), tuple([True] + [False] * (len(gens) - 1)), False, tuple(rows)
    )


# --- quotient (torus) check ---------------------------------------------------

def _torus_batch_rows(rule: LocalRule, cells: np.ndarray, moduli) -> np.ndarray:
    """Symbol-count differences count(F(a)) - count(a) for a batch of torus configurations."""
    n = cells.shape[0]
    grid = cells.reshape((n, *moduli))
    axes = tuple(range(1, len(moduli) + 1))
    idx = np.zeros_like(grid)
    for b in rule.nbhd.offsets:
        idx = idx * rule.A + np.roll(grid, tuple(-x for x in b), axis=axes)
    out = rule.array[idx].reshape(n, -1)
    flat = cells.reshape(n, -1)
    diff = np.zeros((n, rule.A), dtype=np.int64)
    for s in range(rule.A):
        diff[:, s] = (out == s).sum(axis=1) - (flat == s).sum(axis=1)
    return diff


def torus_conserved(
    rule: LocalRule,
    phi: Quantity,
    moduli: Sequence[int],
    mode: str = "exhaustive",
    samples: int = 1000,
    rng: np.random.Generator | None = None,
    batch: int = 1 << 14,
) -> Verdict:
    """Check that sum phi is invariant under one step on the torus with the given moduli."""
    _check_alphabet(rule, phi)
    moduli = tuple(int(m) for m in moduli)
    TorusConfig(moduli, np.zeros(moduli, dtype=np.int64)).check_against(rule.nbhd)
    ncells = int(np.prod(moduli))
    if mode == "exhaustive":
        total = rule.A**ncells
        if total > scan_cap():
            raise CapExceeded(f"{rule.A}^{ncells} torus configurations exceed the scan cap")
        chunks = (
            _index_block(start, min(start + batch, total), rule.A, ncells)
            for start in range(0, total, batch)
        )
    elif mode == "sampled":
        rng = rng or np.random.default_rng(0)
        chunks = (rng.integers(0, rule.A, size=(samples, ncells)),)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for cells in chunks:
        diff = _torus_batch_rows(rule, cells, moduli)
        uniq, first = np.unique(diff, axis=0, return_index=True)
        for row, i in zip(uniq, first):
            if _violates(phi, row):
                return Verdict(False, TorusConfig(moduli, cells[i]), not vacuum_set(phi))
    return Verdict(True, None, not vacuum_set(phi))


def _index_block(start: int, stop: int, A: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), n), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        idx, out[:, i] = np.divmod(idx, A)
    return out


# --- nonnegative quantities on arbitrary configurations ----------------------

@dataclass(frozen=True)
class SandwichResult:
    holds: bool
    interior_total: Fraction
    window_total: Fraction
    closure_total: Fraction

    def __bool__(self) -> bool:
        return self.holds

    @property
    def totals(self) -> tuple:
        return self.interior_total, self.window_total, self.closure_total


def sandwich_check(rule: LocalRule, phi: Quantity, a, w) -> SandwichResult:
    """Check sum phi(a)|int W <= sum phi(F a)|W <= sum phi(a)|cl W."""
    if phi.domain != RATIONAL:
        raise ValueError("requires a scalar rational quantity")
    if any(v < 0 for v in phi.values):
        raise ValueError("requires nonnegative quantity")
    w = Window(w)
    after = step(rule, a)
    lo = total_window(phi, a, interior(w, rule.nbhd))
    mid = total_window(phi, after, w)
    hi = total_window(phi, a, closure(w, rule.nbhd))
    return SandwichResult(lo <= mid <= hi, lo, mid, hi)


# --- spatial averages ---------------------------------------------------------

def cesaro_average(phi: Quantity, a):
    """Exact limit of (1/|I_n|) sum_{i in I_n} phi(a_i) over boxes I_n = [0..n]^D."""
    if phi.domain == MOD:
        raise ValueError("spatial averages need rational values")
    if isinstance(a, TorusConfig):
        cells = [int(c) for c in a.cells.ravel()]
    elif isinstance(a, PeriodicConfig):
        cells = list(a.core)
    elif isinstance(a, Configuration):
        if phi.is_zero(phi(a.background)):
            return phi.zero()
        cells = [a.background]
    else:
        raise TypeError("cesaro_average needs a periodic or torus configuration")
    s = phi.sum(cells)
    if phi.domain == VECTOR:
        return tuple(c / len(cells) for c in s)
    return s / len(cells)


def cesaro_orbit(rule: LocalRule, phi: Quantity, a, steps: int) -> list:
    """Averages of a, F(a), ..., F^steps(a)."""
    out = [cesaro_average(phi, a)]
    for _ in range(steps):
        a = step(rule, a)
        out.append(cesaro_average(phi, a))
    return out


# --- measure-based conditions ------------------------------------------------

def uniform_sums(rule: LocalRule, phi: Quantity):
    """(sum over all B-patterns of phi(f(p)), A^(|B|-1) * sum over symbols of phi)."""
    _check_alphabet(rule, phi)
    counts = np.bincount(rule.array, minlength=rule.A)
    lhs = phi.dot(counts)
    rhs = phi.scale(rule.A ** (len(rule.nbhd) - 1), phi.sum(range(rule.A)))
    return lhs, rhs


def uniform_sum_filter(rule: LocalRule, phi: Quantity) -> bool:
    """Necessary condition from the uniform Bernoulli measure."""
    lhs, rhs = uniform_sums(rule, phi)
    return lhs == rhs


@lru_cache(maxsize=32)
def marginal_basis(A: int, length: int) -> tuple[tuple[Fraction, ...], ...]:
    """Basis of signed measures on words of the given length with equal left/right marginals.

    A measure nu qualifies iff for every word u of length ``length - 1``,
    sum_s nu(s u) = sum_s nu(u s).
    """
    if length < 1:
        raise ValueError("word length must be positive")
    n = A**length
    if length == 1:
        return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
    rows = []
    for u in range(A ** (length - 1)):
        row = [0] * n
        for s in range(A):
            row[s * A ** (length - 1) + u] += 1  # s.u
            row[u * A + s] -= 1  # u.s
        rows.append(row)
    return tuple(tuple(v) for v in linalg.nullspace(rows, n))


@dataclass(frozen=True)
class MarginalResult:
    holds: bool
    dimension: int
    failures: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.holds


def marginal_invariance_check(rule: LocalRule, phi: Quantity) -> MarginalResult:
    """Check <d phi, nu> = 0 for every nu in a basis of consistent word measures (1-D)."""
    if rule.nbhd.dimension != 1:
        raise ValueError("marginal test is implemented for D = 1 only")
    if phi.domain == MOD:
        raise ValueError("marginal test needs rational values")
    _check_alphabet(rule, phi)
    (lo,), (hi,) = rule.nbhd.extent()
    box = Neighborhood.box(max(-lo, hi))
    r = rule if rule.nbhd == box else rule.widen(box)
    length = len(box)
    basis = marginal_basis(r.A, length)
    center = all_patterns(r.A, length)[:, box.origin_index]
    comps = phi.components()
    failures = []
    for k, nu in enumerate(basis):
        for comp in comps:
            total = sum(
                (w * (comp[int(out)] - comp[int(c)]) for w, out, c in zip(nu, r.array, center) if w),
                Fraction(0),
            )
            if total != 0:
                failures.append(k)
                break
    return MarginalResult(not failures, len(basis), tuple(failures))


# --- reporting ----------------------------------------------------------------

def analyze(rule: LocalRule, modulus: int | None = None, torus_samples: int = 2000) -> dict:
    """Conservation report used by the CLI ``analyze`` command."""
    basis = conservation_basis(rule, modulus)
    q = basis.quantities()
    report: dict = {
        "alphabet": rule.A,
        "dimension": rule.nbhd.dimension,
        "neighborhood_size": len(rule.nbhd),
        "domain": basis.domain,
        "modulus": modulus,
        "basis_dimension": basis.dimension,
        "basis": [[format_value(p, v) for v in p.values] for p in q],
        "trivial": list(basis.trivial),
        "free": basis.free,
        "constraint_rows": len(basis.rows),
    }
    ident = Quantity.identity(rule.A, modulus)
    report["identity_conserved"] = conserves(rule, ident)
    checks = []
    for p in q:
        entry = {"quantity": [format_value(p, v) for v in p.values]}
        v = finitary_holds(rule, p)
        entry["finitary"] = v.holds
        entry["drift_free"] = v.drift_free
        entry["uniform_sum_filter"] = uniform_sum_filter(rule, p)
        if p.domain == RATIONAL and rule.nbhd.dimension == 1:
            entry["marginal"] = bool(marginal_invariance_check(rule, p))
        M = torus_for(rule.nbhd)
        moduli = (M,) * rule.nbhd.dimension
        mode = "exhaustive" if rule.A ** (M**rule.nbhd.dimension) <= min(scan_cap(), 1 << 16) else "sampled"
        entry["torus"] = {
            "moduli": list(moduli),
            "mode": mode,
            "conserved": bool(torus_conserved(rule, p, moduli, mode, samples=torus_samples)),
        }
        checks.append(entry)
    report["checks"] = checks
    report["all_checks_pass"] = all(
        c["finitary"] and c["drift_free"] and c["uniform_sum_filter"] and c.get("marginal", True) and c["torus"]["conserved"]
        for c in checks
    )
    return report

