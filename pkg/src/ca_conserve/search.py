"""Enumerating every local rule on a given neighborhood that conserves a given quantity."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np

from .conservation import CapExceeded, finitary_holds, pair_system, scan_cap, uniform_sum_filter
from .lattice import Neighborhood
from .quantity import MOD, RATIONAL, Quantity
from .rules import LocalRule, decode

log = logging.getLogger(__name__)

AUTO, EXHAUSTIVE, BACKTRACK = "auto", "exhaustive", "backtrack"


def _integer_form(phi: Quantity) -> tuple[np.ndarray, int | None]:
    """phi as a (K, A) integer matrix with the same conservation laws, plus its modulus.

    Rational components are scaled by the lcm of their denominators, which
    leaves every linear constraint's zero set unchanged.
    """
    if phi.domain == MOD:
        return np.array([[int(v) for v in phi.values]], dtype=np.int64), phi.modulus
    comps = [phi.values] if phi.domain == RATIONAL else phi.components()
    rows = []
    for comp in comps:
        den = 1
        for v in comp:
            den = den * v.denominator // gcd(den, v.denominator)
        rows.append([int(v * den) for v in comp])
    return np.array(rows, dtype=np.int64), None


def _space_size(A: int, n: int) -> int:
    return A ** (A**n)


# --- constraint templates -------------------------------------------------------

@dataclass(frozen=True)
class Template:
    """sum(sign * phi(t[index])) must equal phi(hi) - phi(lo) for one perturbed pair."""

    terms: tuple[tuple[int, int], ...]  # (table index, net multiplicity), nonzero multiplicities only
    hi: int
    lo: int

    @property
    def last(self) -> int:
        return max((i for i, _ in self.terms), default=-1)


@lru_cache(maxsize=16)
def templates(nbhd: Neighborhood, A: int) -> tuple[tuple[Template, ...], ...]:
    """Templates grouped by the highest table index they involve (index -1 for constant ones)."""
    ps = pair_system(nbhd, A)
    seen = set()
    for a, c in zip(ps.pair_a, ps.pair_c):
        mult: dict[int, int] = {}
        for i in ps.local_index[c]:
            mult[int(i)] = mult.get(int(i), 0) + 1
        for i in ps.local_index[a]:
            mult[int(i)] = mult.get(int(i), 0) - 1
        terms = tuple(sorted((i, m) for i, m in mult.items() if m))
        seen.add(Template(terms, int(ps.center[c]), int(ps.center[a])))
    n = A ** len(nbhd)
    groups: list[list[Template]] = [[] for _ in range(n + 1)]
    for t in sorted(seen, key=lambda t: (t.last, t.terms, t.hi, t.lo)):
        groups[t.last + 1].append(t)
    return tuple(tuple(g) for g in groups)


# --- backtracking -----------------------------------------------------------------

def _backtrack(nbhd: Neighborhood, A: int, phi: Quantity, prefix: tuple[int, ...]) -> list[tuple[int, ...]]:
    """All conserving tables extending ``prefix``, by depth-first assignment in index order."""
    mat, m = _integer_form(phi)
    groups = templates(nbhd, A)
    n = A ** len(nbhd)
    K = mat.shape[0]
    cols = [tuple(int(x) for x in mat[:, s]) for s in range(A)]
    compiled = [
        [(t.terms, tuple(cols[t.hi][k] - cols[t.lo][k] for k in range(K))) for t in g]
        for g in groups
    ]
    for _, rhs in compiled[0]:
        if any((r % m if m else r) for r in rhs):
            return []

    table = [0] * n
    found: list[tuple[int, ...]] = []

    def ok(idx: int) -> bool:
        if idx == 0:
            # no drift: the all-zero pattern keeps phi(0)
            for k in range(K):
                d = cols[table[0]][k] - cols[0][k]
                if (d % m) if m else d:
                    return False
        for terms, rhs in compiled[idx + 1]:
            for k in range(K):
                s = -rhs[k]
                for i, mult in terms:
                    s += mult * cols[table[i]][k]
                if (s % m) if m else s:
                    return False
        return True

    def descend(idx: int) -> None:
        if idx == n:
            found.append(tuple(table))
            return
        for sym in range(A):
            table[idx] = sym
            if ok(idx):
                descend(idx + 1)

    for idx, sym in enumerate(prefix):
        table[idx] = sym
        if not ok(idx):
            return []
    descend(len(prefix))
    return found


def _shard_prefixes(A: int, n: int, shards: int) -> list[tuple[int, ...]]:
    k = 0
    while A**k < shards and k < n:
        k += 1
    return [decode(i, A, k) for i in range(A**k)]


def _run_backtrack(nbhd: Neighborhood, A: int, phi: Quantity, shards: int) -> list[tuple[int, ...]]:
    n = A ** len(nbhd)
    prefixes = _shard_prefixes(A, n, shards)
    if shards <= 1:
        out = []
        for p in prefixes:
            out.extend(_backtrack(nbhd, A, phi, p))
        return out
    with ProcessPoolExecutor(max_workers=shards) as pool:
        parts = pool.map(_backtrack, *zip(*[(nbhd, A, phi, p) for p in prefixes]))
        return [t for part in parts for t in part]


# --- exhaustive scan ---------------------------------------------------------------

def _table_block(start: int, stop: int, A: int, n: int) -> np.ndarray:
    """Tables with codes start..stop-1; entry k is digit k of the code in base A."""
    codes = np.arange(start, stop, dtype=np.int64)
    return np.stack([(codes // A**k) % A for k in range(n)], axis=1)


def _scan(nbhd: Neighborhood, A: int, phi: Quantity, start: int, stop: int) -> tuple[list, int]:
    n = A ** len(nbhd)
    mat, m = _integer_form(phi)
    tables = _table_block(start, stop, A, n)
    lhs = mat[:, tables].sum(axis=2).T  # (N, K)
    rhs = A ** (len(nbhd) - 1) * mat.sum(axis=1)
    diff = lhs - rhs
    passing = np.all((diff % m == 0) if m else (diff == 0), axis=1)
    out = []
    for t in tables[passing]:
        rule = LocalRule(A, nbhd, tuple(int(x) for x in t))
        if finitary_holds(rule, phi).conserved:
            out.append(rule.table)
    return out, int(passing.sum())


def _run_exhaustive(nbhd: Neighborhood, A: int, phi: Quantity, shards: int, block: int = 1 << 16):
    total = _space_size(A, len(nbhd))
    bounds = [(s, min(s + block, total)) for s in range(0, total, block)]
    found, passed = [], 0
    if shards <= 1:
        results = (_scan(nbhd, A, phi, s, e) for s, e in bounds)
        for tabs, p in results:
            found.extend(tabs)
            passed += p
    else:
        with ProcessPoolExecutor(max_workers=shards) as pool:
            args = [(nbhd, A, phi, s, e) for s, e in bounds]
            for tabs, p in pool.map(_scan, *zip(*args)):
                found.extend(tabs)
                passed += p
    return found, passed


# --- public API ----------------------------------------------------------------------

def enumerate_conserving(
    alphabet: int,
    nbhd: Neighborhood,
    phi: Quantity,
    cap: int | None = None,
    mode: str = AUTO,
    shards: int = 1,
) -> list[LocalRule]:
    """Every rule on ``nbhd`` conserving ``phi``, sorted by table code.

    Conserving means the perturbation identity holds with zero drift, so
    over Z/m rules that add a fixed amount per cell each step are left out.

    ``auto`` scans exhaustively when the rule space fits under ``cap`` and
    backtracks otherwise.
    """
    if phi.size != alphabet:
        raise ValueError("phi must assign a value to every symbol")
    cap = scan_cap() if cap is None else cap
    n = alphabet ** len(nbhd)
    fits = _space_size(alphabet, len(nbhd)) <= cap
    if mode == AUTO:
        mode = EXHAUSTIVE if fits else BACKTRACK
    if mode == EXHAUSTIVE:
        if not fits:
            raise CapExceeded(
                f"{alphabet}^{n} rule tables exceed the cap {cap}; use backtracking"
            )
        tables, passed = _run_exhaustive(nbhd, alphabet, phi, shards)
        log.info("exhaustive scan: %d tables passed the uniform-sum filter", passed)
    elif mode == BACKTRACK:
        tables = _run_backtrack(nbhd, alphabet, phi, shards)
    else:
        raise ValueError(f"unknown search mode {mode!r}")
    rules = [LocalRule(alphabet, nbhd, t) for t in tables]
    return sorted(rules, key=LocalRule.code)


def prefilter_stats(alphabet: int, nbhd: Neighborhood, phi: Quantity, cap: int | None = None) -> dict:
    """How many rule tables pass the uniform-sum filter versus the full conservation test.

    Soundness is checked against the backtracking search, which never consults
    the filter: any conserving table it finds that the filter would reject is
    listed under ``filter_unsound``.
    """
    cap = scan_cap() if cap is None else cap
    total = _space_size(alphabet, len(nbhd))
    if total > cap:
        raise CapExceeded(f"{total} rule tables exceed the cap {cap}")
    tables, passed = _run_exhaustive(nbhd, alphabet, phi, 1)
    unfiltered = _run_backtrack(nbhd, alphabet, phi, 1)
    unsound = [
        list(t) for t in unfiltered if not uniform_sum_filter(LocalRule(alphabet, nbhd, t), phi)
    ]
    return {
        "rules": total,
        "filter_pass": passed,
        "filter_reject": total - passed,
        "conserving": len(unfiltered),
        "filter_unsound": sorted(unsound),
    }
