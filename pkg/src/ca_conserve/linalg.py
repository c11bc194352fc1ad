"""Exact linear algebra over Q, GF(p), and Z (small dense matrices)."""
from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Sequence

Matrix = list[list]


def _is_prime(m: int) -> bool:
    if m < 2:
        return False
    i = 2
    while i * i <= m:
        if m % i == 0:
            return False
        i += 1
    return True


def rref(rows: Sequence[Sequence], ncols: int, modulus: int | None = None) -> tuple[Matrix, list[int]]:
    """Reduced row-echelon form; returns (nonzero rows, pivot columns).

    With ``modulus`` the arithmetic is in GF(modulus), which must be prime.
    """
    if modulus is not None:
        if not _is_prime(modulus):
            raise ValueError("row reduction mod m needs a prime modulus")
        m = [[int(x) % modulus for x in r] for r in rows]
    else:
        m = [[Fraction(x) for x in r] for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        if modulus is not None:
            inv = pow(m[r][c], -1, modulus)
            m[r] = [(x * inv) % modulus for x in m[r]]
        else:
            p = m[r][c]
            m[r] = [x / p for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                if modulus is not None:
                    m[i] = [(x - f * y) % modulus for x, y in zip(m[i], m[r])]
                else:
                    m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence], ncols: int, modulus: int | None = None) -> int:
    return len(rref(rows, ncols, modulus)[1])


def nullspace(rows: Sequence[Sequence], ncols: int, modulus: int | None = None) -> Matrix:
    """Basis of {x : rows . x = 0}, one vector per free column (free entry = 1)."""
    red, pivots = rref(rows, ncols, modulus)
    zero, one = (0, 1) if modulus is not None else (Fraction(0), Fraction(1))
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [zero] * ncols
        v[fc] = one
        for row, pc in zip(red, pivots):
            v[pc] = (-row[fc]) % modulus if modulus is not None else -row[fc]
        basis.append(v)
    return basis


def dedupe_rows(rows) -> list[tuple]:
    """Drop zero rows and exact duplicates, preserving first-seen order."""
    seen = set()
    out = []
    for r in rows:
        t = tuple(int(x) for x in r)
        if any(t) and t not in seen:
            seen.add(t)
            out.append(t)
    return out


# --- integer lattices -------------------------------------------------------

def hermite_rows(rows: Sequence[Sequence[int]]) -> Matrix:
    """Row-style Hermite normal form: a basis of the row lattice, positive pivots, reduced above."""
    m = [list(map(int, r)) for r in rows if any(r)]
    if not m:
        return []
    ncols = len(m[0])
    r = 0
    for c in range(ncols):
        # Euclid down column c among rows r..
        while True:
            nz = [i for i in range(r, len(m)) if m[i][c] != 0]
            if not nz:
                break
            i0 = min(nz, key=lambda i: abs(m[i][c]))
            m[r], m[i0] = m[i0], m[r]
            done = True
            for i in range(r + 1, len(m)):
                if m[i][c]:
                    q = m[i][c] // m[r][c]
                    m[i] = [x - q * y for x, y in zip(m[i], m[r])]
                    if m[i][c]:
                        done = False
            if done:
                break
        if r < len(m) and m[r][c] != 0:
            if m[r][c] < 0:
                m[r] = [-x for x in m[r]]
            for i in range(r):
                q = m[i][c] // m[r][c]
                if q:
                    m[i] = [x - q * y for x, y in zip(m[i], m[r])]
            r += 1
            if r == len(m):
                break
    return [row for row in m[:r]]


def solve_in_basis(basis: Matrix, v: Sequence[int]) -> list[int]:
    """Integer coordinates of ``v`` in a Hermite basis (raises if v is outside the lattice)."""
    v = list(map(int, v))
    coords = []
    for row in basis:
        c = next(j for j, x in enumerate(row) if x)
        q, rem = divmod(v[c], row[c])
        if rem:
            raise ValueError("vector not in lattice")
        coords.append(q)
        v = [x - q * y for x, y in zip(v, row)]
    if any(v):
        raise ValueError("vector not in lattice")
    return coords


def complete_to_unimodular(w: Sequence[int]) -> Matrix:
    """An integer matrix with determinant +-1 whose first row is the primitive vector ``w``."""
    n = len(w)
    w = list(map(int, w))
    g = 0
    for x in w:
        g = gcd(g, x)
    if g != 1:
        raise ValueError("vector is not primitive")
    # column operations V with w V = e_1; then rows of V^{-1} contain w first
    V = [[int(i == j) for j in range(n)] for i in range(n)]
    row = w[:]
    while sum(1 for x in row if x) > 1 or row[0] == 0:
        nz = [j for j, x in enumerate(row) if x]
        j0 = min(nz, key=lambda j: abs(row[j]))
        for j in nz:
            if j != j0:
                q = row[j] // row[j0]
                row[j] -= q * row[j0]
                for i in range(n):
                    V[i][j] -= q * V[i][j0]
        if sum(1 for x in row if x) == 1 and row[0] == 0:
            j = next(j for j, x in enumerate(row) if x)
            row[0], row[j] = row[j], row[0]
            for i in range(n):
                V[i][0], V[i][j] = V[i][j], V[i][0]
    if row[0] == -1:
        for i in range(n):
            V[i][0] = -V[i][0]
    return integer_inverse(V)


def integer_inverse(M: Matrix) -> Matrix:
    """Inverse of a unimodular integer matrix."""
    n = len(M)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    red, piv = rref(aug, 2 * n)
    if piv[:n] != list(range(n)):
        raise ValueError("matrix is singular")
    inv = [[x for x in row[n:]] for row in red]
    if any(x.denominator != 1 for row in inv for x in row):
        raise ValueError("matrix is not unimodular")
    return [[int(x) for x in row] for row in inv]


def lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b) if a and b else max(a, b)
