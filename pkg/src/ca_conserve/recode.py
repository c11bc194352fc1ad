"""Recoding quantities to nonnegative values and to natural-number particle counts.

Both transformations keep the conserved status of phi under every rule: the
first adds a constant, the second composes with a group isomorphism onto
Z^K' (then adds a constant and changes basis so the coordinates are in N^K').
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from . import linalg
from .quantity import RATIONAL, VECTOR, Quantity, vacuum_set


def recode_nonneg(phi: Quantity) -> Quantity:
    """phi - min(phi), taken componentwise for vector quantities."""
    if phi.domain == RATIONAL:
        low = min(phi.values)
        return Quantity.rational(v - low for v in phi.values)
    if phi.domain == VECTOR:
        lows = [min(c) for c in phi.components()]
        return Quantity.vector(tuple(x - l for x, l in zip(v, lows)) for v in phi.values)
    raise ValueError("recoding needs an ordered (rational) domain")


@dataclass(frozen=True)
class IntegerRecoding:
    """Result of :func:`recode_integer`.

    ``quantity`` holds the N^K' values (scalar when K' <= 1). ``basis`` lists the
    rational vectors spanning the subgroup generated by the differences of phi,
    and ``offset`` is the value mapped to the origin, so that
    phi(a) = offset + sum_k quantity(a)_k * basis[k].
    """

    quantity: Quantity
    rank: int
    basis: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]
    vacuum_before: frozenset
    vacuum_after: frozenset


def _scalar_form(coords) -> Quantity:
    return Quantity.rational(c[0] if c else 0 for c in coords)


def recode_integer(phi: Quantity) -> IntegerRecoding:
    """Express phi in N^K' through an isomorphism of the subgroup it generates."""
    if phi.domain == RATIONAL:
        vecs = [(v,) for v in phi.values]
    elif phi.domain == VECTOR:
        vecs = [tuple(v) for v in phi.values]
    else:
        raise ValueError("recoding needs rational values")
    if not phi.is_nonnegative():
        raise ValueError("recode_integer expects a nonnegative quantity; apply recode_nonneg first")
    K = len(vecs[0])
    # anchor: lexicographically smallest value, a vertex of the convex hull
    anchor = min(vecs)
    denom = 1
    for v in vecs:
        for x in v:
            denom = linalg.lcm(denom, x.denominator)
    ints = [[int((x - y) * denom) for x, y in zip(v, anchor)] for v in vecs]
    basis = linalg.hermite_rows(ints)
    rank = len(basis)
    coords = [linalg.solve_in_basis(basis, v) if rank else [] for v in ints]
    if rank:
        U = _positive_unimodular(basis, ints, coords)
        coords = [[sum(u * c for u, c in zip(row, cv)) for row in U] for cv in coords]
        # new basis vectors: rows of U^{-T} applied to the Hermite basis
        Uinv = linalg.integer_inverse(U)
        new_basis = [
            [sum(Uinv[i][k] * basis[i][j] for i in range(rank)) for j in range(K)]
            for k in range(rank)
        ]
    else:
        new_basis = []
    if rank <= 1:
        q = _scalar_form(coords)
    else:
        q = Quantity.vector(coords)
    return IntegerRecoding(
        q,
        rank,
        tuple(tuple(Fraction(x, denom) for x in b) for b in new_basis),
        tuple(anchor),
        vacuum_set(phi),
        vacuum_set(q),
    )


def _positive_unimodular(basis, ints, coords):
    """A unimodular integer matrix U with U c >= 0 for every coordinate vector c.

    The differences from the lexicographic minimum span a pointed cone, so the
    weighted functional w = (N^{K-1}, ..., N, 1) is positive on every nonzero
    one once N exceeds every |entry|. Its primitive image in basis
    coordinates is completed to a unimodular matrix whose remaining rows are
    then pushed toward it until they are nonnegative on the cone.
    """
    K = len(ints[0])
    N = 1 + max(abs(x) for v in ints for x in v)
    w = [N ** (K - 1 - j) for j in range(K)]
    omega = [sum(wj * bj for wj, bj in zip(w, b)) for b in basis]
    g = 0
    for x in omega:
        g = gcd(g, x)
    omega = [x // g for x in omega]
    nonzero = [c for c in coords if any(c)]
    for c in nonzero:
        if sum(o * x for o, x in zip(omega, c)) <= 0:
            raise AssertionError("functional is not positive on the cone")
    U = linalg.complete_to_unimodular(omega)
    for i in range(1, len(U)):
        k = 0
        for c in nonzero:
            val = sum(u * x for u, x in zip(U[i], c))
            pos = sum(o * x for o, x in zip(omega, c))
            if val < 0:
                k = max(k, -(val // pos))
        U[i] = [u + k * o for u, o in zip(U[i], omega)]
    return U


def recode_both(phi: Quantity) -> tuple[Quantity, IntegerRecoding]:
    nonneg = recode_nonneg(phi)
    return nonneg, recode_integer(nonneg)
