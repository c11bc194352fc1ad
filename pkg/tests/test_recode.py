from fractions import Fraction
from itertools import combinations
from math import gcd

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from ca_conserve.conservation import conservation_basis, finitary_holds
from ca_conserve.lattice import Neighborhood
from ca_conserve.quantity import Quantity
from ca_conserve.recode import recode_both, recode_integer, recode_nonneg
from ca_conserve.rules import from_function, from_wolfram, random_rule

fractions = st.fractions(min_value=-4, max_value=4, max_denominator=6)


def _vals(q):
    return [v for v in q.values]


def test_nonneg_examples():
    assert _vals(recode_nonneg(Quantity.rational([-2, 0, 3]))) == [0, 2, 5]
    assert _vals(recode_nonneg(Quantity.rational(["-1/2", "1/2"]))) == [0, 1]
    same = Quantity.rational([0, 3, 1])
    assert recode_nonneg(same) == same


def test_nonneg_vector_is_componentwise():
    q = recode_nonneg(Quantity.vector([(1, -1), (0, 2), (3, 0)]))
    assert q.values == ((1, 0), (0, 3), (3, 1))


def test_nonneg_rejects_modular():
    with pytest.raises(ValueError):
        recode_nonneg(Quantity.mod([0, 1], 2))


@pytest.mark.parametrize(
    "phi, expect",
    [
        (["0", "1/2", "3/2"], [0, 1, 3]),
        ([0, 2, 4], [0, 1, 2]),
        ([0, 1], [0, 1]),
        (["1/2", "3/2", "5/2"], [0, 1, 2]),
        ([0, 2, 4, 6], [0, 1, 2, 3]),
        ([5, 5], [0, 0]),
    ],
)
def test_integer_examples(phi, expect):
    rec = recode_integer(Quantity.rational(phi))
    assert _vals(rec.quantity) == expect
    assert rec.rank == (0 if len(set(expect)) == 1 else 1)


def test_integer_rejects_negative_input():
    with pytest.raises(ValueError, match="nonnegative"):
        recode_integer(Quantity.rational([-1, 1]))


def test_scale_factor_for_scalars():
    rec = recode_integer(Quantity.rational(["0", "1/2", "3/2"]))
    assert rec.basis == ((Fraction(1, 2),),) and rec.offset == (0,)


def _lattice_generated(points, rank):
    """True when the integer points generate all of Z^rank (gcd of maximal minors is 1)."""
    if rank == 0:
        return all(not any(p) for p in points)
    g = 0
    for rows in combinations(points, rank):
        g = gcd(g, int(sympy.Matrix(rows).det()))
    return g == 1


def _as_tuple(v):
    return tuple(v) if isinstance(v, tuple) else (v,)


@given(st.lists(fractions, min_size=2, max_size=5))
def test_scalar_recoding_generates_integers(vals):
    phi = recode_nonneg(Quantity.rational(vals))
    rec = recode_integer(phi)
    ints = [int(v) for v in rec.quantity.values]
    assert all(v == int(v) and v >= 0 for v in rec.quantity.values)
    assert 0 in ints
    if rec.rank:
        g = 0
        for v in ints:
            g = gcd(g, v)
        assert g == 1
    # phi is recovered from the integer form
    for orig, v in zip(phi.values, rec.quantity.values):
        back = rec.offset[0] + sum((int(v) * b[0] for b in rec.basis), Fraction(0))
        assert back == orig


vectors = st.lists(st.tuples(fractions, fractions), min_size=2, max_size=5)


@given(vectors)
def test_vector_recoding_is_a_lattice_basis(vals):
    phi = recode_nonneg(Quantity.vector(vals))
    rec = recode_integer(phi)
    coords = [_as_tuple(v) for v in rec.quantity.values]
    assert all(int(x) == x and x >= 0 for c in coords for x in c)
    assert any(not any(c) for c in coords)
    assert _lattice_generated([[int(x) for x in c] for c in coords], rec.rank)
    for orig, c in zip(phi.values, coords):
        back = list(rec.offset)
        for k, ck in enumerate(c[: rec.rank]):
            back = [x + int(ck) * b for x, b in zip(back, rec.basis[k])]
        assert tuple(back) == tuple(orig)


def test_rank_two_example():
    rec = recode_integer(Quantity.vector([(0, 0), (1, 0), ("1/2", "1/2"), (0, 1)]))
    assert rec.rank == 2
    coords = [_as_tuple(v) for v in rec.quantity.values]
    assert _lattice_generated(coords, 2)


def _conserving_rule(rng):
    """Rules that conserve something beyond the constants, plus plain random ones."""
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return from_wolfram(int(rng.choice([170, 184, 204, 226, 240, 150, 90, 110])))
    if kind == 1:
        perm = rng.permutation(3)
        k = int(rng.integers(0, 3))
        return from_function(3, Neighborhood.box(1), lambda p: int(perm[p[k]]))
    return random_rule(rng, int(rng.integers(2, 4)), Neighborhood.box(1))


def test_recoding_preserves_conserved_status():
    rng = np.random.default_rng(8)
    conserved = 0
    for _ in range(100):
        r = _conserving_rule(rng)
        if rng.integers(0, 2):
            # pick phi from the conserved space half the time
            vecs = conservation_basis(r).vectors
            coef = [Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4))) for _ in vecs]
            vals = [sum((c * v[s] for c, v in zip(coef, vecs)), Fraction(0)) for s in range(r.A)]
        else:
            vals = [Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 5))) for _ in range(r.A)]
        phi = Quantity.rational(vals)
        tilde, hat = recode_both(phi)
        status = bool(finitary_holds(r, phi))
        assert status == bool(finitary_holds(r, tilde)) == bool(finitary_holds(r, hat.quantity))
        conserved += status
    assert 10 < conserved < 90


def test_vacuum_sets_reported():
    tilde, hat = recode_both(Quantity.rational([-1, 0, 1]))
    assert hat.vacuum_before == {0}
    assert hat.vacuum_after == {0}
    assert _vals(tilde) == [0, 1, 2]
