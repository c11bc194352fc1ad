from fractions import Fraction

import pytest

from ca_conserve.lattice import Configuration, TorusConfig, Window, restrict
from ca_conserve.quantity import (
    Quantity,
    load_quantity,
    save_quantity,
    total,
    total_window,
    vacuum_set,
    vacuum_symbol,
)


def test_floats_rejected():
    with pytest.raises(TypeError):
        Quantity.rational([0.5, 1])


def test_string_fractions_parse():
    q = Quantity.rational(["1/2", "-3", 2])
    assert q.values == (Fraction(1, 2), Fraction(-3), Fraction(2))


@pytest.mark.parametrize(
    "q",
    [
        Quantity.rational(["1/3", 0, 2]),
        Quantity.vector([(0, 1), ("1/2", 0)]),
        Quantity.mod([0, 1, 5], 3),
    ],
)
def test_json_round_trip(q, tmp_path):
    path = tmp_path / "q.json"
    save_quantity(q, path)
    assert load_quantity(path) == q


def test_empty_values_rejected():
    with pytest.raises(ValueError):
        Quantity.from_json({"domain": "rational", "values": []})


def test_vacuum_sets():
    assert vacuum_set(Quantity.identity(2)) == {0}
    assert vacuum_set(Quantity.rational([0, 0, 0])) == {0, 1, 2}
    assert vacuum_set(Quantity.rational([1, 2])) == frozenset()
    with pytest.raises(ValueError, match="no vacuum"):
        vacuum_symbol(Quantity.rational([1, 2]))
    assert vacuum_set(Quantity.mod([2, 1], 2)) == {0}


def test_totals():
    ident = Quantity.identity(2)
    assert total(ident, Configuration(0, {(2,): 1, (5,): 1})) == 2
    assert total(ident, Configuration(0)) == 0
    parity = Quantity.identity(2, 2)
    assert total(parity, Configuration.from_word([1, 1, 1])) == 1


def test_divergent_total():
    with pytest.raises(ValueError, match="divergent total"):
        total(Quantity.identity(2), Configuration(1))


def test_window_totals():
    ident = Quantity.identity(2)
    assert total_window(ident, Configuration(1), Window.interval(0, 6)) == 7
    assert total_window(ident, Configuration.from_word([1, 1]), Window()) == 0
    t = TorusConfig((6,), [1, 0, 1, 1, 0, 0])
    assert total_window(ident, t, Window.interval(0, 5)) == 3


def test_restrict():
    a = Configuration(0, {(3,): 1})
    assert list(restrict(a, Window.interval(2, 4)).values()) == [0, 1, 0]
    b = Configuration.from_word([0, 1, 1, 0], start=-1)
    assert list(restrict(b, Window.interval(-1, 1)).values()) == [0, 1, 1]


def test_vector_and_mod_arithmetic():
    v = Quantity.vector([(1, 0), (0, 1)])
    assert v.sum([0, 1, 1]) == (1, 2)
    m = Quantity.mod([1, 2], 3)
    assert m.sum([1, 1]) == 1  # 2 + 2 = 4 = 1 mod 3
    assert m.is_zero(m.sum([0, 1]))  # 1 + 2 = 0 mod 3
