import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ca_conserve.lattice import Neighborhood
from ca_conserve.rules import (
    LocalRule,
    all_patterns,
    apply_local,
    apply_patch,
    decode,
    encode,
    from_wolfram,
    identity_rule,
    load_rule,
    random_rule,
    save_rule,
    shift_rule,
    to_wolfram,
)


@given(st.integers(0, 255))
def test_wolfram_bits(n):
    r = from_wolfram(n)
    for a, b, c in all_patterns(2, 3):
        assert apply_local(r, (a, b, c)) == (n >> (4 * a + 2 * b + c)) & 1
    assert to_wolfram(r) == r.code() == n


def test_to_wolfram_rejects_non_elementary():
    with pytest.raises(ValueError):
        to_wolfram(identity_rule(3))


@given(st.integers(2, 4), st.integers(1, 5), st.data())
def test_encode_decode_round_trip(A, n, data):
    k = data.draw(st.integers(0, A**n - 1))
    assert encode(decode(k, A, n), A) == k


def test_all_patterns_order_matches_encode():
    pats = all_patterns(3, 3)
    assert [encode(p, 3) for p in pats] == list(range(27))


def test_shift_and_identity():
    assert shift_rule(1).code() == 170 and shift_rule(-1).code() == 240
    assert identity_rule().code() == 204
    s = shift_rule(5)
    assert s.nbhd == Neighborhood.box(5)
    for p in all_patterns(2, 11)[::97]:
        assert apply_local(s, p) == p[10]  # offset +5 is the last cell


def test_table_validation():
    with pytest.raises(ValueError, match="table length"):
        LocalRule(2, Neighborhood.box(1), (0,) * 7)
    with pytest.raises(ValueError, match="symbols"):
        LocalRule(2, Neighborhood.box(1), (2,) * 8)


@given(st.integers(0, 255))
def test_widen_keeps_the_map(n):
    r = from_wolfram(n)
    w = r.widen(Neighborhood.box(2))
    for p in all_patterns(2, 5):
        assert apply_local(w, p) == apply_local(r, p[1:4])


def test_json_round_trip(tmp_path):
    r = from_wolfram(110)
    path = tmp_path / "r.json"
    save_rule(r, path)
    assert load_rule(path) == r


@given(st.permutations([-1, 0, 1]), st.integers(0, 255))
def test_json_accepts_any_offset_order(order, n):
    r = from_wolfram(n)
    table = []
    for p in all_patterns(2, 3):
        by_offset = dict(zip(order, p))
        table.append(apply_local(r, [by_offset[-1], by_offset[0], by_offset[1]]))
    doc = {"dimension": 1, "alphabet": 2, "offsets": [[o] for o in order], "table": table}
    assert LocalRule.from_json(doc) == r


def test_json_pads_missing_offsets():
    # rule reading only the right neighbor, given on offsets {0, 1}
    doc = {"dimension": 1, "alphabet": 2, "offsets": [[0], [1]], "table": [0, 1, 0, 1]}
    assert LocalRule.from_json(doc) == shift_rule(1)


def test_apply_patch_matches_direct_evaluation():
    rng = np.random.default_rng(3)
    r = random_rule(rng, 3, Neighborhood.box(1))
    for _ in range(50):
        p = tuple(int(x) for x in rng.integers(0, 3, 5))
        expect = tuple(apply_local(r, p[i : i + 3]) for i in range(3))
        assert apply_patch(r, p) == expect


def test_apply_patch_traffic_rule():
    # the particle at offset -1 hops onto the empty origin; nothing else moves
    assert apply_patch(from_wolfram(184), (0, 1, 0, 0, 0)) == (0, 1, 0)
