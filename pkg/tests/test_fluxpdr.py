import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ca_conserve.conservation import finitary_holds
from ca_conserve.engine import step_finite
from ca_conserve.fluxpdr import (
    DisplacementRule,
    build_pdr,
    flux,
    flux_identities_check,
    flux_left,
    flux_right,
    load_pdr,
    reconstruct_ca,
    save_pdr,
    verify_pdr,
)
from ca_conserve.lattice import Configuration, Neighborhood, PeriodicConfig
from ca_conserve.quantity import Quantity
from ca_conserve.rules import encode, from_function, from_wolfram, identity_rule, shift_rule

ident = Quantity.identity(2)
PPCA = (170, 184, 204, 226, 240)


def crossing_oracle(rule, phi, a, z):
    """Mass on (-inf, z] before minus after one global step of a finite configuration."""
    b = step_finite(rule, a)
    lo = min([z] + [p[0] for p, _ in a.overrides]) - 5 * rule.nbhd.radius - 2
    before = sum(int(phi(a[(y,)])) for y in range(lo, z + 1))
    after = sum(int(phi(b[(y,)])) for y in range(lo, z + 1))
    return before - after


def test_five_fold_shift_examples():
    s5 = shift_rule(5)  # F(a)_x = a_{x+5}: everything moves five cells left
    word = [int(c) for c in "1011110" + "0" + "110100101"]
    a = Configuration.from_word(word, start=-7)
    assert flux_left(s5, ident, a, 0) == 3
    assert flux_left(s5, ident, PeriodicConfig((1,)), 0) == 5


def test_rule_184_examples():
    r = from_wolfram(184)
    assert flux_right(r, ident, Configuration.from_word([1, 0]), 0) == 1
    assert flux_right(r, ident, Configuration.from_word([1, 1]), 0) == 0
    # bare words centered on the site work too
    assert flux_right(r, ident, (0, 1, 0)) == 1
    with pytest.raises(ValueError):
        flux_right(r, ident, (1, 0))


def test_identity_has_no_flux():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = Configuration.from_word(rng.integers(0, 2, 8).tolist(), start=-4)
        for z in range(-6, 6):
            fv = flux(from_wolfram(204), ident, a, z)
            assert (fv.right, fv.left, fv.out) == (0, 0, 0)


def test_flux_rejects_non_conserved():
    with pytest.raises(ValueError):
        flux_right(from_wolfram(110), ident, (0, 1, 0))
    with pytest.raises(ValueError):
        flux_right(from_wolfram(184), Quantity.rational(["1/2", 1]), (0, 1, 0))
    with pytest.raises(ValueError):
        flux_right(from_wolfram(184), Quantity.rational([1, 1]), (0, 1, 0))


words = st.lists(st.integers(0, 1), min_size=1, max_size=12)


@given(st.sampled_from(PPCA), words, st.integers(-4, 4), st.integers(-8, 16))
def test_flux_matches_crossing_count(n, word, start, z):
    r = from_wolfram(n)
    a = Configuration.from_word(word, start=start)
    assert flux_right(r, ident, a, z) == crossing_oracle(r, ident, a, z)


@given(st.sampled_from(PPCA), words, st.integers(-8, 16))
def test_anti_symmetry(n, word, z):
    r = from_wolfram(n)
    a = Configuration.from_word(word)
    fv = flux(r, ident, a, z)
    assert fv.left == -flux_right(r, ident, a, z - 1)
    assert fv.out == fv.left + fv.right


def test_flux_is_local():
    r = from_wolfram(184)
    rng = np.random.default_rng(3)
    for _ in range(200):
        core = rng.integers(0, 2, 3).tolist()
        far = rng.integers(0, 2, 10).tolist()
        a = Configuration.from_word(far[:5] + core + far[5:], start=-6)
        b = Configuration.from_word(core, start=-1)
        assert flux_right(r, ident, a, 0) == flux_right(r, ident, b, 0)


def test_flux_identities_on_184():
    r = from_wolfram(184)
    rng = np.random.default_rng(184)
    for _ in range(10_000):
        n = int(rng.integers(1, 12))
        a = Configuration.from_word(rng.integers(0, 2, n).tolist(), start=int(rng.integers(-6, 4)))
        rep = flux_identities_check(r, ident, a, int(rng.integers(-8, 10)))
        assert rep["ok"], rep


def test_flux_identities_on_vacuum_and_wide_rule():
    r = from_wolfram(226)
    rep = flux_identities_check(r, ident, Configuration(0), 0)
    assert rep["ok"] and rep["flux"] == {"right": 0, "left": 0, "out": 0} and rep["dphi"] == 0
    assert set(rep["bounds"].values()) == {0}
    s = shift_rule(-1)  # particles hop one cell right
    rep = flux_identities_check(s, ident, Configuration.from_word([1]), 0)
    assert rep["ok"] and rep["flux"]["right"] == 1 and rep["bounds"]["i"] >= 1


def test_flux_identities_three_symbols():
    # A = 3 with phi = (0, 1, 2): symbol 2 carries two particles; a rule moving
    # every symbol right conserves it
    r = shift_rule(-1, 3)
    phi = Quantity.rational([0, 1, 2])
    rng = np.random.default_rng(4)
    for _ in range(500):
        a = Configuration.from_word(rng.integers(0, 3, 6).tolist(), start=-3)
        z = int(rng.integers(-5, 5))
        assert flux_identities_check(r, phi, a, z)["ok"]
        assert flux_right(r, phi, a, z) == crossing_oracle(r, phi, a, z)


# --- displacement rules -------------------------------------------------------

def test_identity_pdr():
    pdr = build_pdr(identity_rule(2), ident)
    for k, row in enumerate(pdr.table):
        center = (k // 2 ** (2 * pdr.B)) % 2
        assert row[pdr.B] == center and sum(row) == center


def test_rule_184_pdr_examples():
    pdr = build_pdr(from_wolfram(184), ident)
    assert pdr.B == 1
    assert pdr.d((0, 0, 1, 0, 0)) == {1: 1}
    assert pdr.d((0, 0, 1, 1, 0)) == {0: 1}
    assert pdr.d((0, 0, 0, 1, 0)) == {}


@pytest.mark.parametrize("n", PPCA)
def test_ppca_pdr_verifies_and_round_trips(n):
    r = from_wolfram(n)
    pdr = build_pdr(r, ident)
    rep = verify_pdr(r, ident, pdr, trials=1000, rng=np.random.default_rng(n))
    assert rep.ok and rep.patterns == 32
    rec = reconstruct_ca(ident, pdr)
    assert rec.unique and rec.count == 1
    assert list(rec.rules()) == [r]


def test_bounded_velocity_and_c1():
    rng = np.random.default_rng(9)
    phi = Quantity.rational([0, 1, 2])
    # random compositions of shifts and the identity on a three-symbol alphabet
    for rule in [shift_rule(1, 3), shift_rule(-1, 3), identity_rule(3)]:
        pdr = build_pdr(rule, phi)
        assert pdr.array.shape[1] == 2 * pdr.B + 1
        rep = verify_pdr(rule, phi, pdr, trials=200, rng=rng)
        assert rep.ok


def test_corrupted_pdr_is_caught():
    r = from_wolfram(184)
    pdr = build_pdr(r, ident)
    k = encode((0, 0, 1, 0, 0), 2)
    bumped = pdr.replace(k, [c + (j == 0) for j, c in enumerate(pdr.table[k])])
    assert not verify_pdr(r, ident, bumped, trials=200).ok
    moved = pdr.replace(k, (1, 0, 0))  # send the particle the wrong way
    rep = verify_pdr(r, ident, moved, trials=200)
    assert not rep.ok and not rep.c1_failures and rep.c2_failures


def test_pdr_json_round_trip(tmp_path):
    pdr = build_pdr(from_wolfram(226), ident)
    path = tmp_path / "d.json"
    save_pdr(pdr, path)
    assert load_pdr(path) == pdr
    doc = pdr.to_json()
    assert all(e["d"] and all(v > 0 for v in e["d"].values()) for e in doc["entries"])
    assert DisplacementRule.from_json(doc) == pdr


def test_pdr_json_rejects_bad_offsets():
    with pytest.raises(ValueError):
        DisplacementRule.from_json({"B": 1, "alphabet": 2, "entries": [{"pattern": [0, 0, 1, 0, 0], "d": {"2": 1}}]})


def test_interchangeable_particles_count():
    # symbols 1 and 2 both carry one particle, so every site receiving one
    # particle may output either of them
    phi = Quantity.rational([0, 1, 1])
    pdr = build_pdr(shift_rule(-1, 3), phi)
    rec = reconstruct_ca(phi, pdr)
    assert rec.nbhd == Neighborhood.box(1)
    expected = sum(1 for k in range(27) if phi((k // 9) % 3) == 1)  # a_{-1} carries one particle
    assert expected == 18
    assert rec.count == 2**expected
    first = next(rec.rules())
    assert finitary_holds(first, phi)


def test_incompatible_totals():
    pdr = build_pdr(from_wolfram(184), ident)
    k = encode((0, 1, 1, 0, 0), 2)
    # two particles pile onto one site while the alphabet only has values 0 and 1
    # in ...0110..., the left particle hops right onto its neighbor, which stays
    heavy = pdr.replace(k, (0, 1, 0))
    heavy = heavy.replace(encode((0, 0, 1, 1, 0), 2), (0, 0, 1))
    with pytest.raises(ValueError, match="incompatible displacement totals"):
        reconstruct_ca(ident, heavy)


def test_pdr_for_rule_with_larger_radius():
    # the traffic rule read through a radius-2 window still rebuilds itself
    r = from_function(2, Neighborhood.box(2), lambda p: from_wolfram(184).table[4 * p[1] + 2 * p[2] + p[3]])
    pdr = build_pdr(r, ident)
    assert verify_pdr(r, ident, pdr, trials=300).ok
    rec = reconstruct_ca(ident, pdr)
    assert rec.unique
    assert list(rec.rules())[0].widen(Neighborhood.box(2)) == r


def test_vector_quantities_are_unsupported():
    with pytest.raises(ValueError, match="unsupported"):
        build_pdr(from_wolfram(184), Quantity.vector([(0, 0), (1, 1)]))
