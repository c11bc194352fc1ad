import pytest
from hypothesis import given
from hypothesis import strategies as st

from ca_conserve.lattice import (
    Configuration,
    Neighborhood,
    PeriodicConfig,
    TorusConfig,
    Window,
    closure,
    config_from_json,
    double,
    interior,
    minkowski,
)


def test_box_neighborhood_is_sorted_and_symmetric():
    b = Neighborhood.box(1)
    assert b.offsets == ((-1,), (0,), (1,))
    assert b.origin_index == 1 and b.radius == 1 and b.is_box()


def test_asymmetric_neighborhood_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        Neighborhood(1, ((0,), (1,)))


def test_origin_required():
    with pytest.raises(ValueError, match="origin"):
        Neighborhood(1, ((-1,), (1,)))


def test_from_offsets_pads_to_symmetric():
    b = Neighborhood.from_offsets([(2,)])
    assert b.offsets == ((-2,), (0,), (2,))
    assert not b.is_box()


def test_double_of_interval():
    assert double(Neighborhood.box(1)) == Neighborhood.box(2)
    assert double(Neighborhood.box(1, 2)) == Neighborhood.box(2, 2)


def test_minkowski_sparse():
    b = Neighborhood.from_offsets([(2,)])
    assert minkowski(b, b).offsets == ((-4,), (-2,), (0,), (2,), (4,))


def test_interval_closure_and_interior():
    w = Window.interval(0, 5)
    b = Neighborhood.box(1)
    assert closure(w, b) == Window.interval(-1, 6)
    assert interior(w, b) == Window.interval(1, 4)
    assert interior(Window.interval(0, 1), b) == Window()


windows = st.sets(st.tuples(st.integers(-6, 6)), min_size=1, max_size=10)
nbhds = st.sampled_from(
    [Neighborhood.box(0), Neighborhood.box(1), Neighborhood.box(2), Neighborhood.from_offsets([(2,)])]
)


@given(windows, nbhds)
def test_interior_window_closure_nest(points, b):
    w = Window(points)
    assert interior(w, b) <= w <= closure(w, b)


@given(st.integers(-5, 5), st.integers(0, 8), nbhds)
def test_box_fast_path_matches_definition(lo, n, b):
    w = Window.interval(lo, lo + n)
    slow_cl = Window((p[0] + q[0],) for p in w for q in b)
    slow_int = Window(p for p in w if all((p[0] + q[0],) in w for q in b))
    assert closure(w, b) == slow_cl
    assert interior(w, b) == slow_int


def test_configuration_drops_background_entries():
    a = Configuration(0, {(0,): 1, (3,): 0})
    assert a.overrides == (((0,), 1),)
    assert a[(3,)] == 0 and a[(0,)] == 1 and a[(99,)] == 0
    assert a.support == Window([(0,)])


def test_configuration_word_and_json_round_trip():
    a = Configuration.from_word([1, 0, 2], start=-1)
    assert a.word(-2, 2) == (0, 1, 0, 2, 0)
    assert Configuration.from_json(a.to_json()) == a
    assert config_from_json(a.to_json()) == a


def test_two_dimensional_configuration():
    a = Configuration(0, {(1, 2): 1})
    doc = a.to_json()
    assert doc["overrides"] == [[1, 2, 1]]
    assert Configuration.from_json(doc) == a and a.dimension == 2


def test_torus_indexing_wraps_and_round_trips():
    t = TorusConfig((4,), [1, 0, 0, 2])
    assert t[(-1,)] == 2 and t[(4,)] == 1
    assert TorusConfig.from_json(t.to_json()) == t
    assert t.translate((1,)).cells.tolist() == [2, 1, 0, 0]


def test_torus_too_small_for_neighborhood():
    with pytest.raises(ValueError, match="too small"):
        TorusConfig((4,), [0] * 4).check_against(Neighborhood.box(1))
    TorusConfig((5,), [0] * 5).check_against(Neighborhood.box(1))


def test_periodic_config_indexing():
    p = PeriodicConfig((1, 0), head=(7, 7), start=3)
    assert [p[(x,)] for x in range(0, 6)] == [1, 0, 1, 7, 7, 0]
    assert p[(-1,)] == 0
    assert config_from_json(p.to_json()) == p


def test_empty_core_rejected():
    with pytest.raises(ValueError):
        PeriodicConfig(())
