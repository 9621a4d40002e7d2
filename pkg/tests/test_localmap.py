"""Local maps: application, dependence structure, monotonicity classes."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monodual.configuration import Configuration, join, leq, zero
from monodual.lattice import make_torus
from monodual.localmap import (
    Branch,
    Coop,
    Custom,
    Death,
    apply_map,
    custom_from_json,
    custom_to_json,
    dependence_sets,
    is_additive,
    is_monotone,
    preserves_zero,
    translate_map,
)

GRID = make_torus(1, 4)


def all_masks():
    return range(16)


def cfg(mask):
    return Configuration.from_mask(GRID, mask)


# -- application oracles -------------------------------------------------------


def test_death_application_exhaustive():
    m = Death(2)
    for a in all_masks():
        out = apply_map(m, cfg(a))
        assert out.mask == a & ~(1 << 2)


def test_branch_application_exhaustive():
    m = Branch(1, 3)
    for a in all_masks():
        out = apply_map(m, cfg(a))
        expect = a | (1 << 3) if a & (1 << 1) else a
        assert out.mask == expect


def test_coop_application_exhaustive():
    m = Coop(0, 1, 2)
    both = 0b011
    for a in all_masks():
        out = apply_map(m, cfg(a))
        expect = a | (1 << 2) if (a & both) == both else a
        assert out.mask == expect


def test_multilevel_application():
    g = make_torus(1, 3)
    x = Configuration(g, {0: 2, 1: 1}, n=2)
    # branch writes the max of source and target levels
    y = apply_map(Branch(0, 1), x)
    assert y.entries == {0: 2, 1: 2}
    # coop writes (min of sources) joined with the target
    z = apply_map(Coop(0, 1, 2), x)
    assert z.entries == {0: 2, 1: 1, 2: 1}
    assert apply_map(Death(0), x).entries == {1: 1}


def test_map_constructors_validate_sites():
    with pytest.raises(ValueError):
        Branch(2, 2)
    with pytest.raises(ValueError):
        Coop(0, 0, 2)
    with pytest.raises(ValueError):
        Coop(0, 2, 2)


# -- dependence sets -----------------------------------------------------------


def test_dependence_sets_closed_forms():
    d = dependence_sets(Death(2))
    assert d.target_sites == frozenset({2})
    assert d.pairs == frozenset()

    b = dependence_sets(Branch(1, 3))
    assert b.target_sites == frozenset({3})
    assert b.pairs == frozenset({(1, 3), (3, 3)})

    c = dependence_sets(Coop(0, 1, 2))
    assert c.target_sites == frozenset({2})
    assert c.pairs == frozenset({(0, 2), (1, 2), (2, 2)})


def test_dependence_contains_implied_diagonal():
    d = dependence_sets(Death(2))
    assert d.contains(0, 0) and d.contains(3, 3)
    assert not d.contains(2, 2)  # the killed site forgets its own state
    b = dependence_sets(Branch(1, 3))
    assert b.contains(3, 3) and b.contains(1, 3) and not b.contains(0, 3)


def test_dependence_r_down_up():
    b = dependence_sets(Branch(1, 3))
    assert b.r_down(3) == frozenset({1, 3})
    assert b.r_down(0) == frozenset({0})
    assert b.r_up(1) == frozenset({1, 3})
    assert b.r_up(0) == frozenset({0})


def test_dependence_sets_brute_force_custom():
    # a map that copies site 1 onto site 0 (monotone, zero-fixing)
    table = {}
    for v0 in (0, 1):
        for v1 in (0, 1):
            table[(v0, v1)] = (v1, v1)
    m = Custom((0, 1), table)
    d = dependence_sets(m)
    assert d.target_sites == frozenset({0})
    assert d.pairs == frozenset({(1, 0)})


# -- monotonicity classes ------------------------------------------------------


def test_builtin_maps_are_monotone_and_zero_fixing():
    for m in (Death(0), Branch(0, 1), Coop(0, 1, 2)):
        assert is_monotone(m)
        assert preserves_zero(m)


def test_additivity_classification():
    assert is_additive(Death(0))
    assert is_additive(Branch(0, 1))
    assert not is_additive(Coop(0, 1, 2))


def test_monotone_definition_matches_brute_force():
    # exhaustive: monotone iff x <= y implies m(x) <= m(y) on the window
    for m in (Death(1), Branch(0, 2), Coop(1, 2, 3)):
        for a in all_masks():
            for b in all_masks():
                if a | b == b:
                    xa, xb = apply_map(m, cfg(a)), apply_map(m, cfg(b))
                    assert leq(xa, xb)


def test_additive_implies_monotone_over_all_two_site_maps():
    # every function {0,1}^2 -> {0,1}^2 as a custom map
    states = list(itertools.product((0, 1), repeat=2))
    n_additive = 0
    for outputs in itertools.product(states, repeat=4):
        table = dict(zip(states, outputs))
        m = Custom((0, 1), table)
        if is_additive(m):
            n_additive += 1
            assert is_monotone(m)
    assert 0 < n_additive < 256


def test_additive_definition_matches_join_preservation():
    # additive: m(x join y) == m(x) join m(y) and m(0) == 0, checked on window states
    for m in (Death(1), Branch(0, 2), Coop(1, 2, 3)):
        expect = preserves_zero(m) and all(
            apply_map(m, join(cfg(a), cfg(b))) == join(apply_map(m, cfg(a)), apply_map(m, cfg(b)))
            for a in all_masks()
            for b in all_masks()
        )
        assert is_additive(m) == expect


def test_non_monotone_custom_detected():
    # flip: occupied becomes empty and vice versa
    m = Custom((0,), {(0,): (1,), (1,): (0,)})
    assert not is_monotone(m)
    assert not preserves_zero(m)


# -- custom maps ---------------------------------------------------------------


def test_custom_reproduces_branch():
    states = list(itertools.product((0, 1), repeat=2))
    table = {(xi, xj): (xi, max(xi, xj)) for xi, xj in states}
    m = Custom((1, 3), table)
    b = Branch(1, 3)
    for a in all_masks():
        assert apply_map(m, cfg(a)) == apply_map(b, cfg(a))
    assert is_additive(m) and is_monotone(m)


def test_custom_validation():
    with pytest.raises(ValueError):
        Custom((), {})
    with pytest.raises(ValueError):
        Custom((0, 0), {})
    with pytest.raises(ValueError):
        Custom((0,), {(0,): (0,)})  # incomplete table
    with pytest.raises(ValueError):
        Custom((0,), [((0,), (0,)), ((0,), (1,)), ((1,), (1,))])  # duplicate row
    with pytest.raises(ValueError):
        Custom(tuple(range(7)), {})  # window cap


def test_custom_json_round_trip():
    states = list(itertools.product((0, 1, 2), repeat=2))
    table = {key: (key[0], max(key)) for key in states}
    m = Custom((0, 2), table, n=2)
    back = custom_from_json(custom_to_json(m))
    assert back == m
    x = Configuration(make_torus(1, 3), {0: 2}, n=2)
    assert apply_map(back, x) == apply_map(m, x)


# -- translation ---------------------------------------------------------------


def test_translate_map_shifts_sites():
    g = make_torus(1, 5)
    m = Branch(0, 1)
    t = translate_map(g, 2, m)
    assert isinstance(t, Branch)
    assert (t.i, t.j) == (2, 3)
    c = translate_map(g, 3, Coop(0, 1, 2))
    assert (c.i, c.i2, c.j) == (3, 4, 0)


def test_translate_map_commutes_with_translation():
    from monodual.lattice import translate_config

    g = make_torus(1, 5)
    m = Coop(0, 1, 2)
    for gk in (1, 2, 4):
        mt = translate_map(g, gk, m)
        for mask in range(32):
            x = Configuration.from_mask(g, mask)
            left = apply_map(mt, translate_config(g, gk, x))
            right = translate_config(g, gk, apply_map(m, x))
            assert left == right


@given(st.integers(0, 15), st.sampled_from([Death(0), Death(3), Branch(0, 1), Branch(3, 2), Coop(0, 1, 2), Coop(1, 3, 0)]))
@settings(max_examples=60)
def test_apply_map_keeps_untouched_sites(mask, m):
    x = cfg(mask)
    out = apply_map(m, x)
    target = next(iter(dependence_sets(m).target_sites))
    for s in GRID.sites():
        if s != target:
            assert out.value(s) == x.value(s)
