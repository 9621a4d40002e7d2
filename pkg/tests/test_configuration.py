"""Configurations as a lattice: order, join/meet, metric, JSON."""

import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monodual.configuration import (
    Configuration,
    LocalStateSpace,
    basis,
    config_distance,
    config_from_json,
    config_to_json,
    join,
    leq,
    meet,
    top,
    zero,
)
from monodual.lattice import make_torus

GRID4 = make_torus(1, 4)
GRID3 = make_torus(1, 3)


def all_configs(grid, n=1):
    out = []
    for values in itertools.product(range(n + 1), repeat=grid.size):
        out.append(Configuration(grid, dict(enumerate(values)), n=n))
    return out


masks4 = st.integers(min_value=0, max_value=15)


def cfg(mask):
    return Configuration.from_mask(GRID4, mask)


def test_local_state_space():
    s = LocalStateSpace(2)
    assert list(s.states()) == [0, 1, 2]
    with pytest.raises(ValueError):
        LocalStateSpace(0)


def test_entries_drop_zeros_and_validate():
    x = Configuration(GRID4, {0: 1, 1: 0, 2: 1})
    assert x.entries == {0: 1, 2: 1}
    assert x.support() == frozenset({0, 2})
    with pytest.raises(ValueError):
        Configuration(GRID4, {9: 1})
    with pytest.raises(ValueError):
        Configuration(GRID4, {0: 2})  # n defaults to 1


def test_mask_round_trip():
    for m in range(16):
        assert cfg(m).mask == m
    assert Configuration(GRID4, {1: 1, 3: 1}).mask == 0b1010


def test_zero_top_basis():
    assert zero(GRID4).is_zero()
    assert top(GRID4).mask == 15
    assert basis(GRID4, 2).mask == 4
    assert top(GRID3, n=2).entries == {0: 2, 1: 2, 2: 2}


def test_lattice_laws_exhaustive_two_level():
    # oracle: bitmask or/and
    for a in range(16):
        for b in range(16):
            x, y = cfg(a), cfg(b)
            assert join(x, y).mask == a | b
            assert meet(x, y).mask == a & b
            assert leq(x, y) == (a | b == b)


def test_lattice_laws_exhaustive_three_level():
    # oracle: pointwise max/min over explicit value vectors
    configs = all_configs(GRID3, n=2)
    for x in configs:
        for y in configs:
            vx = [x.value(s) for s in GRID3.sites()]
            vy = [y.value(s) for s in GRID3.sites()]
            assert [join(x, y).value(s) for s in GRID3.sites()] == [
                max(a, b) for a, b in zip(vx, vy)
            ]
            assert [meet(x, y).value(s) for s in GRID3.sites()] == [
                min(a, b) for a, b in zip(vx, vy)
            ]
            assert leq(x, y) == all(a <= b for a, b in zip(vx, vy))


@given(masks4, masks4, masks4)
def test_lattice_algebra_properties(a, b, c):
    x, y, z = cfg(a), cfg(b), cfg(c)
    assert join(x, y) == join(y, x)
    assert meet(x, join(x, y)) == x
    assert join(x, meet(x, y)) == x
    assert join(join(x, y), z) == join(x, join(y, z))
    # order from algebra
    assert leq(x, y) == (join(x, y) == y)
    assert leq(x, y) == (meet(x, y) == x)


def test_cross_grid_operations_rejected():
    x = Configuration(GRID3, {0: 1})
    y = Configuration(GRID4, {0: 1})
    with pytest.raises(ValueError):
        join(x, y)
    with pytest.raises(ValueError):
        leq(x, y)


def test_distance_definition_frozen():
    # distance sums 3^(size - gamma(i)) over disagreement sites, over 3^size
    x = Configuration(GRID4, {0: 1, 2: 1})
    y = Configuration(GRID4, {2: 1, 3: 1})
    # disagreement at sites 0 (gamma 1) and 3 (gamma 4)
    assert config_distance(x, y) == Fraction(3**3 + 3**0, 3**4)
    assert config_distance(x, x) == 0


def test_distance_dichotomy_and_symmetry():
    configs = all_configs(GRID3, n=1)
    for x in configs:
        for y in configs:
            d = config_distance(x, y)
            assert d == config_distance(y, x)
            if x == y:
                assert d == 0
            else:
                assert d >= Fraction(1, 3**GRID3.size)
                assert d <= 1


@given(masks4, masks4, masks4)
def test_distance_triangle(a, b, c):
    x, y, z = cfg(a), cfg(b), cfg(c)
    assert config_distance(x, z) <= config_distance(x, y) + config_distance(y, z)


def test_distance_separates_early_sites_more():
    # site with smaller gamma dominates the metric
    x0 = Configuration(GRID4, {0: 1})
    x3 = Configuration(GRID4, {3: 1})
    base = zero(GRID4)
    assert config_distance(x0, base) > config_distance(x3, base)


def test_json_round_trip():
    x = Configuration(GRID4, {0: 1, 3: 1})
    text = config_to_json(x)
    data = json.loads(text)
    # sites are reported through gamma (1-based)
    assert data == {"support": [[1, 1], [4, 1]]}
    assert config_from_json(GRID4, text) == x


def test_json_round_trip_multilevel():
    x = Configuration(GRID3, {1: 2, 2: 1}, n=2)
    back = config_from_json(GRID3, config_to_json(x), n=2)
    assert back == x


@given(masks4)
@settings(max_examples=30)
def test_json_round_trip_property(a):
    x = cfg(a)
    assert config_from_json(GRID4, config_to_json(x)) == x


def test_sort_key_orders_strict_minorants_first():
    configs = all_configs(GRID3, n=2)
    for x in configs:
        for y in configs:
            if leq(x, y) and x != y:
                assert x.sort_key() < y.sort_key()
