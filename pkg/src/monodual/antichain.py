"""Antichains of configurations: the states of the dual process.

An antichain is a finite set of pairwise incomparable nonzero
configurations.  It stands for its upward closure: the hitting
indicator ``psi_mon(x, Y)`` asks whether some element of Y sits below
x.  The empty antichain is the least state (its upset is empty), the
set of all single-site level-1 configurations is the greatest (its
upset is everything nonzero).

For two-level systems the simulation kernel carries an antichain as a
pair (singles bitmask, set of multi-site bitmasks); the conversion
helpers at the bottom keep that form in sync with this class.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .configuration import Configuration, basis, leq

__all__ = [
    "Antichain",
    "minimalize",
    "psi_mon",
    "order_leq",
    "make_y_top",
    "agreement_level",
    "antichain_window_distance",
    "is_additive_state",
    "antichain_to_json",
    "antichain_from_json",
    "antichain_to_kernel",
    "kernel_to_antichain",
]


class Antichain:
    """Immutable set of pairwise incomparable nonzero configurations."""

    __slots__ = ("grid", "n", "elements", "_key")

    def __init__(self, grid, elements, n=1, _checked=False):
        self.grid = grid
        self.n = n
        elems = frozenset(elements)
        if not _checked:
            for y in elems:
                if y.grid != grid or y.n != n:
                    raise ValueError("element on a different grid or state space")
                if y.is_zero():
                    raise ValueError("the zero configuration cannot be an element")
            ordered = sorted(elems, key=Configuration.sort_key)
            for a in range(len(ordered)):
                for b in range(len(ordered)):
                    if a != b and leq(ordered[a], ordered[b]):
                        raise ValueError(
                            f"elements must be pairwise incomparable: {ordered[a]} <= {ordered[b]}"
                        )
        self.elements = elems
        self._key = None

    def sorted_elements(self):
        return sorted(self.elements, key=Configuration.sort_key)

    def key(self):
        if self._key is None:
            self._key = tuple(y.sort_key() for y in self.sorted_elements())
        return self._key

    def is_empty(self):
        return not self.elements

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __eq__(self, other):
        return (
            isinstance(other, Antichain)
            and self.grid == other.grid
            and self.n == other.n
            and self.elements == other.elements
        )

    def __hash__(self):
        return hash((self.n, self.elements))

    def __repr__(self):
        body = ", ".join(repr(y) for y in self.sorted_elements())
        return f"Antichain({{{body}}})"


def minimalize(grid, configs, n=1):
    """Antichain of minimal elements of a set of nonzero configurations.

    Candidates are sorted so that any strict minorant comes first
    (support size, then level sum); a candidate survives only when no
    accepted element sits below it.
    """
    pool = set(configs)
    for y in pool:
        if y.is_zero():
            raise ValueError("input reduces to the all-zero configuration")
        if y.grid != grid or y.n != n:
            raise ValueError("element on a different grid or state space")
    accepted = []
    for y in sorted(pool, key=Configuration.sort_key):
        if not any(leq(a, y) for a in accepted):
            accepted.append(y)
    return Antichain(grid, accepted, n=n, _checked=True)


def psi_mon(x, Y):
    """1 when some element of Y lies below x, else 0."""
    if x.grid != Y.grid:
        raise ValueError("configuration and antichain on different grids")
    for y in Y.elements:
        if leq(y, x):
            return 1
    return 0


def order_leq(Y, Z):
    """Dual order: the upset of Y is contained in the upset of Z.

    Finite test: every element of Y has some element of Z below it.
    """
    if Y.grid != Z.grid or Y.n != Z.n:
        raise ValueError("antichains on different spaces")
    for y in Y.elements:
        if not any(leq(z, y) for z in Z.elements):
            return False
    return True


def make_y_top(grid, n=1):
    """Greatest dual state: all single-site configurations at level 1."""
    return Antichain(
        grid, [basis(grid, i, 1, n=n) for i in grid.sites()], n=n, _checked=True
    )


def _restricted(Y, k):
    """Elements supported inside the first k sites of the enumeration."""
    limit = k  # gamma(i) = i + 1, so gamma(i) <= k means i < k
    return frozenset(
        y for y in Y.elements if all(site < limit for site in y.entries)
    )


def agreement_level(Y, Z):
    """Largest k such that Y and Z hit the same sets among configurations
    supported on sites with gamma <= k.

    Hitting agreement on that window is equivalent to equality of the
    window-restricted antichains, so this is a linear scan rather than
    an exhaustive test over window states.
    """
    if Y.grid != Z.grid or Y.n != Z.n:
        raise ValueError("antichains on different spaces")
    size = Y.grid.size
    level = 0
    for k in range(1, size + 1):
        if _restricted(Y, k) == _restricted(Z, k):
            level = k
        else:
            break
    return level


def antichain_window_distance(Y, Z):
    """3**(-k) with k the agreement level; exactly 0 for equal antichains."""
    if Y == Z:
        return Fraction(0)
    return Fraction(1, 3 ** agreement_level(Y, Z))


def is_additive_state(Y):
    """True when every element occupies a single site."""
    return all(y.support_size() == 1 for y in Y.elements)


def antichain_to_json(Y):
    """Canonical JSON form: elements in sorted order, sites by gamma."""
    elems = [
        [[Y.grid.gamma(site), v] for site, v in sorted(y.entries.items())]
        for y in Y.sorted_elements()
    ]
    return json.dumps({"elements": elems})


def antichain_from_json(grid, text, n=1):
    data = json.loads(text) if isinstance(text, str) else text
    elems = []
    for row in data["elements"]:
        entries = {g - 1: v for g, v in row}
        elems.append(Configuration(grid, entries, n=n))
    return Antichain(grid, elems, n=n)


# -- kernel form for two-level systems --------------------------------------


def antichain_to_kernel(Y):
    """Split a two-level antichain into (singles bitmask, multi masks)."""
    if Y.n != 1:
        raise ValueError("kernel form requires two local states")
    singles = 0
    multis = set()
    for y in Y.elements:
        m = y.mask
        if y.support_size() == 1:
            singles |= m
        else:
            multis.add(m)
    return singles, multis


def kernel_to_antichain(grid, singles, multis):
    elems = []
    m = singles
    while m:
        low = m & -m
        elems.append(Configuration.from_mask(grid, low))
        m ^= low
    for mm in multis:
        elems.append(Configuration.from_mask(grid, mm))
    return Antichain(grid, elems, n=1, _checked=True)
