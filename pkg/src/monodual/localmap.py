"""Local maps: the elementary transitions applied at event times.

Three built-in kinds plus user-defined table maps:

* ``Death(j)``        sets site j to 0
* ``Branch(i, j)``    raises site j to max(x(i), x(j))
* ``Coop(i, i2, j)``  raises site j to max(min(x(i), x(i2)), x(j))
* ``Custom(window, table)``  any map acting inside a small site window

Every map only ever changes sites inside its window and reads nothing
outside it, which is what makes the exact dependence sets below finite
and cheap to compute.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

from .configuration import Configuration

__all__ = [
    "Death",
    "Branch",
    "Coop",
    "Custom",
    "LocalMap",
    "DependenceSets",
    "apply_map",
    "dependence_sets",
    "is_monotone",
    "is_additive",
    "map_window",
    "translate_map",
    "custom_to_json",
    "custom_from_json",
]

CUSTOM_WINDOW_CAP = 6


@dataclass(frozen=True)
class Death:
    j: int

    @property
    def kind(self):
        return "dth"

    @property
    def sites(self):
        return (self.j,)


@dataclass(frozen=True)
class Branch:
    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("branch source and target must differ")

    @property
    def kind(self):
        return "bra"

    @property
    def sites(self):
        return (self.i, self.j)


@dataclass(frozen=True)
class Coop:
    i: int
    i2: int
    j: int

    def __post_init__(self):
        if len({self.i, self.i2, self.j}) != 3:
            raise ValueError("coop sites must be pairwise distinct")

    @property
    def kind(self):
        return "coop"

    @property
    def sites(self):
        return (self.i, self.i2, self.j)


@dataclass(frozen=True)
class Custom:
    window: tuple
    table: tuple  # output tuples indexed by mixed-radix input, see _index
    n: int = 1

    def __init__(self, window, table, n=1):
        window = tuple(window)
        if len(window) == 0:
            raise ValueError("custom map needs a nonempty window")
        if len(set(window)) != len(window):
            raise ValueError("window sites must be distinct")
        if len(window) > CUSTOM_WINDOW_CAP:
            raise ValueError(
                f"custom window capped at {CUSTOM_WINDOW_CAP} sites, got {len(window)}"
            )
        w = len(window)
        flat = [None] * (n + 1) ** w
        if isinstance(table, dict):
            items = table.items()
        else:
            items = table
        count = 0
        for key, out in items:
            key = tuple(key)
            out = tuple(out)
            if len(key) != w or len(out) != w:
                raise ValueError("table rows must match the window length")
            if any(not 0 <= v <= n for v in key + out):
                raise ValueError("table values outside local state range")
            pos = _mixed_index(key, n)
            if flat[pos] is not None:
                raise ValueError(f"duplicate table row for input {key}")
            flat[pos] = out
            count += 1
        if count != len(flat):
            raise ValueError(
                f"table must cover all {(n + 1) ** w} window states, got {count}"
            )
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "table", tuple(flat))
        object.__setattr__(self, "n", n)

    @property
    def kind(self):
        return "custom"

    @property
    def sites(self):
        return self.window


LocalMap = (Death, Branch, Coop, Custom)


def _mixed_index(key, n):
    pos = 0
    for v in key:
        pos = pos * (n + 1) + v
    return pos


def map_window(m):
    """Sites a map may read or write."""
    return m.sites


def _apply_window(m, values, n):
    """Apply a map to a window-state tuple (aligned with map_window)."""
    if isinstance(m, Death):
        return (0,)
    if isinstance(m, Branch):
        xi, xj = values
        return (xi, max(xi, xj))
    if isinstance(m, Coop):
        xi, xi2, xj = values
        return (xi, xi2, max(min(xi, xi2), xj))
    return m.table[_mixed_index(values, n)]


def apply_map(m, x):
    """Apply a local map to a configuration, returning a new configuration."""
    window = m.sites
    values = tuple(x.value(s) for s in window)
    n = m.n if isinstance(m, Custom) else x.n
    out_values = _apply_window(m, values, n)
    if out_values == values:
        return x
    entries = dict(x.entries)
    for site, v in zip(window, out_values):
        if v:
            entries[site] = v
        else:
            entries.pop(site, None)
    return Configuration(x.grid, entries, n=x.n)


class DependenceSets:
    """Exact dependence structure of a local map.

    ``target_sites`` is the set D(m) of sites the map can change.  The
    relation R(m) pairs input sites with the output sites they can
    influence; it always contains the diagonal (k, k) for every site k
    outside D(m), because an untouched site trivially copies its own
    input.  ``pairs`` stores only the part with targets inside D(m);
    the implied off-target diagonal is handled by ``contains``.
    """

    __slots__ = ("target_sites", "pairs")

    def __init__(self, target_sites, pairs):
        self.target_sites = frozenset(target_sites)
        self.pairs = frozenset(pairs)

    def contains(self, i, j):
        if (i, j) in self.pairs:
            return True
        return i == j and j not in self.target_sites

    def r_down(self, j):
        """Input sites that can influence output site j."""
        if j not in self.target_sites:
            return frozenset((j,))
        return frozenset(i for i, k in self.pairs if k == j)

    def r_up(self, i):
        """Output sites that input site i can influence."""
        out = set(j for a, j in self.pairs if a == i)
        if i not in self.target_sites:
            out.add(i)
        return frozenset(out)

    def __repr__(self):
        return f"DependenceSets(D={sorted(self.target_sites)}, pairs={sorted(self.pairs)})"


@lru_cache(maxsize=None)
def dependence_sets(m, n=1):
    """Brute-force exact D(m) and R(m) over the map's window.

    All window-state pairs differing at a single site are compared;
    this is exact because a map never reads or writes outside its
    window.
    """
    if isinstance(m, Custom):
        n = m.n
    window = m.sites
    w = len(window)
    states = list(itertools.product(range(n + 1), repeat=w))
    outs = {s: _apply_window(m, s, n) for s in states}
    targets = set()
    for s in states:
        o = outs[s]
        for k in range(w):
            if o[k] != s[k]:
                targets.add(window[k])
    pairs = set()
    for s in states:
        o = outs[s]
        for k in range(w):
            for v in range(n + 1):
                if v == s[k]:
                    continue
                s2 = s[:k] + (v,) + s[k + 1 :]
                o2 = outs[s2]
                for q in range(w):
                    if o[q] != o2[q] and window[q] in targets:
                        pairs.add((window[k], window[q]))
    return DependenceSets(targets, pairs)


@lru_cache(maxsize=None)
def is_monotone(m, n=1):
    """Check m(x) <= m(y) whenever x <= y, exhaustively over the window."""
    if isinstance(m, Custom):
        n = m.n
    window = m.sites
    states = list(itertools.product(range(n + 1), repeat=len(window)))
    outs = {s: _apply_window(m, s, n) for s in states}
    for s in states:
        for t in states:
            if all(a <= b for a, b in zip(s, t)):
                if not all(a <= b for a, b in zip(outs[s], outs[t])):
                    return False
    return True


@lru_cache(maxsize=None)
def is_additive(m, n=1):
    """Check m(x v y) = m(x) v m(y) and m(0) = 0 over the window."""
    if isinstance(m, Custom):
        n = m.n
    window = m.sites
    w = len(window)
    states = list(itertools.product(range(n + 1), repeat=w))
    outs = {s: _apply_window(m, s, n) for s in states}
    if any(v != 0 for v in outs[(0,) * w]):
        return False
    for s in states:
        for t in states:
            u = tuple(max(a, b) for a, b in zip(s, t))
            if outs[u] != tuple(max(a, b) for a, b in zip(outs[s], outs[t])):
                return False
    return True


def preserves_zero(m, n=1):
    if isinstance(m, Custom):
        n = m.n
    w = len(m.sites)
    return all(v == 0 for v in _apply_window(m, (0,) * w, n))


def translate_map(grid, g, m):
    """Conjugate a map by the translation sending site s to g*s."""
    if isinstance(m, Death):
        return Death(grid.mul(g, m.j))
    if isinstance(m, Branch):
        return Branch(grid.mul(g, m.i), grid.mul(g, m.j))
    if isinstance(m, Coop):
        return Coop(grid.mul(g, m.i), grid.mul(g, m.i2), grid.mul(g, m.j))
    window = tuple(grid.mul(g, s) for s in m.window)
    rows = []
    states = itertools.product(range(m.n + 1), repeat=len(window))
    for s in states:
        rows.append((s, m.table[_mixed_index(s, m.n)]))
    return Custom(window, rows, n=m.n)


def custom_to_json(m):
    """Serialize a custom map; window states are digit strings."""
    rows = {}
    for s in itertools.product(range(m.n + 1), repeat=len(m.window)):
        out = m.table[_mixed_index(s, m.n)]
        rows["".join(map(str, s))] = "".join(map(str, out))
    return json.dumps({"window": list(m.window), "table": rows, "n": m.n})


def custom_from_json(text):
    data = json.loads(text) if isinstance(text, str) else text
    n = data.get("n", 1)
    rows = [
        (tuple(int(c) for c in key), tuple(int(c) for c in out))
        for key, out in data["table"].items()
    ]
    return Custom(tuple(data["window"]), rows, n=n)
