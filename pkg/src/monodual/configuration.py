"""Configurations: states of the particle system, one local level per site.

Local values live in the totally ordered set {0, ..., n}; a configuration
stores only its nonzero entries.  For two-level systems (n = 1) a
configuration has an equivalent bitmask form that the simulation kernel
uses, with bit (gamma(i) - 1) = i set when site i is occupied.
"""

from __future__ import annotations

import json
from fractions import Fraction

__all__ = [
    "LocalStateSpace",
    "Configuration",
    "leq",
    "join",
    "meet",
    "basis",
    "zero",
    "top",
    "config_distance",
    "config_to_json",
    "config_from_json",
]


class LocalStateSpace:
    """The totally ordered local state set {0, ..., n}."""

    __slots__ = ("n",)

    def __init__(self, n=1):
        if n < 1:
            raise ValueError("need at least two local states")
        self.n = n

    def states(self):
        return range(self.n + 1)

    def __eq__(self, other):
        return isinstance(other, LocalStateSpace) and self.n == other.n

    def __hash__(self):
        return hash(("LocalStateSpace", self.n))

    def __repr__(self):
        return f"LocalStateSpace(n={self.n})"


class Configuration:
    """Immutable map from sites to local states, zeros omitted."""

    __slots__ = ("grid", "n", "entries", "_key", "_mask")

    def __init__(self, grid, entries, n=1):
        self.grid = grid
        self.n = n
        clean = {}
        for site, value in entries.items():
            if not 0 <= site < grid.size:
                raise ValueError(f"site {site} outside grid of size {grid.size}")
            if not 0 <= value <= n:
                raise ValueError(f"state {value} outside 0..{n}")
            if value:
                clean[site] = value
        self.entries = clean
        self._key = tuple(sorted(clean.items()))
        self._mask = None

    @classmethod
    def from_mask(cls, grid, mask):
        """Two-level configuration from a bitmask (bit i = site i occupied)."""
        entries = {}
        m = mask
        while m:
            low = m & -m
            entries[low.bit_length() - 1] = 1
            m ^= low
        out = cls(grid, entries, n=1)
        out._mask = mask
        return out

    @property
    def mask(self):
        if self.n != 1:
            raise ValueError("bitmask form requires two local states")
        if self._mask is None:
            m = 0
            for site in self.entries:
                m |= 1 << site
            self._mask = m
        return self._mask

    def value(self, site):
        return self.entries.get(site, 0)

    def support(self):
        return frozenset(self.entries)

    def support_size(self):
        return len(self.entries)

    def is_zero(self):
        return not self.entries

    def sort_key(self):
        """Deterministic ordering key: support size, then levels, then sites."""
        return (len(self._key), sum(v for _, v in self._key), self._key)

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.grid == other.grid
            and self.n == other.n
            and self._key == other._key
        )

    def __hash__(self):
        return hash((self.n, self._key))

    def __repr__(self):
        body = ",".join(f"{s}:{v}" for s, v in self._key)
        return f"Config({{{body}}})"


def zero(grid, n=1):
    return Configuration(grid, {}, n=n)


def top(grid, n=1):
    return Configuration(grid, {i: n for i in grid.sites()}, n=n)


def basis(grid, site, a=1, n=1):
    """Configuration with level a at one site and zero elsewhere."""
    if a < 1:
        raise ValueError("basis level must be positive")
    return Configuration(grid, {site: a}, n=n)


def _check_pair(x, y):
    if x.grid != y.grid or x.n != y.n:
        raise ValueError("configurations live on different spaces")


def leq(x, y):
    """Pointwise order: x(i) <= y(i) at every site."""
    _check_pair(x, y)
    ye = y.entries
    for site, v in x.entries.items():
        if v > ye.get(site, 0):
            return False
    return True


def join(x, y):
    """Pointwise maximum."""
    _check_pair(x, y)
    out = dict(x.entries)
    for site, v in y.entries.items():
        if v > out.get(site, 0):
            out[site] = v
    return Configuration(x.grid, out, n=x.n)


def meet(x, y):
    """Pointwise minimum."""
    _check_pair(x, y)
    ye = y.entries
    out = {}
    for site, v in x.entries.items():
        w = ye.get(site, 0)
        if w:
            out[site] = min(v, w)
    return Configuration(x.grid, out, n=x.n)


def config_distance(x, y):
    """Window metric: sum of 3**(-gamma(i)) over sites where x and y differ.

    Exact rational arithmetic; the numerator is an integer over
    3**size, so configurations agreeing on every site i with
    gamma(i) <= k are at distance <= 3**(-k) / 2, while a disagreement
    inside that window forces distance >= 3**(-k).
    """
    _check_pair(x, y)
    size = x.grid.size
    num = 0
    xe, ye = x.entries, y.entries
    for site in set(xe) | set(ye):
        if xe.get(site, 0) != ye.get(site, 0):
            num += 3 ** (size - x.grid.gamma(site))
    return Fraction(num, 3**size)


def config_to_json(x):
    """JSON text form: {"support": [[gamma(i), state], ...]} sorted by gamma."""
    support = [[x.grid.gamma(site), v] for site, v in sorted(x.entries.items())]
    return json.dumps({"support": support})


def config_from_json(grid, text, n=1):
    data = json.loads(text) if isinstance(text, str) else text
    entries = {}
    for g, v in data["support"]:
        entries[g - 1] = v
    return Configuration(grid, entries, n=n)
