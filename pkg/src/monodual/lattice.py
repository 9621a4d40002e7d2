"""Finite grids: tori of arbitrary dimension and general Cayley graphs.

A grid bundles a finite site set {0, ..., size-1} with its neighbourhood
structure, the group product used for translations, and a fixed site
enumeration gamma(i) = i + 1 that the window metric and the exact-state
indexing both rely on.  Sites are plain integers everywhere; torus
coordinates exist only inside the constructor.
"""

from __future__ import annotations

import csv
import itertools

import numpy as np

__all__ = [
    "Grid",
    "make_torus",
    "make_cayley",
    "make_small_grid",
    "load_cayley_csv",
    "translate_config",
]


class Grid:
    """Immutable finite grid. Instances are safe to share across workers.

    Attributes
    ----------
    size : number of sites
    neighbors : tuple of tuples, neighbors[j] lists N_j in a fixed order
    pair_neighbors : pair_neighbors[j] lists all ordered pairs of distinct
        neighbors of j (empty when deg(j) < 2)
    generators : the symmetric generating set used to build the edges
    signature : hashable structural identity, used for equality
    """

    __slots__ = (
        "size",
        "neighbors",
        "pair_neighbors",
        "generators",
        "signature",
        "label",
        "_kind",
        "_shape",
        "_table",
        "_inv",
    )

    def __init__(self, size, neighbors, generators, signature, label, kind, shape=None, table=None, inv=None):
        self.size = size
        self.neighbors = tuple(tuple(ns) for ns in neighbors)
        self.pair_neighbors = tuple(
            tuple((i, k) for i in ns for k in ns if i != k) for ns in self.neighbors
        )
        self.generators = tuple(generators)
        self.signature = signature
        self.label = label
        self._kind = kind
        self._shape = shape
        self._table = table
        self._inv = inv

    # -- group structure ----------------------------------------------------

    def mul(self, a, b):
        """Group product of two sites (identity is site 0)."""
        if self._kind == "torus":
            d, L = self._shape
            out = 0
            stride = 1
            for _ in range(d):
                out += ((a % L + b % L) % L) * stride
                a //= L
                b //= L
                stride *= L
            return out
        return int(self._table[a, b])

    def inv(self, a):
        """Group inverse of a site."""
        if self._kind == "torus":
            d, L = self._shape
            out = 0
            stride = 1
            for _ in range(d):
                out += ((L - a % L) % L) * stride
                a //= L
                stride *= L
            return out
        return int(self._inv[a])

    def gamma(self, i):
        """Site enumeration, a bijection onto {1, ..., size}."""
        return i + 1

    def sites(self):
        return range(self.size)

    def edges(self):
        """Undirected edge set as a frozenset of frozensets."""
        return frozenset(
            frozenset((j, i)) for j in self.sites() for i in self.neighbors[j]
        )

    def degree(self, j):
        return len(self.neighbors[j])

    def __eq__(self, other):
        return isinstance(other, Grid) and self.signature == other.signature

    def __hash__(self):
        return hash(self.signature)

    def __repr__(self):
        return f"Grid({self.label})"


def make_torus(dim, length):
    """Torus (Z/length)^dim with nearest-neighbor edges.

    Requires dim >= 1 and length >= 3 so that the 2*dim generator
    directions stay distinct and every vertex has degree >= 2.
    Sites are numbered row-major; site 0 is the group identity.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if length < 3:
        raise ValueError(f"length must be >= 3, got {length}")
    size = length**dim
    strides = [length**k for k in range(dim)]
    gens = []
    for k in range(dim):
        gens.append(strides[k])                 # +e_k
        gens.append((length - 1) * strides[k])  # -e_k
    neighbors = []
    for j in range(size):
        coords = [(j // strides[k]) % length for k in range(dim)]
        ns = []
        for k in range(dim):
            for step in (1, length - 1):
                c = coords.copy()
                c[k] = (c[k] + step) % length
                ns.append(sum(c[q] * strides[q] for q in range(dim)))
        neighbors.append(ns)
    sig = ("torus", dim, length)
    return Grid(
        size,
        neighbors,
        gens,
        sig,
        f"torus(dim={dim},length={length})",
        "torus",
        shape=(dim, length),
    )


def _check_group(table):
    n = table.shape[0]
    if table.shape != (n, n):
        raise ValueError("multiplication table must be square")
    if table.min() < 0 or table.max() >= n:
        raise ValueError("table entries must be sites")
    if not np.array_equal(table[0], np.arange(n)) or not np.array_equal(
        table[:, 0], np.arange(n)
    ):
        raise ValueError("site 0 must be the group identity")
    # associativity: (ab)c == a(bc), vectorized over all triples
    ab_c = table[table, :]          # [a,b,c] -> (ab)c
    a_bc = table[:, table]          # [a,b,c] -> a(bc)
    if not np.array_equal(ab_c, a_bc):
        raise ValueError("multiplication table is not associative")
    inv = np.full(n, -1, dtype=np.int64)
    for a in range(n):
        hits = np.nonzero(table[a] == 0)[0]
        if len(hits) != 1 or table[hits[0], a] != 0:
            raise ValueError(f"site {a} has no two-sided inverse")
        inv[a] = hits[0]
    return inv


def make_cayley(table, generators):
    """Cayley graph of a finite group given by its multiplication table.

    `table[a][b]` is the product a*b, sites named by integer index with
    identity 0.  `generators` must be symmetric (closed under inverse),
    not contain the identity, have at least two elements, and generate
    the whole group; edges are {j, j*g}.
    """
    table = np.asarray(table, dtype=np.int64)
    inv = _check_group(table)
    n = table.shape[0]
    gens = sorted(set(int(g) for g in generators))
    if any(g <= 0 or g >= n for g in gens):
        raise ValueError("generators must be non-identity sites")
    if set(inv[g] for g in gens) != set(gens):
        raise ValueError("generator set must be symmetric under inversion")
    if len(gens) < 2:
        raise ValueError("need at least two generators so every degree is >= 2")
    # reachability from identity
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                b = int(table[a, g])
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        frontier = nxt
    if len(seen) != n:
        raise ValueError("generators do not generate the group")
    neighbors = [[int(table[j, g]) for g in gens] for j in range(n)]
    sig = ("cayley", table.tobytes(), tuple(gens))
    return Grid(
        n,
        neighbors,
        gens,
        sig,
        f"cayley(size={n},gens={gens})",
        "cayley",
        table=table,
        inv=inv,
    )


def make_small_grid(size):
    """Degenerate 1- or 2-site grid for exact-oracle use only.

    These bypass the degree >= 2 requirement: the 1-site grid has no
    neighbors at all, the 2-site grid is a single edge (cyclic group of
    order two, one generator).  Cooperative families on them simply have
    no branch or coop maps where the neighborhoods are empty.
    """
    if size == 1:
        return Grid(1, [[]], [], ("tiny", 1), "tiny(size=1)", "cayley",
                    table=np.zeros((1, 1), dtype=np.int64),
                    inv=np.zeros(1, dtype=np.int64))
    if size == 2:
        table = np.array([[0, 1], [1, 0]], dtype=np.int64)
        return Grid(2, [[1], [0]], [1], ("tiny", 2), "tiny(size=2)", "cayley",
                    table=table, inv=np.array([0, 1], dtype=np.int64))
    raise ValueError("make_small_grid supports sizes 1 and 2; use make_torus/make_cayley otherwise")


def load_cayley_csv(path, generators):
    """Build a Cayley grid from a CSV multiplication table.

    Row i, column j of the file holds the product i*j; sites are named
    by integer index.  No header row.
    """
    with open(path, newline="") as fh:
        rows = [[int(cell) for cell in row] for row in csv.reader(fh) if row]
    return make_cayley(np.array(rows, dtype=np.int64), generators)


def translate_config(grid, i, x):
    """Translate a configuration by group element i.

    The translate y satisfies y(j) = x(inv(i)*j), so the support moves
    from j to i*j.
    """
    from .configuration import Configuration

    if x.grid != grid:
        raise ValueError("configuration lives on a different grid")
    return Configuration(
        grid, {grid.mul(i, j): v for j, v in x.entries.items()}, n=x.n
    )
