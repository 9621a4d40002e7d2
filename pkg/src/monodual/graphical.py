"""Poisson event logs and the forward stochastic flow.

A rated family assigns a Poisson rate to each local map.  Sampling
draws a dominating Poisson stream at the total rate (event waiting
times are accumulated exponentials) and assigns maps by
rate-proportional categorical draws; this thinning construction is
what lets coupled samplers share streams.  The forward flow folds the
events of a window (s, t] over a configuration in time order.

For two-level systems without custom maps the fold runs on plain
integer bitmasks; each map is precompiled to a small op tuple.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .configuration import Configuration
from .localmap import (
    Branch,
    Coop,
    Custom,
    Death,
    apply_map,
    custom_to_json,
    dependence_sets,
    is_monotone,
    preserves_zero,
    translate_map,
)

__all__ = [
    "BudgetError",
    "EVENT_BUDGET",
    "RatedFamily",
    "cooperative_family",
    "EventLog",
    "derive_rng",
    "sample_event_log",
    "forward_flow",
    "evolving_set",
    "CoupledSampler",
    "sample_coupled_logs",
    "check_translation_invariance",
    "summability_bounds",
    "log_to_jsonl",
    "log_from_jsonl",
]

EVENT_BUDGET = 10**8


class BudgetError(RuntimeError):
    """A sample would exceed the global event budget."""


def derive_rng(master_seed, *tags):
    """Independent deterministic stream for (master seed, purpose tags).

    Integer tags pass through; string tags are hashed.  Streams for
    distinct tag tuples are independent, and the derivation does not
    depend on the order in which streams are created.
    """
    if master_seed < 0:
        raise ValueError("master seed must be nonnegative")
    words = [master_seed]
    for tag in tags:
        if isinstance(tag, (int, np.integer)):
            if tag < 0:
                raise ValueError("integer tags must be nonnegative")
            words.append(int(tag))
        else:
            digest = hashlib.sha256(str(tag).encode()).digest()
            words.append(int.from_bytes(digest[:8], "little"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


class RatedFamily:
    """Finite family of eligible local maps with positive rates.

    Maps must be monotone and fix the all-zero configuration; zero-rate
    maps are dropped at construction.  The compiled op tables are what
    the bitmask kernels fold.
    """

    __slots__ = (
        "grid",
        "n",
        "maps",
        "rates",
        "alpha",
        "delta",
        "claims_translation_invariance",
        "total_rate",
        "probs",
        "full_mask",
        "has_custom",
        "fwd_ops",
        "dual_ops",
        "_index",
    )

    def __init__(self, grid, rated_maps, n=1, alpha=None, delta=None,
                 claims_translation_invariance=False):
        self.grid = grid
        self.n = n
        maps = []
        rates = []
        for m, r in rated_maps:
            if r < 0:
                raise ValueError(f"negative rate {r} for {m}")
            if r == 0:
                continue
            for site in m.sites:
                if not 0 <= site < grid.size:
                    raise ValueError(f"map {m} uses site outside the grid")
            if not is_monotone(m, n) or not preserves_zero(m, n):
                raise ValueError(f"map {m} is not an eligible (monotone, zero-fixing) map")
            maps.append(m)
            rates.append(float(r))
        self.maps = tuple(maps)
        self.rates = np.asarray(rates, dtype=np.float64)
        self.alpha = alpha
        self.delta = delta
        self.claims_translation_invariance = claims_translation_invariance
        self.total_rate = float(self.rates.sum()) if maps else 0.0
        self.probs = self.rates / self.total_rate if self.total_rate > 0 else None
        self.full_mask = (1 << grid.size) - 1
        self._index = {m: k for k, m in enumerate(maps)}
        full = self.full_mask
        fwd = []
        dual = []
        has_custom = False
        for m in maps:
            if isinstance(m, Death):
                bj = 1 << m.j
                fwd.append((0, full ^ bj, 0))
                dual.append((0, bj, 0, 0))
            elif isinstance(m, Branch):
                fwd.append((1, 1 << m.i, 1 << m.j))
                dual.append((1, 1 << m.j, 1 << m.i, 0))
            elif isinstance(m, Coop):
                fwd.append((2, (1 << m.i) | (1 << m.i2), 1 << m.j))
                dual.append((2, 1 << m.j, 1 << m.i, 1 << m.i2))
            else:
                has_custom = True
                fwd.append((3, 0, 0))
                dual.append((3, 0, 0, 0))
        self.has_custom = has_custom
        self.fwd_ops = tuple(fwd)
        self.dual_ops = tuple(dual)

    def index_of(self, m):
        return self._index[m]

    def fast_kernel_ok(self):
        return self.n == 1 and not self.has_custom

    def __len__(self):
        return len(self.maps)

    def __repr__(self):
        return (
            f"RatedFamily({len(self.maps)} maps, total rate {self.total_rate:.6g} "
            f"on {self.grid.label})"
        )


def cooperative_family(grid, alpha, delta):
    """Two-level family: branching, cooperative branching, deaths.

    Per site j every neighbor branch gets rate (1-alpha)/deg(j), every
    ordered distinct neighbor pair gets rate alpha/#pairs, and death
    gets rate delta; so on grids of degree >= 2 the per-site masses are
    exactly 1-alpha, alpha and delta.  Zero-rate map classes are absent.
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    rated = []
    for j in grid.sites():
        ns = grid.neighbors[j]
        if alpha < 1 and ns:
            r = (1.0 - alpha) / len(ns)
            for i in ns:
                rated.append((Branch(i, j), r))
        pairs = grid.pair_neighbors[j]
        if alpha > 0 and pairs:
            r = alpha / len(pairs)
            for i, i2 in pairs:
                rated.append((Coop(i, i2, j), r))
        if delta > 0:
            rated.append((Death(j), delta))
    return RatedFamily(
        grid, rated, n=1, alpha=alpha, delta=delta,
        claims_translation_invariance=True,
    )


class EventLog:
    """Materialized Poisson events on a time window (s, u].

    Times are strictly increasing; each event references a map of the
    family.  The same log object drives both the forward flow (time
    order) and the dual flow (reverse order), which is what makes the
    pathwise duality checks exact.
    """

    __slots__ = ("grid", "family", "s", "u", "times", "map_idx", "provenance")

    def __init__(self, family, s, u, times, map_idx, provenance=()):
        if u < s:
            raise ValueError("window end before start")
        self.grid = family.grid
        self.family = family
        self.s = float(s)
        self.u = float(u)
        self.times = np.asarray(times, dtype=np.float64)
        self.map_idx = np.asarray(map_idx, dtype=np.int64)
        if self.times.shape != self.map_idx.shape:
            raise ValueError("times and map indices must align")
        if len(self.times):
            if self.times[0] <= self.s or self.times[-1] > self.u:
                raise ValueError("event times must lie in (s, u]")
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("event times must be strictly increasing")
        self.provenance = tuple(provenance)

    def __len__(self):
        return len(self.times)

    def events(self):
        maps = self.family.maps
        return [(float(t), maps[k]) for t, k in zip(self.times, self.map_idx)]

    def slice_indices(self, s, t):
        """Index range of events with time in (s, t]."""
        if not self.s <= s <= t <= self.u:
            raise ValueError(
                f"window ({s}, {t}] not inside log window ({self.s}, {self.u}]"
            )
        lo = int(np.searchsorted(self.times, s, side="right"))
        hi = int(np.searchsorted(self.times, t, side="right"))
        return lo, hi

    def restrict(self, predicate):
        """Sub-log keeping events whose map satisfies the predicate."""
        maps = self.family.maps
        keep = np.fromiter(
            (predicate(maps[k]) for k in self.map_idx),
            dtype=bool,
            count=len(self.map_idx),
        )
        return EventLog(
            self.family,
            self.s,
            self.u,
            self.times[keep],
            self.map_idx[keep],
            provenance=self.provenance + ("restricted",),
        )


def _strictly_increasing(times):
    """Resolve float collisions (measure zero) while keeping sequence order."""
    if len(times) < 2 or not np.any(np.diff(times) <= 0):
        return times
    out = times.copy()
    for k in range(1, len(out)):
        if out[k] <= out[k - 1]:
            out[k] = np.nextafter(out[k - 1], np.inf)
    return out


def _sample_times(total_rate, s, u, rng):
    """Dominating Poisson stream: accumulated exponential waiting times."""
    expected = total_rate * (u - s)
    if expected > EVENT_BUDGET:
        raise BudgetError(
            f"expected event count {expected:.3g} exceeds budget {EVENT_BUDGET:.3g}"
        )
    chunks = []
    t = s
    count = 0
    block = max(16, int(expected + 6.0 * np.sqrt(expected) + 16))
    while True:
        gaps = rng.exponential(1.0 / total_rate, size=block)
        cum = t + np.cumsum(gaps)
        inside = cum[cum <= u]
        chunks.append(inside)
        count += len(inside)
        if count > EVENT_BUDGET:
            raise BudgetError(f"event count exceeded budget {EVENT_BUDGET:.3g}")
        if len(inside) < len(gaps):
            break
        t = float(cum[-1])
        block = max(16, block // 4)
    times = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    return _strictly_increasing(times)


def sample_event_log(family, s, u, rng, provenance=()):
    """Sample the Poisson event log of a rated family on (s, u]."""
    if u < s:
        raise ValueError("window end before start")
    if family.total_rate == 0 or u == s:
        # a family whose maps all had rate zero produces no events
        return EventLog(family, s, u, [], [], provenance=provenance)
    times = _sample_times(family.total_rate, s, u, rng)
    n = len(times)
    if n == 0:
        idx = np.empty(0, dtype=np.int64)
    elif len(family.maps) == 1:
        idx = np.zeros(n, dtype=np.int64)
    else:
        idx = rng.choice(len(family.maps), size=n, p=family.probs)
    return EventLog(family, s, u, times, idx, provenance=provenance)


# -- forward folding ---------------------------------------------------------


def fold_mask(ops, idx, x):
    """Fold compiled events over a bitmask configuration, in order.

    Every rated map fixes the zero configuration, so once the mask
    empties no later event can repopulate it and the fold can return.
    """
    for k in idx:
        kind, a, b = ops[k]
        if kind == 1:
            if x & a:
                x |= b
        elif kind == 0:
            x &= a
            if not x:
                return 0
        elif kind == 2:
            if (x & a) == a:
                x |= b
        else:
            raise ValueError("custom maps have no bitmask op")
    return x


# same fold; the alias keeps survival-indicator call sites readable
fold_mask_absorbing = fold_mask


def forward_flow(log, x, s=None, t=None):
    """State at time t of the flow started from x at time s <= t.

    Folds exactly the events of (s, t] in time order; composing flows
    over adjacent windows therefore reproduces the one-shot result.
    """
    s = log.s if s is None else s
    t = log.u if t is None else t
    lo, hi = log.slice_indices(s, t)
    family = log.family
    if x.grid != family.grid:
        raise ValueError("configuration lives on a different grid")
    if x.n == family.n == 1 and not family.has_custom:
        mask = fold_mask(family.fwd_ops, log.map_idx[lo:hi].tolist(), x.mask)
        return Configuration.from_mask(family.grid, mask)
    maps = family.maps
    cur = x
    for k in log.map_idx[lo:hi]:
        cur = apply_map(maps[k], cur)
    return cur


def evolving_set(log, seed_sites, s=None, t=None):
    """Propagate a set of sites through the event dependence relations.

    At each event the new set keeps untouched members and admits every
    target site influenced by some current member.  The result contains
    every site where two flows started from configurations agreeing off
    the seed set could disagree at time t.
    """
    s = log.s if s is None else s
    t = log.u if t is None else t
    lo, hi = log.slice_indices(s, t)
    maps = log.family.maps
    xi = set(seed_sites)
    for k in log.map_idx[lo:hi]:
        ds = dependence_sets(maps[k], log.family.n)
        touched = ds.target_sites
        if not (xi & touched) and not any(i in xi for i, _ in ds.pairs):
            continue
        new = {site for site in xi if site not in touched}
        for i, j in ds.pairs:
            if i in xi:
                new.add(j)
        xi = new
    return frozenset(xi)


# -- coupled sampling --------------------------------------------------------


class CoupledSampler:
    """Shared-stream sampler for two parameter points (a, d) <= (a2, d2).

    Five independent Poisson classes are drawn per call; the lower-
    parameter log replaces each extra-cooperation event by the branch
    map with the same source and target, so branching mass is conserved
    and the two logs agree except where the stronger parameters add
    deaths or weaken branches into cooperations.
    """

    def __init__(self, grid, params, params2):
        a, d = params
        a2, d2 = params2
        if not (0 <= a <= a2 <= 1):
            raise ValueError("need 0 <= alpha <= alpha2 <= 1")
        if not (0 <= d <= d2):
            raise ValueError("need 0 <= delta <= delta2")
        self.grid = grid
        self.family = cooperative_family(grid, a, d)
        self.family2 = cooperative_family(grid, a2, d2)
        classes = []
        deaths = [Death(j) for j in grid.sites()]
        branches = [
            Branch(i, j) for j in grid.sites() for i in grid.neighbors[j]
        ]
        coops = [
            Coop(i, i2, j)
            for j in grid.sites()
            for i, i2 in grid.pair_neighbors[j]
        ]

        def add_class(maps, rate_of, idx_a, idx_b):
            rates = np.array([rate_of(m) for m in maps], dtype=np.float64)
            keep = rates > 0
            if not keep.any():
                return
            kept = [m for m, ok in zip(maps, keep) if ok]
            rates = rates[keep]
            ia = (
                np.array([idx_a(m) for m in kept], dtype=np.int64)
                if idx_a
                else None
            )
            ib = (
                np.array([idx_b(m) for m in kept], dtype=np.int64)
                if idx_b
                else None
            )
            total = float(rates.sum())
            classes.append((rates / total, total, ia, ib))

        f1, f2 = self.family, self.family2
        # shared deaths at rate d
        add_class(deaths, lambda m: d, lambda m: f1.index_of(m), lambda m: f2.index_of(m))
        # extra deaths at rate d2 - d, only in the stronger-death log
        add_class(deaths, lambda m: d2 - d, None, lambda m: f2.index_of(m))
        # shared branches at rate (1 - a2) / deg
        add_class(
            branches,
            lambda m: (1.0 - a2) / grid.degree(m.j),
            lambda m: f1.index_of(m),
            lambda m: f2.index_of(m),
        )
        # shared cooperations at rate a / #pairs
        add_class(
            coops,
            lambda m: a / len(grid.pair_neighbors[m.j]) if a > 0 else 0.0,
            lambda m: f1.index_of(m),
            lambda m: f2.index_of(m),
        )
        # extra cooperations at rate (a2 - a) / #pairs; the low-alpha log
        # receives the matching branch instead
        add_class(
            coops,
            lambda m: (a2 - a) / len(grid.pair_neighbors[m.j]) if a2 > a else 0.0,
            lambda m: f1.index_of(Branch(m.i, m.j)),
            lambda m: f2.index_of(m),
        )
        self._classes = classes

    def sample(self, s, u, rng, provenance=()):
        parts_t = []
        parts_a = []
        parts_b = []
        for probs, total, ia, ib in self._classes:
            times = _sample_times(total, s, u, rng)
            n = len(times)
            if n == 0:
                continue
            if len(probs) == 1:
                picks = np.zeros(n, dtype=np.int64)
            else:
                picks = rng.choice(len(probs), size=n, p=probs)
            parts_t.append(times)
            parts_a.append(ia[picks] if ia is not None else None)
            parts_b.append(ib[picks] if ib is not None else None)

        def build(family, legs, tag):
            ts = [t for t, leg in zip(parts_t, legs) if leg is not None]
            ks = [leg for leg in legs if leg is not None]
            if not ts:
                return EventLog(family, s, u, [], [], provenance=provenance + (tag,))
            times = np.concatenate(ts)
            idx = np.concatenate(ks)
            order = np.argsort(times, kind="stable")
            return EventLog(
                family,
                s,
                u,
                _strictly_increasing(times[order]),
                idx[order],
                provenance=provenance + (tag,),
            )

        return build(self.family, parts_a, "low"), build(self.family2, parts_b, "high")


def sample_coupled_logs(grid, params, params2, s, u, rng):
    """One-shot coupled sample; build a CoupledSampler for repeated use."""
    return CoupledSampler(grid, params, params2).sample(s, u, rng)


# -- family diagnostics ------------------------------------------------------


def check_translation_invariance(family):
    """Verify the map-rate table is invariant under the grid generators."""
    grid = family.grid
    table = {m: r for m, r in zip(family.maps, family.rates)}
    for g in grid.generators:
        for m, r in table.items():
            m2 = translate_map(grid, g, m)
            if table.get(m2) != r:
                return False
    return True


@dataclass(frozen=True)
class SummabilityBounds:
    max_rate_touching_site: float
    max_incoming_weight: float
    max_outgoing_weight: float


def summability_bounds(family):
    """Finite-grid values of the three per-site rate sums.

    The first is the total rate of maps that can change a given site,
    the other two weight each map by how many off-target (resp.
    off-source) dependence pairs it contributes.
    """
    size = family.grid.size
    touching = np.zeros(size)
    incoming = np.zeros(size)
    outgoing = np.zeros(size)
    for m, r in zip(family.maps, family.rates):
        ds = dependence_sets(m, family.n)
        for j in ds.target_sites:
            touching[j] += r
            incoming[j] += r * len(ds.r_down(j) - {j})
        for i in set(i for i, _ in ds.pairs):
            outgoing[i] += r * len(ds.r_up(i) - {i})
    return SummabilityBounds(
        float(touching.max()) if size else 0.0,
        float(incoming.max()) if size else 0.0,
        float(outgoing.max()) if size else 0.0,
    )


# -- serialization -----------------------------------------------------------


def log_to_jsonl(log):
    """One JSON object per event; times as IEEE-754 hex strings."""
    lines = []
    maps = log.family.maps
    for t, k in zip(log.times, log.map_idx):
        m = maps[k]
        rec = {"t": float(t).hex(), "kind": m.kind, "sites": list(m.sites)}
        if isinstance(m, Custom):
            rec["table"] = json.loads(custom_to_json(m))["table"]
            rec["n"] = m.n
        lines.append(json.dumps(rec))
    return "\n".join(lines) + ("\n" if lines else "")


def log_from_jsonl(family, s, u, text, provenance=()):
    """Rebuild a log against a family; every event map must belong to it."""
    times = []
    idx = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        t = float.fromhex(rec["t"]) if isinstance(rec["t"], str) else float(rec["t"])
        kind = rec["kind"]
        sites = rec["sites"]
        if kind == "dth":
            m = Death(sites[0])
        elif kind == "bra":
            m = Branch(sites[0], sites[1])
        elif kind == "coop":
            m = Coop(sites[0], sites[1], sites[2])
        elif kind == "custom":
            rows = [
                (tuple(int(c) for c in key), tuple(int(c) for c in out))
                for key, out in rec["table"].items()
            ]
            m = Custom(tuple(sites), rows, n=rec.get("n", 1))
        else:
            raise ValueError(f"unknown event kind {kind!r}")
        times.append(t)
        idx.append(family.index_of(m))
    return EventLog(family, s, u, times, idx, provenance=provenance)
