"""Dual maps and the backward flow on antichains.

For a monotone zero-fixing map m, the dual map sends an antichain Y to
the minimal configurations whose image under m lands in the upset of
Y.  Folding the dual maps of a materialized event log in reverse time
order gives the dual flow, and the defining property holds pathwise,
event by event:

    psi_mon(forward(x), Y) == psi_mon(x, backward(Y))

whenever both folds consume the same log over the same window.

The three built-in kinds have closed-form duals; any map gets the
generic window-enumeration dual, and the two routes agree (this is one
of the things the verification battery checks rather than assumes).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .antichain import (
    Antichain,
    antichain_to_kernel,
    kernel_to_antichain,
    minimalize,
    psi_mon,
)
from .configuration import Configuration
from .localmap import Branch, Coop, Death, apply_map, dependence_sets, is_monotone, preserves_zero

__all__ = [
    "DualMap",
    "make_dual",
    "dual_apply",
    "dual_apply_death",
    "dual_apply_branch",
    "dual_apply_coop",
    "dual_apply_generic",
    "backward_flow",
    "fold_dual_kernel",
    "check_pathwise_duality",
    "additive_closure_check",
]


# -- explicit duals for the built-in kinds (two-level systems) ---------------


def dual_apply_death(j, Y):
    """Keep exactly the elements vanishing at j.

    To dominate y after a death at j, the input must dominate y on its
    own; if y needs site j there is no way to get it.
    """
    kept = [y for y in Y.elements if j not in y.entries]
    return Antichain(Y.grid, kept, n=Y.n, _checked=True)


def dual_apply_branch(i, j, Y):
    """Each element needing j can alternatively be served from source i."""
    if Y.n != 1:
        raise ValueError("explicit branch dual is the two-level closed form")
    out = set(Y.elements)
    for y in Y.elements:
        if j in y.entries:
            entries = dict(y.entries)
            del entries[j]
            entries[i] = 1
            out.add(Configuration(Y.grid, entries, n=Y.n))
    return minimalize(Y.grid, out, n=Y.n)


def dual_apply_coop(i, i2, j, Y):
    """Like the branch dual but the alternative needs both sources."""
    if Y.n != 1:
        raise ValueError("explicit coop dual is the two-level closed form")
    out = set(Y.elements)
    for y in Y.elements:
        if j in y.entries:
            entries = dict(y.entries)
            del entries[j]
            entries[i] = 1
            entries[i2] = 1
            out.add(Configuration(Y.grid, entries, n=Y.n))
    return minimalize(Y.grid, out, n=Y.n)


# -- generic dual by window enumeration --------------------------------------


def dual_apply_generic(m, Y):
    """Dual of an arbitrary eligible map, by enumerating window states.

    The window W collects the target sites and everything they read.
    For each element y the preimage condition splits: off W the input
    must dominate y coordinate-wise, inside W it must satisfy a
    monotone condition decided entirely by the window state.  Minimal
    window states combine freely with the off-window floor, and the
    union over y is minimalized.
    """
    n = Y.n
    grid = Y.grid
    ds = dependence_sets(m, n)
    targets = ds.target_sites
    window = sorted(set(targets) | {i for j in targets for i in ds.r_down(j)})
    wset = set(window)
    pos = {site: k for k, site in enumerate(window)}
    states = list(itertools.product(range(n + 1), repeat=len(window)))

    candidates = set()
    for y in Y.elements:
        floor = {site: v for site, v in y.entries.items() if site not in wset}
        feasible = []
        for w in states:
            ok = True
            for site, v in y.entries.items():
                if site in wset and site not in targets and w[pos[site]] < v:
                    ok = False
                    break
            if not ok:
                continue
            probe = Configuration(
                grid, {site: w[pos[site]] for site in window}, n=n
            )
            image = apply_map(m, probe)
            if all(image.value(j) >= y.entries.get(j, 0) for j in targets):
                feasible.append(w)
        # minimal window states under the pointwise order
        for w in feasible:
            if not any(
                v != w and all(a <= b for a, b in zip(v, w)) for v in feasible
            ):
                entries = dict(floor)
                for site in window:
                    if w[pos[site]]:
                        entries[site] = w[pos[site]]
                candidates.add(Configuration(grid, entries, n=n))
    return minimalize(grid, candidates, n=n)


@dataclass(frozen=True)
class DualMap:
    """Dual of a local map; strategy is 'explicit' or 'generic'."""

    source: object
    strategy: str

    def apply(self, Y):
        if self.strategy == "explicit":
            m = self.source
            if isinstance(m, Death):
                return dual_apply_death(m.j, Y)
            if isinstance(m, Branch):
                return dual_apply_branch(m.i, m.j, Y)
            return dual_apply_coop(m.i, m.i2, m.j, Y)
        return dual_apply_generic(self.source, Y)


def make_dual(m, n=1):
    if not is_monotone(m, n) or not preserves_zero(m, n):
        raise ValueError(f"map {m} has no dual: not monotone and zero-fixing")
    if n == 1 and isinstance(m, (Death, Branch, Coop)):
        return DualMap(m, "explicit")
    return DualMap(m, "generic")


def dual_apply(m, Y):
    """Apply the dual of m, choosing the explicit route when available."""
    return make_dual(m, Y.n).apply(Y)


# -- kernel fold for two-level antichains -------------------------------------


def _insert_multi(singles, multis, cand):
    """Insert a multi-site mask, keeping the pair an antichain."""
    if cand & singles:
        return multis
    out = set()
    for mm in multis:
        if not (mm & ~cand):
            # an existing element sits (weakly) below the candidate
            return multis
        if cand & ~mm:
            out.add(mm)
        # else: candidate sits strictly below mm, which drops out
    out.add(cand)
    return out


# above this many multi elements the per-event set scans dominate, so
# the fold hands off to the array engine (provided masks fit in 64 bits)
_VEC_MIN = 48


def _batch_insert(sg, mm, cands):
    """Minimalize mm against a batch of multi-site candidate masks.

    Equivalent to inserting the candidates one by one: a candidate
    dominated by the current state (or by a smaller candidate) is
    dropped, and accepted candidates evict every mask above them.
    """
    cands = np.unique(cands)
    if sg:
        cands = cands[(cands & np.uint64(sg)) == 0]
    if cands.size and mm.size:
        dom = ((mm[:, None] & ~cands[None, :]) == 0).any(axis=0)
        cands = cands[~dom]
    if cands.size > 1:
        below = (cands[:, None] & ~cands[None, :]) == 0
        np.fill_diagonal(below, False)
        cands = cands[~below.any(axis=0)]
    if not cands.size:
        return mm
    if mm.size:
        evict = ((cands[:, None] & ~mm[None, :]) == 0).any(axis=0)
        if evict.any():
            mm = mm[~evict]
        return np.concatenate([mm, cands])
    return cands


def _fold_vec(ops, idx_reversed, start, singles, multis, stop_when_empty):
    """Array engine for big antichain states; masks must fit 64 bits."""
    u64 = np.uint64
    zero = u64(0)
    mm = np.fromiter(multis, dtype=np.uint64, count=len(multis))
    sg = int(singles)
    cache = [None] * len(ops)
    for pos in range(start, len(idx_reversed)):
        k = idx_reversed[pos]
        ent = cache[k]
        if ent is None:
            kind, bj, bi, bii = ops[k]
            ent = cache[k] = (kind, bj, bi, bii, u64(bj), u64(bi | bii))
        kind, bj, bi, bii, bju, addu = ent
        if kind == 0:
            sg &= ~bj
            if mm.size:
                mm = mm[(mm & bju) == zero]
            if stop_when_empty and not sg and not mm.size:
                break
        elif kind == 1:
            if sg & bi:
                continue
            sel = mm[(mm & bju) != zero] if mm.size else mm
            cands = (sel & ~bju) | addu
            if sg & bj or (cands == addu).any():
                # the candidate collapses to the singleton at i, which
                # dominates every other candidate of this event
                sg |= bi
                mm = mm[(mm & addu) == zero]
            elif cands.size:
                mm = _batch_insert(sg, mm, cands)
        else:
            both = bi | bii
            if sg & both:
                continue
            sel = mm[(mm & bju) != zero] if mm.size else mm
            cands = (sel & ~bju) | addu
            if sg & bj:
                cands = np.concatenate([cands, np.array([addu], dtype=np.uint64)])
            if cands.size:
                mm = _batch_insert(sg, mm, cands)
    return sg, set(int(v) for v in mm)


def fold_dual_kernel(ops, idx_reversed, singles, multis, track_additive=False,
                     stop_when_empty=False):
    """Fold compiled dual ops over a kernel antichain state.

    The state is (bitmask of singleton elements, set of multi-site
    element masks); every multi mask is disjoint from the singleton
    mask and the multis are pairwise incomparable.  With
    ``track_additive`` the return carries a flag telling whether any
    intermediate state left the purely-singleton class; with
    ``stop_when_empty`` the fold returns as soon as the state hits the
    absorbing empty antichain.
    """
    additive = not multis
    vec_ok = None
    pos = 0
    n_events = len(idx_reversed)
    while pos < n_events:
        if len(multis) > _VEC_MIN:
            if vec_ok is None:
                vec_ok = all(
                    kind != 3 and (bj | bi | bii) < (1 << 64)
                    for kind, bj, bi, bii in ops
                ) and all(mm < (1 << 64) for mm in multis) and singles < (1 << 64)
            if vec_ok:
                singles, multis = _fold_vec(
                    ops, idx_reversed, pos, singles, multis, stop_when_empty
                )
                break
        k = idx_reversed[pos]
        pos += 1
        kind, bj, bi, bii = ops[k]
        if kind == 0:
            if singles & bj:
                singles &= ~bj
            if multis:
                multis = {mm for mm in multis if not mm & bj}
        elif kind == 1:
            cands = []
            if singles & bj:
                cands.append(bi)
            if multis:
                cands.extend((mm & ~bj) | bi for mm in multis if mm & bj)
            for cand in cands:
                if cand & (cand - 1):
                    multis = _insert_multi(singles, multis, cand)
                elif not singles & cand:
                    singles |= cand
                    if multis:
                        multis = {mm for mm in multis if not mm & cand}
        elif kind == 2:
            both = bi | bii
            cands = []
            if singles & bj:
                cands.append(both)
            if multis:
                cands.extend((mm & ~bj) | both for mm in multis if mm & bj)
            for cand in cands:
                if cand & (cand - 1):
                    multis = _insert_multi(singles, multis, cand)
                elif not singles & cand:
                    singles |= cand
                    if multis:
                        multis = {mm for mm in multis if not mm & cand}
        else:
            raise ValueError("custom maps have no kernel dual op")
        if track_additive and multis:
            additive = False
        if stop_when_empty and not singles and not multis:
            break
    if track_additive:
        return singles, multis, additive
    return singles, multis


def backward_flow(log, Y, u=None, s=None):
    """Dual state at time s of the dual flow started from Y at time u >= s.

    Folds the dual maps of exactly the events in (s, u], newest first,
    against the same materialized log the forward flow reads.
    """
    u = log.u if u is None else u
    s = log.s if s is None else s
    lo, hi = log.slice_indices(s, u)
    family = log.family
    if Y.grid != family.grid:
        raise ValueError("antichain lives on a different grid")
    if Y.n == family.n == 1 and not family.has_custom:
        singles, multis = antichain_to_kernel(Y)
        idx = log.map_idx[lo:hi].tolist()
        idx.reverse()
        singles, multis = fold_dual_kernel(family.dual_ops, idx, singles, multis)
        return kernel_to_antichain(family.grid, singles, multis)
    maps = family.maps
    cur = Y
    for k in reversed(log.map_idx[lo:hi]):
        cur = dual_apply(maps[k], cur)
    return cur


def check_pathwise_duality(log, x, Y, s=None, t=None):
    """Exact event-level duality on a shared log.

    Returns True when the hitting indicator of the forward state
    against Y equals the indicator of x against the backward state.
    """
    s = log.s if s is None else s
    t = log.u if t is None else t
    from .graphical import forward_flow

    fwd = forward_flow(log, x, s, t)
    bwd = backward_flow(log, Y, t, s)
    return psi_mon(fwd, Y) == psi_mon(x, bwd)


def additive_closure_check(log, Y, u=None, s=None):
    """True when the whole backward trajectory stays purely single-site.

    Meaningful for families without cooperative maps, whose duals
    preserve the singleton class; any excursion outside it is reported
    as False.
    """
    u = log.u if u is None else u
    s = log.s if s is None else s
    lo, hi = log.slice_indices(s, u)
    family = log.family
    if Y.n == family.n == 1 and not family.has_custom:
        singles, multis = antichain_to_kernel(Y)
        if multis:
            return False
        idx = log.map_idx[lo:hi].tolist()
        idx.reverse()
        _, _, additive = fold_dual_kernel(
            family.dual_ops, idx, singles, multis, track_additive=True
        )
        return additive
    cur = Y
    if not all(y.support_size() == 1 for y in cur.elements):
        return False
    for k in reversed(log.map_idx[lo:hi]):
        cur = dual_apply(family.maps[k], cur)
        if not all(y.support_size() == 1 for y in cur.elements):
            return False
    return True
