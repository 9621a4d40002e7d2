"""Monte Carlo estimators on top of the event-log kernels.

Every replica derives its own RNG stream from (master seed, purpose
tag, replica index), so estimates are deterministic functions of the
master seed and the parameters, independent of worker count and
replica execution order.  Chunked reductions only ever sum replica
counts, which keeps them associative.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dual import fold_dual_kernel
from .graphical import (
    CoupledSampler,
    cooperative_family,
    derive_rng,
    fold_mask,
    fold_mask_absorbing,
    sample_event_log,
)

__all__ = [
    "EstimateResult",
    "estimate_theta",
    "estimate_rho",
    "estimate_theta_dual",
    "estimate_rho_dual",
    "paired_survival_check",
    "DualCorrelationResult",
    "estimate_dual_correlations",
    "ErgodicityReport",
    "ergodicity_check",
    "BoundaryEstimate",
    "SweepResult",
    "sweep",
    "CouplingAuditReport",
    "monotone_coupling_audit",
    "write_results_csv",
    "CSV_HEADER",
]

CSV_HEADER = "alpha,delta,dim,size,horizon,reps,estimator,estimate,stderr,seed"


@dataclass(frozen=True)
class EstimateResult:
    estimator: str
    estimate: float
    stderr: float
    reps: int
    horizon: float
    alpha: float
    delta: float
    dim: int
    size: int
    grid_label: str
    seed: int

    def csv_row(self):
        return (
            f"{self.alpha!r},{self.delta!r},{self.dim},{self.size},"
            f"{self.horizon!r},{self.reps},{self.estimator},"
            f"{self.estimate!r},{self.stderr!r},{self.seed}"
        )


def _grid_dims(grid):
    sig = grid.signature
    if sig[0] == "torus":
        return sig[1], grid.size
    return 0, grid.size


@lru_cache(maxsize=64)
def _family_cached(grid, alpha, delta):
    return cooperative_family(grid, alpha, delta)


def _point_tag(estimator, grid, alpha, delta, horizon):
    return f"{estimator}|{grid.label}|a={alpha!r}|d={delta!r}|T={horizon!r}"


def _binom_se(p, reps):
    return math.sqrt(p * (1.0 - p) / reps) if reps else float("nan")


# -- per-replica indicator kernels -------------------------------------------


def _survival_chunk(grid, alpha, delta, horizon, seed, estimator, lo, hi):
    family = _family_cached(grid, alpha, delta)
    tag = _point_tag(estimator, grid, alpha, delta, horizon)
    fwd_ops = family.fwd_ops
    dual_ops = family.dual_ops
    full = family.full_mask
    count = 0
    for rep in range(lo, hi):
        rng = derive_rng(seed, tag, rep)
        log = sample_event_log(family, 0.0, horizon, rng)
        idx = log.map_idx.tolist()
        if estimator == "theta":
            x = fold_mask_absorbing(fwd_ops, idx, 1)
            count += x != 0
        elif estimator == "rho":
            x = fold_mask_absorbing(fwd_ops, idx, full)
            count += (x & 1) != 0
        elif estimator == "theta_dual":
            idx.reverse()
            singles, multis = fold_dual_kernel(
                dual_ops, idx, full, set(), stop_when_empty=True
            )
            count += (singles & 1) != 0
        elif estimator == "rho_dual":
            idx.reverse()
            singles, multis = fold_dual_kernel(
                dual_ops, idx, 1, set(), stop_when_empty=True
            )
            count += bool(singles) or bool(multis)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
    return count


def _sum_chunks(worker, args, reps, threads):
    if threads and threads > 1:
        pieces = min(reps, threads * 4)
        bounds = np.linspace(0, reps, pieces + 1).astype(int)
        total = None
        with ProcessPoolExecutor(max_workers=threads) as ex:
            futures = [
                ex.submit(worker, *args, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            for f in futures:
                r = f.result()
                total = r if total is None else total + r
        return total
    return worker(*args, 0, reps)


def _estimate(estimator, alpha, delta, grid, horizon, reps, seed, threads):
    if reps < 1:
        raise ValueError("need at least one replica")
    count = _sum_chunks(
        _survival_chunk, (grid, alpha, delta, horizon, seed, estimator), reps, threads
    )
    p = count / reps
    dim, size = _grid_dims(grid)
    return EstimateResult(
        estimator, p, _binom_se(p, reps), reps, float(horizon),
        float(alpha), float(delta), dim, size, grid.label, seed,
    )


def estimate_theta(alpha, delta, grid, horizon, reps, seed, threads=1):
    """Survival probability to the horizon from a single seed particle."""
    return _estimate("theta", alpha, delta, grid, horizon, reps, seed, threads)


def estimate_rho(alpha, delta, grid, horizon, reps, seed, threads=1):
    """Occupation probability of site 0 at the horizon from the full state."""
    return _estimate("rho", alpha, delta, grid, horizon, reps, seed, threads)


def estimate_theta_dual(alpha, delta, grid, horizon, reps, seed, threads=1):
    """Dual route to theta: membership of the seed singleton in the
    dual state evolved backward from the greatest antichain."""
    return _estimate("theta_dual", alpha, delta, grid, horizon, reps, seed, threads)


def estimate_rho_dual(alpha, delta, grid, horizon, reps, seed, threads=1):
    """Dual route to rho: the dual started from the seed singleton is
    still nonempty after folding the log backward."""
    return _estimate("rho_dual", alpha, delta, grid, horizon, reps, seed, threads)


# -- shared-log identities ----------------------------------------------------


def _paired_chunk(grid, alpha, delta, horizon, seed, lo, hi):
    family = _family_cached(grid, alpha, delta)
    tag = _point_tag("paired", grid, alpha, delta, horizon)
    fwd_ops = family.fwd_ops
    dual_ops = family.dual_ops
    full = family.full_mask
    counts = np.zeros(3, dtype=np.int64)  # theta hits, rho hits, mismatches
    for rep in range(lo, hi):
        rng = derive_rng(seed, tag, rep)
        log = sample_event_log(family, 0.0, horizon, rng)
        idx = log.map_idx.tolist()
        ridx = idx[::-1]
        theta_fwd = fold_mask(fwd_ops, idx, 1) != 0
        singles, multis = fold_dual_kernel(dual_ops, ridx, full, set())
        theta_dual = (singles & 1) != 0
        rho_fwd = (fold_mask(fwd_ops, idx, full) & 1) != 0
        singles2, multis2 = fold_dual_kernel(dual_ops, ridx, 1, set())
        rho_dual = bool(singles2) or bool(multis2)
        counts[0] += theta_fwd
        counts[1] += rho_fwd
        counts[2] += (theta_fwd != theta_dual) + (rho_fwd != rho_dual)
    return counts


@dataclass(frozen=True)
class PairedCheckResult:
    theta_hits: int
    rho_hits: int
    mismatches: int
    reps: int


def paired_survival_check(alpha, delta, grid, horizon, reps, seed, threads=1):
    """Per-replica identity of the forward and dual survival indicators.

    Both indicators are computed from one shared log per replica; they
    must agree replica by replica, so any positive mismatch count is a
    bug, not noise.
    """
    counts = _sum_chunks(
        _paired_chunk, (grid, alpha, delta, horizon, seed), reps, threads
    )
    return PairedCheckResult(int(counts[0]), int(counts[1]), int(counts[2]), reps)


def _kernel_psi(x_mask, singles, multis):
    if singles & x_mask:
        return True
    for mm in multis:
        if not mm & ~x_mask:
            return True
    return False


def _dualcorr_chunk(grid, alpha, delta, horizon, seed, x_masks, lo, hi):
    family = _family_cached(grid, alpha, delta)
    tag = _point_tag("dualcorr", grid, alpha, delta, horizon)
    fwd_ops = family.fwd_ops
    dual_ops = family.dual_ops
    full = family.full_mask
    counts = np.zeros(2, dtype=np.int64)  # product hits, mismatches
    for rep in range(lo, hi):
        rng = derive_rng(seed, tag, rep)
        log = sample_event_log(family, 0.0, horizon, rng)
        idx = log.map_idx.tolist()
        fwd_product = True
        for xm in x_masks:
            if fold_mask_absorbing(fwd_ops, idx, xm) == 0:
                fwd_product = False
                break
        singles, multis = fold_dual_kernel(dual_ops, idx[::-1], full, set())
        dual_product = all(_kernel_psi(xm, singles, multis) for xm in x_masks)
        counts[0] += dual_product
        counts[1] += fwd_product != dual_product
    return counts


@dataclass(frozen=True)
class DualCorrelationResult:
    estimate: float
    stderr: float
    mismatches: int
    reps: int


def estimate_dual_correlations(alpha, delta, grid, horizon, reps, seed, xs, threads=1):
    """Joint survival of several starts, estimated through the dual.

    Each replica shares one log between the dual product (hitting
    indicators against the backward state from the greatest antichain)
    and the forward product of survival indicators; the two agree
    exactly per replica.
    """
    masks = tuple(x.mask for x in xs)
    counts = _sum_chunks(
        _dualcorr_chunk, (grid, alpha, delta, horizon, seed, masks), reps, threads
    )
    p = counts[0] / reps
    return DualCorrelationResult(p, _binom_se(p, reps), int(counts[1]), reps)


# -- ergodicity panel ----------------------------------------------------------


def default_panel(grid):
    """Ten small probe configurations spread over the grid."""
    size = grid.size
    masks = []
    for k in range(6):
        masks.append(1 << (k * size // 6 % size))
    for base in (0, size // 3, 2 * size // 3):
        masks.append(1 << (base % size) | 1 << ((base + 1) % size))
    mid = size // 2
    masks.append(1 << (mid % size) | 1 << ((mid + 1) % size) | 1 << ((mid + 2) % size))
    return tuple(dict.fromkeys(masks))


def _ergodicity_chunk(grid, alpha, delta, horizon, seed, panel, start, p_occ, lo, hi):
    family = _family_cached(grid, alpha, delta)
    tag = _point_tag(f"ergo-{start}", grid, alpha, delta, horizon)
    dual_ops = family.dual_ops
    full = family.full_mask
    size = grid.size
    hits = np.zeros(len(panel), dtype=np.int64)
    for rep in range(lo, hi):
        rng = derive_rng(seed, tag, rep)
        if start == "top":
            singles = full
        else:
            # product-law singletons conditioned on being nonempty
            singles = 0
            while singles == 0:
                bits = rng.random(size) < p_occ
                singles = int(sum(1 << k for k in range(size) if bits[k]))
        log = sample_event_log(family, 0.0, horizon, rng)
        idx = log.map_idx.tolist()
        idx.reverse()
        singles, multis = fold_dual_kernel(
            dual_ops, idx, singles, set(), stop_when_empty=True
        )
        for q, xm in enumerate(panel):
            if _kernel_psi(xm, singles, multis):
                hits[q] += 1
    return hits


@dataclass(frozen=True)
class ErgodicityReport:
    passed: bool
    max_sigma: float
    panel: tuple
    freq_top: tuple
    freq_product: tuple
    joint_se: tuple
    reps: int

    def worst_row(self):
        k = int(np.argmax(np.abs(np.array(self.freq_top) - np.array(self.freq_product))
                          / np.maximum(np.array(self.joint_se), 1e-300)))
        return self.panel[k], self.freq_top[k], self.freq_product[k], self.joint_se[k]


def ergodicity_check(alpha, delta, grid, horizon, reps, seed, p_occ=0.1,
                     panel=None, sigmas=4.0, threads=1):
    """Compare dual hitting frequencies from two initial laws.

    One arm starts the dual from the greatest antichain, the other from
    a product law over singletons conditioned on being nonempty.  For
    each probe configuration the two hitting frequencies must agree
    within ``sigmas`` joint standard errors.
    """
    panel = tuple(panel) if panel is not None else default_panel(grid)
    hits_top = _sum_chunks(
        _ergodicity_chunk,
        (grid, alpha, delta, horizon, seed, panel, "top", p_occ),
        reps,
        threads,
    )
    hits_prod = _sum_chunks(
        _ergodicity_chunk,
        (grid, alpha, delta, horizon, seed, panel, "product", p_occ),
        reps,
        threads,
    )
    f_top = hits_top / reps
    f_prod = hits_prod / reps
    joint = np.sqrt(
        np.array([_binom_se(p, reps) ** 2 for p in f_top])
        + np.array([_binom_se(p, reps) ** 2 for p in f_prod])
    )
    gaps = np.abs(f_top - f_prod)
    sigma_ratios = gaps / np.maximum(joint, 1e-300)
    passed = bool(np.all(gaps <= sigmas * joint))
    return ErgodicityReport(
        passed,
        float(sigma_ratios.max()),
        panel,
        tuple(float(v) for v in f_top),
        tuple(float(v) for v in f_prod),
        tuple(float(v) for v in joint),
        reps,
    )


# -- parameter sweeps ----------------------------------------------------------


@dataclass(frozen=True)
class BoundaryEstimate:
    alpha: float
    delta_c: float
    stderr: float
    censored: str  # "", "low", or "high"


def _interpolate_boundary(alpha, deltas, ps, ses, threshold):
    above = [k for k, p in enumerate(ps) if p >= threshold]
    if not above:
        return BoundaryEstimate(alpha, deltas[0], ses[0], "low")
    k = max(above)
    if k == len(deltas) - 1:
        return BoundaryEstimate(alpha, deltas[-1], ses[-1], "high")
    p0, p1 = ps[k], ps[k + 1]
    d0, d1 = deltas[k], deltas[k + 1]
    gap = p0 - p1
    frac = (p0 - threshold) / gap
    delta_c = d0 + frac * (d1 - d0)
    # delta-method error through the linear interpolation
    dd = d1 - d0
    g0 = (threshold - p1) / gap**2
    g1 = (p0 - threshold) / gap**2
    se = abs(dd) * math.sqrt((g0 * ses[k]) ** 2 + (g1 * ses[k + 1]) ** 2)
    return BoundaryEstimate(alpha, float(delta_c), float(se), "")


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    boundaries: dict
    alphas: tuple
    deltas: tuple
    threshold: float

    def boundary_for(self, estimator):
        return self.boundaries[estimator]


def sweep(alphas, deltas, grid, horizon, reps, seed, estimators=("theta", "rho"),
          threshold=0.01, threads=1):
    """Estimate each requested quantity over the (alpha, delta) grid and
    extract, per alpha, the interpolated delta where it crosses the
    threshold."""
    alphas = tuple(float(a) for a in alphas)
    deltas = tuple(float(d) for d in deltas)
    rows = []
    boundaries = {}
    jobs = [
        (est, a, d)
        for est in estimators
        for a in alphas
        for d in deltas
    ]
    results = {}
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            futures = {
                ex.submit(_estimate, est, a, d, grid, horizon, reps, seed, 1): (est, a, d)
                for est, a, d in jobs
            }
            for fut, key in futures.items():
                results[key] = fut.result()
    else:
        for est, a, d in jobs:
            results[(est, a, d)] = _estimate(est, a, d, grid, horizon, reps, seed, 1)
    for est in estimators:
        per_alpha = []
        for a in alphas:
            ps = [results[(est, a, d)].estimate for d in deltas]
            ses = [results[(est, a, d)].stderr for d in deltas]
            per_alpha.append(_interpolate_boundary(a, deltas, ps, ses, threshold))
        boundaries[est] = tuple(per_alpha)
    for est, a, d in jobs:
        rows.append(results[(est, a, d)])
    return SweepResult(tuple(rows), boundaries, alphas, deltas, threshold)


# -- coupled-run audit ----------------------------------------------------------


def _coupling_chunk(grid, params, params2, horizon, seed, check_dual, lo, hi):
    sampler = _sampler_cached(grid, params, params2)
    f1, f2 = sampler.family, sampler.family2
    full = f1.full_mask
    tag = f"couple|{grid.label}|{params!r}|{params2!r}|T={horizon!r}"
    # survival hits (low, high), violations, dual-order violations
    counts = np.zeros(4, dtype=np.int64)
    for rep in range(lo, hi):
        rng = derive_rng(seed, tag, rep)
        log1, log2 = sampler.sample(0.0, horizon, rng)
        idx1 = log1.map_idx.tolist()
        idx2 = log2.map_idx.tolist()
        x1 = fold_mask(f1.fwd_ops, idx1, full)
        x2 = fold_mask(f2.fwd_ops, idx2, full)
        if x2 & ~x1:
            counts[2] += 1
        s1 = fold_mask_absorbing(f1.fwd_ops, idx1, 1)
        s2 = fold_mask_absorbing(f2.fwd_ops, idx2, 1)
        counts[0] += s1 != 0
        counts[1] += s2 != 0
        if s2 != 0 and s1 == 0:
            counts[2] += 1
        if check_dual:
            sg1, mu1 = fold_dual_kernel(f1.dual_ops, idx1[::-1], full, set())
            sg2, mu2 = fold_dual_kernel(f2.dual_ops, idx2[::-1], full, set())
            if sg2 & ~sg1 or any(
                not (sg1 & mm) and not any(not (m1 & ~mm) for m1 in mu1)
                for mm in mu2
            ):
                counts[3] += 1
    return counts


@lru_cache(maxsize=32)
def _sampler_cached(grid, params, params2):
    return CoupledSampler(grid, params, params2)


@dataclass(frozen=True)
class CouplingAuditReport:
    pairs: tuple
    survival_low: tuple
    survival_high: tuple
    violations: tuple
    dual_order_violations: tuple
    reps: int

    @property
    def clean(self):
        return all(v == 0 for v in self.violations) and all(
            v == 0 for v in self.dual_order_violations
        )


def monotone_coupling_audit(grid, parameter_pairs, horizon, reps, seed,
                            check_dual_order=False, threads=1):
    """Drive coupled replicas and verify pathwise dominance.

    For each (weak, strong) parameter pair the full-start states must
    dominate pointwise at the horizon and the single-start survival
    indicators must be ordered, in every single replica.  Optionally
    the backward dual states are compared in the dual order as well.
    Any violation is a bug in the coupling, never statistics.
    """
    pairs = tuple((tuple(p), tuple(q)) for p, q in parameter_pairs)
    lows, highs, viols, dviols = [], [], [], []
    for params, params2 in pairs:
        counts = _sum_chunks(
            _coupling_chunk,
            (grid, params, params2, horizon, seed, check_dual_order),
            reps,
            threads,
        )
        lows.append(int(counts[0]))
        highs.append(int(counts[1]))
        viols.append(int(counts[2]))
        dviols.append(int(counts[3]))
    return CouplingAuditReport(
        pairs, tuple(lows), tuple(highs), tuple(viols), tuple(dviols), reps
    )


# -- CSV output -----------------------------------------------------------------


def write_results_csv(fh, rows, header_comments=()):
    """Write estimate rows in the fixed column order, after comment lines."""
    for line in header_comments:
        fh.write(f"# {line}\n")
    fh.write(CSV_HEADER + "\n")
    for row in rows:
        fh.write(row.csv_row() + "\n")
