"""Event logs: sampling, folding, coupling, diagnostics, serialization."""

import math

import numpy as np
import pytest
from scipy import stats

import monodual.graphical as graphical
from monodual.configuration import Configuration, top, zero
from monodual.graphical import (
    BudgetError,
    CoupledSampler,
    EventLog,
    RatedFamily,
    check_translation_invariance,
    cooperative_family,
    derive_rng,
    evolving_set,
    fold_mask,
    forward_flow,
    log_from_jsonl,
    log_to_jsonl,
    sample_coupled_logs,
    sample_event_log,
    summability_bounds,
)
from monodual.lattice import make_torus
from monodual.localmap import Branch, Coop, Custom, Death, apply_map

GRID = make_torus(1, 6)


def family(alpha=0.5, delta=0.3, grid=GRID):
    return cooperative_family(grid, alpha, delta)


# -- rng derivation -----------------------------------------------------------


def test_derive_rng_deterministic_and_tag_sensitive():
    a = derive_rng(7, "x", 3).random(4)
    b = derive_rng(7, "x", 3).random(4)
    c = derive_rng(7, "x", 4).random(4)
    d = derive_rng(7, "y", 3).random(4)
    e = derive_rng(8, "x", 3).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert not np.array_equal(a, e)


# -- family construction --------------------------------------------------------


def test_cooperative_family_per_site_masses():
    fam = family(0.4, 0.25)
    per_site_branch = np.zeros(GRID.size)
    per_site_coop = np.zeros(GRID.size)
    per_site_death = np.zeros(GRID.size)
    for m, r in zip(fam.maps, fam.rates):
        if isinstance(m, Branch):
            per_site_branch[m.j] += r
        elif isinstance(m, Coop):
            per_site_coop[m.j] += r
        else:
            per_site_death[m.j] += r
    assert np.allclose(per_site_branch, 0.6)
    assert np.allclose(per_site_coop, 0.4)
    assert np.allclose(per_site_death, 0.25)
    assert math.isclose(fam.total_rate, GRID.size * (1.0 + 0.25))


def test_cooperative_family_drops_zero_classes():
    assert all(not isinstance(m, Coop) for m in family(0.0, 0.1).maps)
    assert all(not isinstance(m, Branch) for m in family(1.0, 0.1).maps)
    assert all(not isinstance(m, Death) for m in family(0.5, 0.0).maps)


def test_cooperative_family_validates_parameters():
    with pytest.raises(ValueError):
        family(-0.1, 0.1)
    with pytest.raises(ValueError):
        family(1.1, 0.1)
    with pytest.raises(ValueError):
        family(0.5, -1.0)


def test_rated_family_rejects_bad_maps():
    flip = Custom((0,), {(0,): (1,), (1,): (0,)})
    with pytest.raises(ValueError):
        RatedFamily(GRID, [(flip, 1.0)])
    with pytest.raises(ValueError):
        RatedFamily(GRID, [(Death(0), -2.0)])
    with pytest.raises(ValueError):
        RatedFamily(GRID, [(Death(GRID.size), 1.0)])


def test_translation_invariance_check():
    assert check_translation_invariance(family(0.3, 0.2))
    lopsided = RatedFamily(GRID, [(Death(0), 1.0), (Death(1), 2.0)])
    assert not check_translation_invariance(lopsided)


def test_summability_bounds_torus():
    # degree 2 ring: per target site the touching mass is 1 + delta;
    # branch contributes one off-target pair, coop two
    b = summability_bounds(family(0.4, 0.25))
    assert math.isclose(b.max_rate_touching_site, 1.25)
    assert math.isclose(b.max_incoming_weight, 0.6 + 2 * 0.4)
    # each site feeds two branch targets and the coop pairs of two targets
    assert b.max_outgoing_weight > 0


# -- sampling --------------------------------------------------------------------


def test_sample_event_log_window_and_order():
    fam = family()
    log = sample_event_log(fam, 1.0, 3.0, derive_rng(0, "w"))
    assert log.s == 1.0 and log.u == 3.0
    if len(log):
        assert log.times[0] > 1.0 and log.times[-1] <= 3.0
        assert np.all(np.diff(log.times) > 0)


def test_sample_event_count_matches_poisson_mean():
    fam = family(0.5, 0.5)
    lam = fam.total_rate * 10.0
    n = len(sample_event_log(fam, 0.0, 10.0, derive_rng(3, "count")))
    assert abs(n - lam) < 4.0 * math.sqrt(lam)


def test_sampled_map_frequencies_match_rates():
    fam = family(0.5, 0.5)
    log = sample_event_log(fam, 0.0, 60.0, derive_rng(5, "freq"))
    counts = np.bincount(log.map_idx, minlength=len(fam.maps))
    expected = fam.probs * len(log)
    # merge into 3 kinds to keep expected counts comfortably large
    kind_of = np.array([{"dth": 0, "bra": 1, "coop": 2}[m.kind] for m in fam.maps])
    got = np.bincount(kind_of, weights=counts, minlength=3)
    want = np.bincount(kind_of, weights=expected, minlength=3)
    _, p = stats.chisquare(got, want)
    assert p > 1e-4


def test_zero_rate_family_gives_empty_log():
    fam = RatedFamily(GRID, [(Death(0), 0.0)])
    log = sample_event_log(fam, 0.0, 5.0, derive_rng(0, "empty"))
    assert len(log) == 0
    assert forward_flow(log, top(GRID)) == top(GRID)


def test_empty_window_gives_empty_log():
    log = sample_event_log(family(), 2.0, 2.0, derive_rng(0, "pt"))
    assert len(log) == 0


def test_budget_error(monkeypatch):
    monkeypatch.setattr(graphical, "EVENT_BUDGET", 100)
    with pytest.raises(BudgetError):
        sample_event_log(family(), 0.0, 50.0, derive_rng(0, "budget"))


def test_event_log_validation():
    fam = family()
    with pytest.raises(ValueError):
        EventLog(fam, 0.0, 1.0, [0.5, 0.5], [0, 1])  # not strictly increasing
    with pytest.raises(ValueError):
        EventLog(fam, 0.0, 1.0, [1.5], [0])  # outside window
    with pytest.raises(ValueError):
        EventLog(fam, 1.0, 0.0, [], [])


def test_sampling_deterministic_for_fixed_seed():
    fam = family()
    a = sample_event_log(fam, 0.0, 4.0, derive_rng(11, "det"))
    b = sample_event_log(fam, 0.0, 4.0, derive_rng(11, "det"))
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.map_idx, b.map_idx)


# -- folding and flows -----------------------------------------------------------


def test_forward_flow_matches_slow_application():
    fam = family(0.6, 0.4)
    log = sample_event_log(fam, 0.0, 3.0, derive_rng(2, "slowfast"))
    for mask in (0b1, 0b10110, 0b111111):
        x = Configuration.from_mask(GRID, mask)
        slow = x
        for _, m in log.events():
            slow = apply_map(m, slow)
        assert forward_flow(log, x) == slow


def test_flow_composition_exact():
    fam = family(0.5, 0.2)
    log = sample_event_log(fam, 0.0, 4.0, derive_rng(9, "comp"))
    x = Configuration.from_mask(GRID, 0b10101)
    for tmid in (0.0, 1.3, 2.0, 4.0):
        one = forward_flow(log, x, 0.0, 4.0)
        two = forward_flow(log, forward_flow(log, x, 0.0, tmid), tmid, 4.0)
        assert one == two


def test_forward_flow_slow_path_with_custom_map():
    copy10 = Custom((0, 1), {(a, b): (a, a) for a in (0, 1) for b in (0, 1)})
    fam = RatedFamily(GRID, [(copy10, 1.0), (Death(0), 0.5)])
    log = sample_event_log(fam, 0.0, 3.0, derive_rng(4, "custom"))
    x = Configuration.from_mask(GRID, 0b1)
    slow = x
    for _, m in log.events():
        slow = apply_map(m, slow)
    assert forward_flow(log, x) == slow


def test_fold_mask_stops_at_zero():
    fam = cooperative_family(GRID, 0.0, 1.0)
    deaths = [fam.index_of(Death(j)) for j in GRID.sites()]
    # killing every site then branching changes nothing
    idx = deaths + [fam.index_of(Branch(0, 1))]
    assert fold_mask(fam.fwd_ops, idx, fam.full_mask) == 0


def test_forward_flow_respects_window_slicing():
    fam = family()
    log = sample_event_log(fam, 0.0, 4.0, derive_rng(14, "slice"))
    x = top(GRID)
    # folding over (t, t] is the identity
    assert forward_flow(log, x, 2.0, 2.0) == x
    with pytest.raises(ValueError):
        forward_flow(log, x, 3.0, 5.0)


# -- evolving set / perturbation ---------------------------------------------------


def test_evolving_set_bounds_perturbation():
    fam = family(0.5, 0.3)
    for rep in range(8):
        log = sample_event_log(fam, 0.0, 2.5, derive_rng(21, "perturb", rep))
        rng = derive_rng(22, "perturb-x", rep)
        base = int(rng.integers(0, 2**GRID.size))
        seed = {int(rng.integers(0, GRID.size))}
        x1 = Configuration.from_mask(GRID, base & ~(1 << tuple(seed)[0]))
        x2 = Configuration.from_mask(GRID, base | (1 << tuple(seed)[0]))
        xi = evolving_set(log, seed)
        out1 = forward_flow(log, x1).mask
        out2 = forward_flow(log, x2).mask
        diff = out1 ^ out2
        for site in GRID.sites():
            if diff >> site & 1:
                assert site in xi


def test_evolving_set_grows_from_seed():
    fam = family(0.5, 0.0)
    log = sample_event_log(fam, 0.0, 1.0, derive_rng(23, "seed"))
    xi = evolving_set(log, {2})
    assert isinstance(xi, frozenset)


# -- restriction -------------------------------------------------------------------


def test_restrict_keeps_matching_events():
    fam = family(0.5, 0.4)
    log = sample_event_log(fam, 0.0, 3.0, derive_rng(31, "restrict"))
    sub = log.restrict(lambda m: isinstance(m, Death))
    assert all(isinstance(m, Death) for _, m in sub.events())
    assert len(sub) <= len(log)
    # restriction to everything is the identity on events
    same = log.restrict(lambda m: True)
    assert np.array_equal(same.times, log.times)
    assert np.array_equal(same.map_idx, log.map_idx)


def test_restrict_to_deaths_only_kills_monotonically():
    fam = family(0.5, 0.8)
    log = sample_event_log(fam, 0.0, 2.0, derive_rng(32, "kills"))
    sub = log.restrict(lambda m: isinstance(m, Death))
    out = forward_flow(sub, top(GRID))
    assert bin(out.mask).count("1") <= GRID.size


# -- coupled sampling ---------------------------------------------------------------


def test_coupled_sampler_validates_order():
    with pytest.raises(ValueError):
        CoupledSampler(GRID, (0.5, 0.2), (0.4, 0.3))
    with pytest.raises(ValueError):
        CoupledSampler(GRID, (0.2, 0.5), (0.3, 0.4))


def test_coupled_logs_share_common_events():
    low, high = sample_coupled_logs(
        GRID, (0.2, 0.1), (0.6, 0.4), 0.0, 3.0, derive_rng(41, "couple")
    )
    # every low-log event time appears in the high log: the low layers
    # (shared deaths, shared branches, shared+extra coops) all map into
    # the high log as well
    assert set(low.times.tolist()) <= set(high.times.tolist())


def test_coupled_log_marginal_rates():
    rng = derive_rng(42, "marginal")
    low, high = sample_coupled_logs(GRID, (0.3, 0.2), (0.7, 0.9), 0.0, 40.0, rng)
    lam_low = cooperative_family(GRID, 0.3, 0.2).total_rate * 40.0
    lam_high = cooperative_family(GRID, 0.7, 0.9).total_rate * 40.0
    assert abs(len(low) - lam_low) < 4.0 * math.sqrt(lam_low)
    assert abs(len(high) - lam_high) < 4.0 * math.sqrt(lam_high)


def test_coupled_low_leg_kind_frequencies():
    # the substituted branches must restore the full (1 - alpha) mass
    rng = derive_rng(43, "kinds")
    low, _ = sample_coupled_logs(GRID, (0.2, 0.3), (0.9, 0.3), 0.0, 60.0, rng)
    fam = cooperative_family(GRID, 0.2, 0.3)
    counts = np.zeros(3)
    for _, m in low.events():
        counts[{"dth": 0, "bra": 1, "coop": 2}[m.kind]] += 1
    mass = np.array([0.3, 0.8, 0.2]) * GRID.size * 60.0
    _, p = stats.chisquare(counts, mass * counts.sum() / mass.sum())
    assert p > 1e-4


# -- serialization -------------------------------------------------------------------


def test_jsonl_round_trip_bit_exact():
    fam = family(0.5, 0.4)
    log = sample_event_log(fam, 0.0, 2.0, derive_rng(51, "jsonl"))
    text = log_to_jsonl(log)
    back = log_from_jsonl(fam, 0.0, 2.0, text)
    assert np.array_equal(back.times, log.times)
    assert np.array_equal(back.map_idx, log.map_idx)


def test_jsonl_round_trip_custom_map():
    copy10 = Custom((0, 1), {(a, b): (a, a) for a in (0, 1) for b in (0, 1)})
    fam = RatedFamily(GRID, [(copy10, 1.0), (Death(2), 0.5)])
    log = sample_event_log(fam, 0.0, 4.0, derive_rng(52, "jsonl-custom"))
    back = log_from_jsonl(fam, 0.0, 4.0, log_to_jsonl(log))
    assert np.array_equal(back.times, log.times)
    assert [m for _, m in back.events()] == [m for _, m in log.events()]


def test_jsonl_rejects_foreign_maps():
    fam = family(0.5, 0.4)
    log = sample_event_log(fam, 0.0, 2.0, derive_rng(53, "foreign"))
    other = cooperative_family(make_torus(1, 3), 0.5, 0.4)
    with pytest.raises((KeyError, ValueError)):
        log_from_jsonl(other, 0.0, 2.0, log_to_jsonl(log))
