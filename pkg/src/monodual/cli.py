"""Command line interface.

Subcommands: simulate (forward trajectory), dual (backward antichain
trajectory), verify (the invariant battery), sweep (phase-diagram
estimates as CSV), exact (small-system oracle).  A JSON config file
can supply any long flag; explicit flags win.  Exit codes: 0 success,
1 verification failure, 2 usage or config error, 3 event budget
exceeded.

Outputs are deterministic byte-for-byte for a fixed seed and
parameter set (no timestamps, thread-count independent), so reruns
can be diffed.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys

from . import __version__
from . import dual as dual_mod
from .antichain import antichain_from_json, antichain_to_json, make_y_top, psi_mon
from .configuration import Configuration, config_from_json, config_to_json, top
from .dual import backward_flow
from .estimators import monotone_coupling_audit, sweep, write_results_csv
from .exact import (
    build_dual_generator,
    build_forward_generator,
    enumerate_antichains,
    export_matrix_market,
    semigroup_duality_check,
)
from .graphical import (
    BudgetError,
    cooperative_family,
    derive_rng,
    forward_flow,
    sample_event_log,
)
from .lattice import make_small_grid, make_torus
from .localmap import Branch, Coop, Death

__all__ = ["main", "entrypoint", "run_verify_battery"]


# -- flag tables --------------------------------------------------------------

_COMMON = {
    "alpha": (float, 0.5),
    "delta": (float, 0.3),
    "dim": (int, 2),
    "size": (int, 6),
    "horizon": (float, 5.0),
    "reps": (int, 1000),
    "seed": (int, 0),
    "threads": (int, 1),
    "out": (str, None),
}

_PER_COMMAND = {
    "simulate": {"snapshots": (int, 10), "start": (str, "single")},
    "dual": {"snapshots": (int, 10), "start": (str, "top")},
    "verify": {"triples": (int, 2000), "exact_only": (bool, False)},
    "sweep": {
        "alphas": (str, "0,0.2,0.4,0.6,0.8,1.0"),
        "deltas": (str, "0.05,0.15,0.25,0.35,0.45,0.55,0.65,0.75"),
        "estimators": (str, "theta,rho"),
        "threshold": (float, 0.01),
    },
    "exact": {"sites": (int, 2), "t": (float, 1.0), "mm_out": (str, None)},
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="monodual",
        description="Monotone particle systems, antichain duals, and their verification.",
    )
    parser.add_argument("--version", action="version", version=f"monodual {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _PER_COMMAND:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON file of flag values")
        table = dict(_COMMON)
        table.update(_PER_COMMAND[name])
        for flag, (typ, _default) in table.items():
            arg = "--" + flag.replace("_", "-")
            if typ is bool:
                p.add_argument(arg, action="store_const", const=True, default=None)
            else:
                p.add_argument(arg, type=typ, default=None)
    return parser


def _resolve(args):
    """Merge builtin defaults, config file values, and explicit flags."""
    table = dict(_COMMON)
    table.update(_PER_COMMAND[args.command])
    fromfile = {}
    if args.config is not None:
        with open(args.config) as fh:
            fromfile = json.load(fh)
        unknown = set(fromfile) - set(table)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = {}
    for flag, (typ, default) in table.items():
        cli_value = getattr(args, flag)
        if cli_value is not None:
            cfg[flag] = cli_value
        elif flag in fromfile:
            raw = fromfile[flag]
            cfg[flag] = bool(raw) if typ is bool else (None if raw is None else typ(raw))
        else:
            cfg[flag] = default
    cfg["command"] = args.command
    return cfg


def _header_lines(cfg):
    # thread count and output path steer execution, not the experiment,
    # so they stay out of the reproducibility header
    shown = {k: v for k, v in sorted(cfg.items()) if k not in ("out", "threads")}
    return [
        f"monodual {__version__}",
        f"config: {json.dumps(shown, sort_keys=True)}",
    ]


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        return False


def _grid_for(cfg):
    return make_torus(cfg["dim"], cfg["size"])


# -- simulate ------------------------------------------------------------------


def _start_config(grid, start_text):
    if start_text == "single":
        return Configuration(grid, {0: 1})
    if start_text == "full":
        return top(grid)
    return config_from_json(grid, start_text)


def cmd_simulate(cfg):
    grid = _grid_for(cfg)
    family = cooperative_family(grid, cfg["alpha"], cfg["delta"])
    rng = derive_rng(cfg["seed"], "simulate")
    log = sample_event_log(family, 0.0, cfg["horizon"], rng)
    x = _start_config(grid, cfg["start"])
    n_snap = max(1, cfg["snapshots"])
    times = [cfg["horizon"] * k / n_snap for k in range(n_snap + 1)]
    with _Output(cfg["out"]) as fh:
        for line in _header_lines(cfg):
            fh.write(f"# {line}\n")
        fh.write(f"# events: {len(log)}\n")
        prev = 0.0
        for t in times:
            x = forward_flow(log, x, prev, t)
            prev = t
            fh.write(json.dumps({"t": t, "config": json.loads(config_to_json(x))}) + "\n")
    return 0


def cmd_dual(cfg):
    grid = _grid_for(cfg)
    family = cooperative_family(grid, cfg["alpha"], cfg["delta"])
    rng = derive_rng(cfg["seed"], "dual")
    log = sample_event_log(family, 0.0, cfg["horizon"], rng)
    if cfg["start"] == "top":
        Y = make_y_top(grid)
    else:
        Y = antichain_from_json(grid, cfg["start"])
    n_snap = max(1, cfg["snapshots"])
    times = [cfg["horizon"] * k / n_snap for k in range(n_snap, -1, -1)]
    with _Output(cfg["out"]) as fh:
        for line in _header_lines(cfg):
            fh.write(f"# {line}\n")
        fh.write(f"# events: {len(log)}\n")
        prev = cfg["horizon"]
        for t in times:
            Y = backward_flow(log, Y, prev, t)
            prev = t
            fh.write(json.dumps({"t": t, "antichain": json.loads(antichain_to_json(Y))}) + "\n")
    return 0


# -- sweep ----------------------------------------------------------------------


def _parse_list(text, typ):
    return tuple(typ(tok) for tok in str(text).split(",") if tok != "")


def cmd_sweep(cfg):
    grid = _grid_for(cfg)
    alphas = _parse_list(cfg["alphas"], float)
    deltas = _parse_list(cfg["deltas"], float)
    estimators = _parse_list(cfg["estimators"], str)
    result = sweep(
        alphas,
        deltas,
        grid,
        cfg["horizon"],
        cfg["reps"],
        cfg["seed"],
        estimators=estimators,
        threshold=cfg["threshold"],
        threads=cfg["threads"],
    )
    with _Output(cfg["out"]) as fh:
        write_results_csv(fh, result.rows, header_comments=_header_lines(cfg))
        for est in estimators:
            for b in result.boundary_for(est):
                fh.write(
                    f"# boundary,{est},{b.alpha!r},{b.delta_c!r},{b.stderr!r},{b.censored}\n"
                )
    return 0


# -- exact ----------------------------------------------------------------------


def _tiny_grid(sites):
    if sites in (1, 2):
        return make_small_grid(sites)
    if sites == 3:
        return make_torus(1, 3)
    raise ValueError("exact oracle supports 1, 2 or 3 sites")


def cmd_exact(cfg):
    grid = _tiny_grid(cfg["sites"])
    family = cooperative_family(grid, cfg["alpha"], cfg["delta"])
    forward = build_forward_generator(family)
    dualgen = build_dual_generator(family)
    t = cfg["t"]
    worst = 0.0
    with _Output(cfg["out"]) as fh:
        for line in _header_lines(cfg):
            fh.write(f"# {line}\n")
        fh.write(f"# forward states: {len(forward.states)}, dual states: {len(dualgen.states)}\n")
        for x in forward.states:
            for Y in dualgen.states:
                gap = semigroup_duality_check(family, x, Y, t, forward=forward, dual=dualgen)
                worst = max(worst, gap)
                fh.write(
                    json.dumps(
                        {
                            "x": json.loads(config_to_json(x)),
                            "Y": json.loads(antichain_to_json(Y)),
                            "gap": gap,
                        }
                    )
                    + "\n"
                )
        fh.write(f"# max gap: {worst!r}\n")
    if cfg["mm_out"]:
        export_matrix_market(forward, cfg["mm_out"] + ".forward.mtx")
        export_matrix_market(dualgen, cfg["mm_out"] + ".dual.mtx")
    return 0


# -- verify ----------------------------------------------------------------------


def _random_mask(rng, size, density):
    bits = rng.random(size) < density
    return int(sum(1 << k for k in range(size) if bits[k]))


def _random_antichain(rng, grid):
    """Small random antichain: up to three elements of support <= 3."""
    from .antichain import minimalize

    k = int(rng.integers(1, 4))
    elems = set()
    for _ in range(k):
        support = rng.choice(grid.size, size=int(rng.integers(1, 4)), replace=False)
        elems.add(Configuration(grid, {int(s): 1 for s in support}))
    return minimalize(grid, elems)


def _check_pathwise(cfg, report):
    grid = _grid_for(cfg)
    combos = [(a, d) for a in (0.0, 0.5, 1.0) for d in (0.0, 0.3, 1.0)]
    total = max(1, cfg["triples"])
    per_combo = max(1, total // len(combos))
    xs_per_log = 3
    ys_per_log = 2
    per_log = xs_per_log * ys_per_log
    logs_per_combo = max(1, (per_combo + per_log - 1) // per_log)
    checked = 0
    for c_idx, (alpha, delta) in enumerate(combos):
        family = cooperative_family(grid, alpha, delta)
        for rep in range(logs_per_combo):
            rng = derive_rng(cfg["seed"], "verify-pathwise", c_idx, rep)
            log = sample_event_log(family, 0.0, cfg["horizon"], rng)
            ys = [_random_antichain(rng, grid) for _ in range(ys_per_log)]
            xs = [
                Configuration.from_mask(grid, _random_mask(rng, grid.size, dens))
                for dens in (0.1, 0.5, 0.8)
            ]
            # one forward fold per x and one backward fold per Y cover
            # every (x, Y) pair on this shared log
            fwds = [forward_flow(log, x) for x in xs]
            for Y in ys:
                bwd = backward_flow(log, Y)
                for x, fwd in zip(xs, fwds):
                    checked += 1
                    if psi_mon(fwd, Y) != psi_mon(x, bwd):
                        report.fail(
                            "pathwise-duality",
                            {
                                "seed": cfg["seed"],
                                "combo": [alpha, delta],
                                "log_replica": rep,
                                "x": json.loads(config_to_json(x)),
                                "Y": json.loads(antichain_to_json(Y)),
                                "horizon": cfg["horizon"],
                            },
                        )
                        return
    report.ok("pathwise-duality", f"{checked} shared-log triples, zero discrepancies")


def _all_placements(grid):
    sites = list(grid.sites())
    maps = [Death(j) for j in sites]
    maps += [Branch(i, j) for i in sites for j in sites if i != j]
    maps += [
        Coop(i, i2, j)
        for i, i2, j in itertools.permutations(sites, 3)
    ]
    return maps


def _check_dual_routes(report):
    for length in (3, 4):
        grid = make_torus(1, length)
        antichains = enumerate_antichains(grid)
        for m in _all_placements(grid):
            for Y in antichains:
                if isinstance(m, Death):
                    explicit = dual_mod.dual_apply_death(m.j, Y)
                elif isinstance(m, Branch):
                    explicit = dual_mod.dual_apply_branch(m.i, m.j, Y)
                else:
                    explicit = dual_mod.dual_apply_coop(m.i, m.i2, m.j, Y)
                generic = dual_mod.dual_apply_generic(m, Y)
                if explicit != generic:
                    report.fail(
                        "dual-routes",
                        {
                            "sites": length,
                            "map": f"{m!r}",
                            "Y": json.loads(antichain_to_json(Y)),
                            "explicit": json.loads(antichain_to_json(explicit)),
                            "generic": json.loads(antichain_to_json(generic)),
                        },
                    )
                    return
    report.ok("dual-routes", "explicit and generic duals agree on all 3- and 4-site placements")


def _check_exact(report):
    worst = 0.0
    for sites in (2, 3):
        grid = _tiny_grid(sites)
        for alpha in (0.0, 0.5, 1.0):
            for delta in (0.1, 0.5, 1.0):
                family = cooperative_family(grid, alpha, delta)
                forward = build_forward_generator(family)
                dualgen = build_dual_generator(family)
                for t in (0.25, 1.0):
                    for x in forward.states:
                        for Y in dualgen.states:
                            gap = semigroup_duality_check(
                                family, x, Y, t, forward=forward, dual=dualgen
                            )
                            worst = max(worst, gap)
                            if gap >= 1e-8:
                                report.fail(
                                    "exact-semigroup",
                                    {
                                        "sites": sites,
                                        "alpha": alpha,
                                        "delta": delta,
                                        "t": t,
                                        "x": json.loads(config_to_json(x)),
                                        "Y": json.loads(antichain_to_json(Y)),
                                        "gap": gap,
                                    },
                                )
                                return
    report.ok("exact-semigroup", f"max transient duality gap {worst:.3e}")


def _check_coupling(cfg, report):
    grid = _grid_for(cfg)
    pairs = (
        ((0.2, 0.1), (0.2, 0.5)),
        ((0.3, 0.2), (0.8, 0.2)),
        ((0.1, 0.1), (0.9, 0.6)),
    )
    reps = max(1, min(cfg["reps"], 500))
    audit = monotone_coupling_audit(
        grid, pairs, cfg["horizon"], reps, cfg["seed"], check_dual_order=True
    )
    if not audit.clean:
        report.fail(
            "coupling-dominance",
            {
                "pairs": pairs,
                "violations": audit.violations,
                "dual_order_violations": audit.dual_order_violations,
                "seed": cfg["seed"],
            },
        )
        return
    report.ok(
        "coupling-dominance",
        f"{reps} coupled replicas per pair, dominance exact in every replica",
    )


class _BatteryReport:
    def __init__(self, stream):
        self.stream = stream
        self.failures = []

    def ok(self, name, detail):
        self.stream.write(f"[verify] {name}: ok ({detail})\n")

    def fail(self, name, reproducer):
        self.failures.append(name)
        self.stream.write(f"[verify] {name}: FAIL\n")
        self.stream.write(f"[verify] reproducer: {json.dumps(reproducer, sort_keys=True)}\n")


def run_verify_battery(cfg, stream=None):
    report = _BatteryReport(stream or sys.stdout)
    _check_exact(report)
    if not cfg["exact_only"]:
        _check_dual_routes(report)
        _check_pathwise(cfg, report)
        _check_coupling(cfg, report)
    return report


def cmd_verify(cfg):
    with _Output(cfg["out"]) as fh:
        for line in _header_lines(cfg):
            fh.write(f"# {line}\n")
        report = run_verify_battery(cfg, stream=fh)
        verdict = "FAIL" if report.failures else "PASS"
        fh.write(f"[verify] overall: {verdict}\n")
    return 1 if report.failures else 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "dual": cmd_dual,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "exact": cmd_exact,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors, 0 for --help/--version
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
        return _COMMANDS[args.command](cfg)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    raise SystemExit(main(sys.argv[1:]))


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
