"""Command-line interface: ``ionring <subcommand> --config FILE --out DIR``.

Subcommands potential-scan, statics, md, budget and sweep run the mode named
in the config file; verify re-checks the config hash of every file in an
output directory. Exit status: 0 ok, 1 error, 2 bad config, 3 budget
threshold exceeded, 4 hash mismatch.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io, md, ring, trap as tm
from .budget import ClockScenario, ScenarioError, assemble_budget
from .config import ConfigError, RunConfig, load_run_config

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_THRESHOLD, EXIT_HASH = 0, 1, 2, 3, 4
EV = 1.602176634e-19


def _nan_on_error(fn, *args):
    try:
        return fn(*args)
    except ValueError:
        return float("nan")


# -- potential scan -----------------------------------------------------------

def potential_scan(cfg: RunConfig):
    trap, sp = cfg.trap(), cfg.species
    r_min = tm.effective_potential_minimum_rmin(trap, sp)
    r_max = cfg.si("scan", "r_max", 2.0 * r_min)
    r = np.linspace(cfg.si("scan", "r_min"), r_max, cfg.get("scan", "points"))
    full = tm.radial_potential(trap, sp, r) / EV
    harm = tm.harmonic_radial_potential(trap, sp, r) / EV
    return r, full, harm


def cmd_potential_scan(cfg: RunConfig, out: str) -> int:
    r, full, harm = potential_scan(cfg)
    io.write_csv(os.path.join(out, "potential_scan.csv"), ["r", "V_effective", "V_harmonic"],
                 ["m", "eV", "eV"], zip(r, full, harm), io.run_metadata(cfg))
    i = int(np.argmin(full))
    print(f"minimum of V_effective at r = {r[i] * 1e6:.3f} um")
    return EXIT_OK


# -- statics ------------------------------------------------------------------

def statics_result(cfg: RunConfig) -> dict:
    trap, sp, n = cfg.trap(), cfg.species, cfg.n_ions
    pos = ring.minimize_energy(trap, sp, n, seed=cfg.seed, perturbation=cfg.si("statics", "perturbation"))
    cls = ring.classify_structure(pos, trap, sp, z_tol=cfg.si("statics", "z_tol"))
    R = cls.mean_radius
    return {
        "positions": pos,
        "structure": cls.tag.value,
        "R": R,
        "separation": cls.plane_separation,
        "axial_spread": cls.axial_spread,
        "energy": ring.total_energy(trap, sp, pos),
        "r_min": tm.effective_potential_minimum_rmin(trap, sp),
        "R_l": _nan_on_error(ring.double_ring_limit_Rl, sp, trap.axial_omega_z, n),
        "epsilon": ring.coulomb_radius_shift_epsilon(trap, sp, n, R=R),
        "eta_R": float(tm.adiabaticity_local(trap, sp, R)),
        "dR_mu": float(tm.micromotion_amplitude(trap, R)),
    }

STATICS_COLUMNS = ("structure", "R", "separation", "axial_spread", "energy", "r_min", "R_l",
                   "epsilon", "eta_R", "dR_mu")
STATICS_UNITS = ("", "m", "m", "m", "J", "m", "m", "m", "1", "m")


def cmd_statics(cfg: RunConfig, out: str) -> int:
    res = statics_result(cfg)
    meta = io.run_metadata(cfg)
    pos = res["positions"]
    io.write_snapshot(os.path.join(out, "statics_snapshot.txt"),
                      io.Snapshot(meta[io.HASH_KEY], 0.0, cfg.species.name, pos, np.zeros_like(pos)))
    io.write_csv(os.path.join(out, "statics_report.csv"), STATICS_COLUMNS, STATICS_UNITS,
                 [[res[c] for c in STATICS_COLUMNS]], meta)
    print(f"{res['structure']}: R = {res['R'] * 1e6:.3f} um, "
          f"separation = {res['separation'] * 1e6:.3f} um, R_l = {res['R_l'] * 1e6:.3f} um")
    return EXIT_OK


# -- md -----------------------------------------------------------------------

def md_setup(cfg: RunConfig):
    trap, sp, n = cfg.trap(), cfg.species, cfg.n_ions
    rng = np.random.default_rng(cfg.seed)
    if n == 1:
        pos = np.array([[tm.effective_potential_minimum_rmin(trap, sp), 0.0, 0.0]])
    else:
        pos = ring.minimize_energy(trap, sp, n, seed=cfg.seed)
    ens = md.thermal_ensemble(pos, sp, cfg.si("schedule", "initial_temperature"), rng)
    ens = md.with_micromotion_phase(ens, trap)
    cooling = md.CoolingConfig(cfg.si("cooling", "detuning"), cfg.si("cooling", "rabi"),
                               md.BEAM_SETS[cfg.get("cooling", "beams")])
    integ = md.IntegratorConfig(cfg.get("integrator", "steps_per_rf_period"), cfg.seed,
                                cfg.get("integrator", "field_mode"), cfg.get("integrator", "static_field"))
    schedule = md.Schedule(cfg.si("schedule", "initial_cooling"), cfg.si("schedule", "dark_time"),
                           cfg.si("schedule", "cool_time"), cfg.get("schedule", "cycles"))
    per_record = max(1, int(round(cfg.si("schedule", "record_time") / trap.rf_period)))
    return trap, ens, cooling, schedule, integ, per_record


def cmd_md(cfg: RunConfig, out: str) -> int:
    trap, ens, cooling, schedule, integ, per_record = md_setup(cfg)
    meta = io.run_metadata(cfg, {"rng": md.RNG_ALGORITHM})
    h, name = meta[io.HASH_KEY], ens.species.name

    def snapshot(idx, e):
        io.write_snapshot(os.path.join(out, f"snapshot_{idx:03d}.txt"),
                          io.Snapshot(h, e.time, name, e.positions, e.velocities))

    try:
        res = md.run_sequence(ens, trap, cooling, schedule, integ, per_record, on_phase=snapshot)
    except md.IntegrationError as err:
        if err.ensemble is not None:
            e = err.ensemble
            io.write_snapshot(os.path.join(out, "abort_state.txt"),
                              io.Snapshot(h, e.time, name, e.positions, e.velocities))
        print(f"error: {err}; last good state in abort_state.txt", file=sys.stderr)
        return EXIT_ERROR
    rows = [(r.t, r.T_axial, r.T_radial, r.T_angular, int(d)) for r, d in zip(res.records, res.dark)]
    io.write_csv(os.path.join(out, "temperatures.csv"),
                 ["t", "T_axial", "T_radial", "T_angular", "dark"], ["s", "K", "K", "K", "1"],
                 rows, meta)
    summ = res.dark_summary()
    io.write_csv(os.path.join(out, "md_summary.csv"), list(summ), ["1", "K", "K"],
                 [list(summ.values())], meta)
    print(f"dark-time T_axial: mean {summ['mean_T_axial'] * 1e3:.3f} mK, "
          f"FWHM {summ['fwhm_T_axial'] * 1e3:.3f} mK ({summ['dark_records']} records)")
    return EXIT_OK


# -- budget -------------------------------------------------------------------

def scenario_from_config(cfg: RunConfig) -> ClockScenario:
    trap, sp, n = cfg.trap(), cfg.species, cfg.n_ions
    R = cfg.get("scenario", "ring_radius")
    if R == "auto":
        r_min = tm.effective_potential_minimum_rmin(trap, sp)
        R = r_min + ring.coulomb_radius_shift_epsilon(trap, sp, n, R=r_min)
    else:
        R = cfg.si("scenario", "ring_radius")
    return ClockScenario(
        trap, sp, n, R,
        T_axial=cfg.si("scenario", "T_axial"),
        T_radial=cfg.si("scenario", "T_radial"),
        zeeman_sublevel_MJ=cfg.get("scenario", "M_J"),
        magnetic_field=cfg.si("scenario", "B"),
        magnetic_field_fluctuation=cfg.si("scenario", "dB"),
        bbr_temperature=cfg.si("scenario", "bbr_T"),
        bbr_temperature_uncertainty=cfg.si("scenario", "bbr_dT"),
        laser_waist=cfg.si("scenario", "laser_waist"),
        misalignment=cfg.si("scenario", "misalignment"),
        extra_dc_quadrupole_uncertainty=cfg.si("scenario", "extra_dc_quadrupole"),
        axial_voltage_stability=cfg.get("scenario", "axial_voltage_stability"),
        radius_override=cfg.get("scenario", "radius_override"),
    )


def budget_from_config(cfg: RunConfig):
    return assemble_budget(scenario_from_config(cfg), cfg.get("scenario", "broadening"))


def threshold_violations(cfg: RunConfig, budget) -> list[str]:
    out = []
    lim = {k: cfg.si("thresholds", k) for k in ("max_shift", "max_broadening", "max_long_term",
                                                "max_total_shift")}
    for e in budget.entries:
        tag = f"{e.effect_name} ({e.conditions})"
        if lim["max_shift"] is not None and e.tabulated_shift > lim["max_shift"]:
            out.append(f"{tag}: shift {e.tabulated_shift:.4g} Hz > {lim['max_shift']:g} Hz")
        if lim["max_broadening"] is not None and e.broadening_halfwidth > lim["max_broadening"]:
            out.append(f"{tag}: broadening {e.broadening_halfwidth:.4g} Hz > {lim['max_broadening']:g} Hz")
        if lim["max_long_term"] is not None and e.long_term_fractional > lim["max_long_term"]:
            out.append(f"{tag}: long-term {e.long_term_fractional:.3g} > {lim['max_long_term']:g}")
    if lim["max_total_shift"] is not None and budget.total_shift > lim["max_total_shift"]:
        out.append(f"total shift {budget.total_shift:.4g} Hz > {lim['max_total_shift']:g} Hz")
    return out


def cmd_budget(cfg: RunConfig, out: str) -> int:
    b = budget_from_config(cfg)
    meta = io.run_metadata(cfg)
    table = io.format_budget_table(b, meta)
    with open(os.path.join(out, "budget.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    with open(os.path.join(out, "budget.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(io.format_budget_csv(b, meta))
    print(table, end="")
    bad = threshold_violations(cfg, b)
    for line in bad:
        print(f"threshold exceeded: {line}", file=sys.stderr)
    return EXIT_THRESHOLD if bad else EXIT_OK


# -- sweep --------------------------------------------------------------------

BUDGET_SWEEP_COLUMNS = ("total_shift", "total_broadening", "total_long_term", "doppler2",
                        "stark_scalar", "R")
BUDGET_SWEEP_UNITS = ("Hz", "Hz", "1", "Hz", "Hz", "m")


def _sweep_point(args):
    cfg, kind = args
    try:
        if kind == "statics":
            res = statics_result(cfg)
            return [res[c] for c in STATICS_COLUMNS] + [""]
        b = budget_from_config(cfg)
        row = [b.total_shift, b.total_broadening, b.total_long_term,
               b.entries[0].shift, b.entries[1].shift, b.scenario.ring_radius_R]
        return row + [""]
    except (ValueError, RuntimeError) as e:
        width = len(STATICS_COLUMNS) if kind == "statics" else len(BUDGET_SWEEP_COLUMNS)
        return [""] * width + [f"{type(e).__name__}: {e}".replace("\n", " ")]


def sweep_points(cfg: RunConfig):
    """(axis values, derived config) for every grid point, row-major."""
    axes = [(cfg.get("sweep", "axis"), cfg.get("sweep", "values"))]
    if cfg.get("sweep", "axis2"):
        axes.append((cfg.get("sweep", "axis2"), cfg.get("sweep", "values2")))
    base = RunConfig({s: d for s, d in cfg.values.items() if s != "sweep"})
    base = base.with_value("mode", "statics" if cfg.get("sweep", "kind") == "statics" else "budget")
    points = []
    for combo in itertools.product(*(v for _, v in axes)):
        c = base
        for (name, _), val in zip(axes, combo):
            c = c.with_value(name, val)
        points.append((combo, c))
    return [a for a, _ in axes], points


def run_sweep(cfg: RunConfig, threads: int = 1):
    kind = cfg.get("sweep", "kind")
    names, points = sweep_points(cfg)
    jobs = [(c, kind) for _, c in points]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows = [list(combo) + r for (combo, _), r in zip(points, results)]
    if kind == "statics":
        cols, units = STATICS_COLUMNS, STATICS_UNITS
    else:
        cols, units = BUDGET_SWEEP_COLUMNS, BUDGET_SWEEP_UNITS
    return list(names) + list(cols) + ["error"], ["as given"] * len(names) + list(units) + [""], rows


def cmd_sweep(cfg: RunConfig, out: str, threads: int = 1) -> int:
    cols, units, rows = run_sweep(cfg, threads)
    io.write_csv(os.path.join(out, "sweep.csv"), cols, units, rows, io.run_metadata(cfg))
    failed = sum(1 for r in rows if r[-1])
    print(f"{len(rows)} points, {failed} failed")
    return EXIT_OK


# -- entry point --------------------------------------------------------------

COMMANDS = {"potential-scan": cmd_potential_scan, "statics": cmd_statics, "md": cmd_md,
            "budget": cmd_budget, "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="ionring", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--out", default="out")
        s.add_argument("--seed", type=int, help="overrides the seed in the config file")
        if name == "sweep":
            s.add_argument("--threads", type=int, default=1)
    v = sub.add_parser("verify", help="check config hashes of the files in an output directory")
    v.add_argument("--out", default="out")
    v.add_argument("--config", help="config to check against (default DIR/config.cfg)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            cfg = load_run_config(args.config) if args.config else None
            bad = io.verify_directory(args.out, cfg)
            for name in bad:
                print(f"hash mismatch: {name}")
            print("ok" if not bad else f"{len(bad)} file(s) do not match")
            return EXIT_HASH if bad else EXIT_OK
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_value("seed", str(args.seed))
        if cfg.mode != args.command:
            raise ConfigError(f"config is for mode {cfg.mode}, not {args.command}", key="mode")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    os.makedirs(args.out, exist_ok=True)
    io.write_config_copy(os.path.join(args.out, "config.cfg"), cfg)
    try:
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.threads)
        return COMMANDS[args.command](cfg, args.out)
    except (ScenarioError, ring.ConvergenceError, tm.QuadrupoleError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
