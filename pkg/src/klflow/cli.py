"""Config-driven experiment runner.

One subcommand per experiment kind, all reading the same TOML schema:

    klflow verify-identity  --config cfg.toml    grid solver + identity check
    klflow oracle           --config cfg.toml    closed-form Gaussian check
    klflow check-assumptions --config cfg.toml   probe-based assumption report
    klflow simulate         --config cfg.toml    particles vs. grid solver
    klflow fp-solve         --config cfg.toml    solver-only trajectory dump

Exit codes: 0 success, 1 a quantitative check failed, 2 invalid input.
Every run is deterministic given the config; seeds live in the config
and can be overridden with --seed. The output directory resolves as
--out, then $KLFLOW_OUT_DIR, then the config's output.directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .assumptions import AssumptionReport, run_all_checks
from .config import ConfigError, ExperimentConfig, build_family, load_config
from .diagnostics import (
    check_envelope,
    compute_record,
    histogram_kl,
    kl_divergence,
    kl_time_derivative_fd,
    l1_distance,
    verify_identity,
)
from .fokker_planck import StabilityError, fp_solve
from .grid import Axis, Grid, GridDensity, coarsen, discretize
from .io import (
    atomic_write,
    write_density,
    write_ensemble,
    write_records_csv,
)
from .oracle import gaussian_state, identity_residual_gaussian
from .sde import init_gaussian_ensemble, histogram_density, simulate
from .targets import TargetFamily, make_gaussian_path

__all__ = ["main"]

OUT_DIR_ENV = "KLFLOW_OUT_DIR"

# oracle gates: the chain-rule mode is exact up to roundoff, the FD mode
# carries the O(spacing^2) difference error
ORACLE_CHAIN_TOL = 1e-10
ORACLE_FD_TOL = 1e-5


def _solver_grid(config: ExperimentConfig, family: TargetFamily) -> Grid:
    """Solver grid covering both the target path and the initial density."""
    d = config.diagnostics
    lo_box, hi_box = family.support_bounds(d.t0, d.t1)
    init_mean = np.asarray(config.initial.mean, dtype=float)
    if init_mean.shape != (family.dim,):
        raise ConfigError(
            f"initial.mean has {init_mean.size} entries, family dim is {family.dim}"
        )
    pad = config.solver.padding_sigmas * max(
        family.max_std(), math.sqrt(config.initial.sigma_sq)
    )
    lo = np.minimum(lo_box, init_mean) - pad
    hi = np.maximum(hi_box, init_mean) + pad
    ns = config.solver.n
    if len(ns) == 1:
        ns = ns * family.dim
    if len(ns) != family.dim:
        raise ConfigError(f"solver.n has {len(ns)} entries, family dim is {family.dim}")
    grid = Grid(tuple(Axis(float(lo[k]), float(hi[k]), int(ns[k])) for k in range(family.dim)))
    grid.check_budget()
    return grid


def _initial_density(config: ExperimentConfig, grid: Grid, t0: float) -> GridDensity:
    m = tuple(config.initial.mean)
    s_sq = config.initial.sigma_sq
    static = make_gaussian_path(m, m, s_sq, s_sq)
    return discretize(static, t0, grid)


def cmd_verify_identity(config: ExperimentConfig, out_dir: Path, say) -> int:
    family = build_family(config.family)
    d = config.diagnostics
    checkpoints = d.checkpoint_times()
    grid = _solver_grid(config, family)
    q0 = _initial_density(config, grid, d.t0)
    say(f"solving on {grid.shape} grid over [{d.t0:g}, {d.t1:g}]")
    densities = fp_solve(
        q0, family, d.t0, d.t1, config.solver.dt, checkpoints, config.solver.safety
    )
    records = [compute_record(q, family) for q in densities]
    records = kl_time_derivative_fd(records)
    records, summary = verify_identity(records)
    if config.output.csv:
        write_records_csv(records, out_dir / "records.csv")
    if config.output.plots:
        from . import plots

        plots.plot_records(records, out_dir / "records.png")
        plots.plot_density(densities[-1], out_dir / "density_final.png")

    ok = summary.max_relative_residual <= d.tolerance
    say(f"checkpoints: {len(records)} ({summary.n_interior} interior)")
    say(f"max |residual|         = {summary.max_abs_residual:.6e}")
    say(
        f"max relative residual  = {summary.max_relative_residual:.6e}"
        f" (tolerance {d.tolerance:g})"
    )
    if d.envelope_c1 is not None:
        report = check_envelope(densities[-1], d.envelope_c1, d.envelope_c2)
        state = "satisfied" if report.satisfied else "violated"
        say(f"envelope (c1={report.c1:g}, c2={report.c2:g}): {state}")
        if not report.satisfied:
            w = report.worst_violation
            say(f"  worst violation at x={w.x}, q={w.q_value:.3e}, bound={w.bound_value:.3e}")
            ok = False
    say("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_oracle(config: ExperimentConfig, out_dir: Path, say) -> int:
    if config.family.kind != "gaussian-path":
        raise ConfigError(
            f"oracle requires family.kind = 'gaussian-path', got {config.family.kind!r}"
        )
    family = build_family(config.family)
    d = config.diagnostics
    t_grid = d.checkpoint_times()
    state0 = gaussian_state(
        family.path, d.t0, np.asarray(config.initial.mean, dtype=float),
        config.initial.sigma_sq,
    )
    rec_chain, sum_chain = identity_residual_gaussian(
        family.path, state0, t_grid, d.dt_ode, mode="chain"
    )
    rec_fd, sum_fd = identity_residual_gaussian(
        family.path, state0, t_grid, d.dt_ode, mode="fd"
    )
    if config.output.csv:
        write_records_csv(rec_chain, out_dir / "records_chain.csv")
        write_records_csv(rec_fd, out_dir / "records_fd.csv")
    if config.output.plots:
        from . import plots

        plots.plot_records(rec_fd, out_dir / "records_fd.png")

    ok_chain = sum_chain.max_abs_residual <= ORACLE_CHAIN_TOL
    ok_fd = sum_fd.max_abs_residual <= ORACLE_FD_TOL
    say(f"chain mode: max |residual| = {sum_chain.max_abs_residual:.6e}"
        f" (tolerance {ORACLE_CHAIN_TOL:g})")
    say(f"fd mode:    max |residual| = {sum_fd.max_abs_residual:.6e}"
        f" (tolerance {ORACLE_FD_TOL:g})")
    ok = ok_chain and ok_fd
    say("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _report_as_dict(report: AssumptionReport) -> dict:
    lo, hi = report.probe_box
    out: dict = {
        "probe_box": {"lo": list(map(float, lo)), "hi": list(map(float, hi))},
        "probe_count": report.probe_count,
        "times": list(report.times),
        "satisfied": report.satisfied,
        "dissipativity": None,
        "violation_witness": None,
        "lipschitz_estimate": report.lipschitz_estimate,
        "lipschitz_log_estimate": report.lipschitz_log_estimate,
        "growth_constant": report.growth_constant,
        "growth_near_origin": report.growth_near_origin,
        "differentiability": None,
    }
    if report.dissipativity_pair is not None:
        a, b = report.dissipativity_pair
        out["dissipativity"] = {"a": a, "b": b}
    if report.violation_witness is not None:
        t, x = report.violation_witness
        out["violation_witness"] = {"t": t, "x": list(map(float, np.atleast_1d(x)))}
    if report.differentiability is not None:
        diff = report.differentiability
        out["differentiability"] = {
            "max_grad_rel_error": diff.max_grad_rel_error,
            "max_dt_rel_error": diff.max_dt_rel_error,
            "probe_count": diff.probe_count,
        }
    return out


def cmd_check_assumptions(config: ExperimentConfig, out_dir: Path, say) -> int:
    family = build_family(config.family)
    a = config.assumptions
    box = (np.asarray(a.box_lo, dtype=float), np.asarray(a.box_hi, dtype=float))
    report = run_all_checks(family, box, list(a.times), a.target_a, a.b_max, a.seed)
    payload = _report_as_dict(report)
    with atomic_write(out_dir / "assumptions.json") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")

    say(f"probes: {report.probe_count} points x {len(report.times)} times"
        f" in box {payload['probe_box']['lo']} .. {payload['probe_box']['hi']}")
    if report.dissipativity_pair is not None:
        pa, pb = report.dissipativity_pair
        say(f"dissipativity: a = {pa:.6g}, b = {pb:.6g}")
    else:
        t, x = report.violation_witness
        say(f"dissipativity VIOLATED at t = {t:g}, x = {np.atleast_1d(x)}")
    say(f"lipschitz (grad p):     {report.lipschitz_estimate:.6g}")
    say(f"lipschitz (grad log p): {report.lipschitz_log_estimate:.6g}")
    near = ("" if report.growth_near_origin is None
            else f" (near-origin ratio {report.growth_near_origin:.3g})")
    say(f"growth constant c:      {report.growth_constant:.6g}{near}")
    diff = report.differentiability
    say(f"differentiability: grad rel err {diff.max_grad_rel_error:.3e},"
        f" dt rel err {diff.max_dt_rel_error:.3e}")
    say("PASS" if report.satisfied else "FAIL")
    return 0 if report.satisfied else 1


def _comparison_grid(grid: Grid, coarse_n: int) -> tuple[Grid, tuple[int, ...]]:
    factors = []
    axes = []
    for ax in grid.axes:
        if ax.n % coarse_n != 0:
            raise ConfigError(
                f"simulation.comparison_grid_n = {coarse_n} must divide solver n = {ax.n}"
            )
        factors.append(ax.n // coarse_n)
        axes.append(Axis(ax.lo, ax.hi, coarse_n))
    return Grid(tuple(axes)), tuple(factors)


def cmd_simulate(config: ExperimentConfig, out_dir: Path, say) -> int:
    family = build_family(config.family)
    d = config.diagnostics
    s = config.simulation
    checkpoints = d.checkpoint_times()
    e0 = init_gaussian_ensemble(
        s.n_particles, family.dim, config.initial.mean, config.initial.sigma_sq,
        s.seed, t=d.t0,
    )
    say(f"simulating {s.n_particles} particles over [{d.t0:g}, {d.t1:g}]"
        f" with dt = {s.dt:g}, {s.workers} worker(s)")
    snapshots = simulate(
        e0, family, d.t0, d.t1, s.dt, checkpoints, s.diffusion_coefficient, s.workers
    )
    write_ensemble(snapshots[-1], out_dir / "ensemble_final.bin")

    if not s.with_grid:
        say("grid comparison disabled; wrote final ensemble")
        say("PASS")
        return 0

    grid = _solver_grid(config, family)
    coarse_grid, factors = _comparison_grid(grid, s.comparison_grid_n)
    q0 = _initial_density(config, grid, d.t0)
    densities = fp_solve(
        q0, family, d.t0, d.t1, config.solver.dt, checkpoints, config.solver.safety
    )

    rows = []
    ok = True
    for e, q in zip(snapshots, densities):
        hist = histogram_density(e, coarse_grid)
        if hist.flagged:
            say(f"warning: {hist.out_of_domain_fraction:.3%} of particles left"
                f" the comparison domain at t = {e.t:g}")
        coarse = coarsen(q, factors)
        hkl = histogram_kl(hist.density, family, e.n)
        kl_grid = kl_divergence(coarse, family)
        l1 = l1_distance(hist.density, coarse)
        within = abs(hkl.kl - kl_grid) <= 3.0 * hkl.se
        ok = ok and within
        rows.append((e.t, l1, hkl.kl, kl_grid, hkl.se, int(within),
                     hist.out_of_domain_fraction))
    if config.output.csv:
        with atomic_write(out_dir / "comparison.csv") as f:
            f.write("t,l1_distance,kl_hist,kl_grid,kl_se,within_3se,out_of_domain_fraction\n")
            for row in rows:
                f.write(",".join(repr(v) for v in row) + "\n")
    worst = max(abs(r[2] - r[3]) / r[4] if r[4] > 0 else 0.0 for r in rows)
    say(f"checkpoints: {len(rows)}, worst |kl_hist - kl_grid| = {worst:.2f} standard errors")
    say("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_fp_solve(config: ExperimentConfig, out_dir: Path, say) -> int:
    family = build_family(config.family)
    d = config.diagnostics
    checkpoints = d.checkpoint_times()
    grid = _solver_grid(config, family)
    q0 = _initial_density(config, grid, d.t0)
    say(f"solving on {grid.shape} grid over [{d.t0:g}, {d.t1:g}]")
    densities = fp_solve(
        q0, family, d.t0, d.t1, config.solver.dt, checkpoints, config.solver.safety
    )
    for k, q in enumerate(densities):
        write_density(q, out_dir / f"density_{k:04d}.bin")
    if config.output.csv:
        with atomic_write(out_dir / "trajectory.csv") as f:
            f.write("checkpoint,t,mass,min_value\n")
            for k, q in enumerate(densities):
                f.write(f"{k},{q.t!r},{q.mass!r},{float(q.values.min())!r}\n")
    if config.output.plots:
        from . import plots

        plots.plot_density(densities[-1], out_dir / "density_final.png")
    say(f"wrote {len(densities)} checkpoint densities")
    return 0


_COMMANDS = {
    "verify-identity": cmd_verify_identity,
    "oracle": cmd_oracle,
    "check-assumptions": cmd_check_assumptions,
    "simulate": cmd_simulate,
    "fp-solve": cmd_fp_solve,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="klflow",
        description="Langevin / Fokker-Planck KL-dissipation toolkit",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML experiment config")
    common.add_argument("--out", default=None, help="output directory (overrides config)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    def say(msg: str) -> None:
        if not args.quiet:
            print(msg)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = dataclasses.replace(
                config,
                simulation=dataclasses.replace(config.simulation, seed=args.seed),
                assumptions=dataclasses.replace(config.assumptions, seed=args.seed),
            )
        out_dir = Path(
            args.out or os.environ.get(OUT_DIR_ENV) or config.output.directory
        )
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](config, out_dir, say)
    except (ValueError, StabilityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
