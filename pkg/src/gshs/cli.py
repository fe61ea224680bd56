"""Command-line orchestration of the verification experiments.

All subcommands are deterministic for a fixed (config, seed) pair;
numeric CSV columns are bitwise reproducible.  Worker-count precedence:
--workers flag, then the GSHS_WORKERS environment variable, then the
configuration file.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .assumptions import validate_assumptions
from .config import (ConfigError, ExperimentConfig, config_hash, load_config)
from .dynamics import (SdeConfig, export_ensemble_csv, martingale_process,
                       quadratic_compensator, save_ensemble, simulate_gshs)
from .generator import relative_invariance_residual
from .measures import GibbsMeasure, InitialDistribution
from .potentials import scale_velocity_potential
from .report import ConvergenceReport, save_line_plot
from .scaling import generator_summand_norms, norm_convergence_curve
from .stats import (default_weight_battery, empirical_quadratic_variation,
                    martingale_zscores, overdamped_limit_experiment)
from .testfunctions import product_bump, velocity_coordinate

EXIT_FAILURE = 1
EXIT_PARSE = 2


def _load(config_path) -> ExperimentConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_PARSE)


def _workers(cfg: ExperimentConfig, flag):
    if flag is not None:
        return flag
    env = os.environ.get("GSHS_WORKERS")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            click.echo(f"ignoring invalid GSHS_WORKERS={env!r}", err=True)
    return cfg.workers


def _out_dir(cfg: ExperimentConfig, flag) -> Path:
    out = Path(flag) if flag else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _common(func):
    func = click.option("--config", "config_path", required=True,
                        type=click.Path(exists=True, dir_okay=False),
                        help="experiment configuration file")(func)
    func = click.option("--seed", type=int, default=None,
                        help="override the configured seed")(func)
    func = click.option("--workers", type=int, default=None,
                        help="worker count (overrides GSHS_WORKERS)")(func)
    func = click.option("--out", "out_flag", type=click.Path(file_okay=False),
                        default=None, help="output directory")(func)
    return func


@click.group()
def main():
    """Simulation and verification lab for kinetic Langevin systems
    with general velocity potentials and their overdamped limit."""


@main.command()
@_common
def validate(config_path, seed, workers, out_flag):
    """Check the structural hypotheses on the configured potentials."""
    cfg = _load(config_path)
    out = _out_dir(cfg, out_flag)
    phi1, phi2 = cfg.phi1.build(), cfg.phi2.build()
    report = validate_assumptions(phi1, phi2)
    path = out / "assumptions.txt"
    path.write_text("\n".join(report.lines()) + "\n")
    for line in report.lines():
        click.echo(line)
    if not report.passed:
        names = ", ".join(e.name for e in report.violations)
        click.echo(f"violations: {names}", err=True)
        sys.exit(EXIT_FAILURE)


@main.command()
@_common
@click.option("--force", is_flag=True,
              help="run despite validator violations or stiffness-rule "
                   "refusal")
def simulate(config_path, seed, workers, out_flag, force):
    """Integrate the kinetic system and write ensemble files."""
    cfg = _load(config_path)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    out = _out_dir(cfg, out_flag)
    n_workers = _workers(cfg, workers)
    phi1, phi2 = cfg.phi1.build(), cfg.phi2.build()

    if not force:
        report = validate_assumptions(phi1, phi2)
        if not report.passed:
            names = ", ".join(e.name for e in report.violations)
            click.echo(f"refusing to simulate: validator violations "
                       f"({names}); pass --force to override", err=True)
            sys.exit(EXIT_FAILURE)
    s = cfg.sde
    try:
        sde = SdeConfig(eps=s.eps, t_end=s.t_end, dt=s.dt, scheme=s.scheme,
                        n_paths=s.n_paths, seed=cfg.seed,
                        singularity_guard=s.singularity_guard,
                        guard_distance=s.guard_distance,
                        record_stride=s.record_stride, force=force)
    except ValueError as exc:
        click.echo(f"refusing to simulate: {exc}", err=True)
        sys.exit(EXIT_FAILURE)

    mu = GibbsMeasure(phi1=phi1, phi2=scale_velocity_potential(phi2, s.eps)
                      if s.eps != 1.0 else phi2)
    init = InitialDistribution.stationary(mu)
    paths = simulate_gshs(phi1, mu.phi2, init, sde, workers=n_workers)
    save_ensemble(paths, out / "ensemble.bin")
    export_ensemble_csv(paths, out / "ensemble.csv")
    (out / "ensemble.meta").write_text(
        f"config_hash={config_hash(cfg)}\nrescues={paths.rescue_count}\n")
    click.echo(f"wrote {out / 'ensemble.bin'} "
               f"({paths.n_paths} paths, {paths.times.size} instants, "
               f"{paths.rescue_count} guard rescues)")


@main.command("overdamped-limit")
@_common
@click.option("--no-compensator", is_flag=True,
              help="negative control: drop the drift compensator in the "
                   "martingale battery (expected to fail)")
def overdamped_limit(config_path, seed, workers, out_flag, no_compensator):
    """Distance of the position law to the limit law across eps."""
    cfg = _load(config_path)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    out = _out_dir(cfg, out_flag)
    n_workers = _workers(cfg, workers)
    phi1, phi2 = cfg.phi1.build(), cfg.phi2.build()

    if no_compensator:
        ok = _broken_martingale_control(cfg, phi1, phi2, n_workers, out)
        sys.exit(EXIT_FAILURE if ok else 0)

    report = overdamped_limit_experiment(
        phi1, phi2, cfg.eps_grid, cfg.times, cfg.sde.n_paths, cfg.seed,
        dt=cfg.sde.dt, workers=n_workers, p_threshold=cfg.p_threshold)
    report.write_csv(out / "overdamped_limit.csv", config_hash(cfg))
    save_line_plot(out / "overdamped_limit.svg", report.column("eps"),
                   {"energy distance": report.column("energy_distance")},
                   xlabel="eps", ylabel="energy distance", logx=True,
                   logy=True)
    for line in report.summary_lines():
        click.echo(line)
    if not report.passed:
        sys.exit(EXIT_FAILURE)


def _stationary_paths(cfg, phi1, phi2, n_workers, record_stride=None):
    s = cfg.sde
    sde = SdeConfig(eps=s.eps, t_end=s.t_end, dt=s.dt, scheme=s.scheme,
                    n_paths=s.n_paths, seed=cfg.seed,
                    singularity_guard=s.singularity_guard,
                    guard_distance=s.guard_distance,
                    record_stride=s.record_stride if record_stride is None
                    else record_stride)
    mu = GibbsMeasure(phi1=phi1, phi2=phi2)
    init = InitialDistribution.stationary(mu)
    return simulate_gshs(phi1, phi2, init, sde, workers=n_workers), sde


def _broken_martingale_control(cfg, phi1, phi2, n_workers, out):
    """Drop the drift integral and confirm the battery rejects.

    Returns True when the broken process is detected (some |z| > 5),
    which the caller maps to a nonzero exit code."""
    paths, _ = _stationary_paths(cfg, phi1, phi2, n_workers)
    g = velocity_coordinate(0, phi1.dim)
    fv = paths.states.reshape(-1, 2 * phi1.dim)
    broken = g.value_at(fv).reshape(paths.states.shape[:2])
    broken = broken - broken[:, :1]
    s, t = 0.25, 0.75
    scores = martingale_zscores(broken, paths.times, s, t,
                                default_weight_battery(paths, broken, s))
    worst = max(abs(z.z) for z in scores if z.z is not None)
    click.echo(f"negative control: max |z| = {worst:.2f} "
               f"(compensator dropped)")
    return worst > 5.0


@main.command()
@_common
@click.option("--no-compensator", is_flag=True,
              help="negative control: drop the drift compensator")
def martingale(config_path, seed, workers, out_flag, no_compensator):
    """Martingale z-score battery and quadratic-variation check."""
    cfg = _load(config_path)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    out = _out_dir(cfg, out_flag)
    n_workers = _workers(cfg, workers)
    phi1, phi2 = cfg.phi1.build(), cfg.phi2.build()
    if no_compensator:
        ok = _broken_martingale_control(cfg, phi1, phi2, n_workers, out)
        sys.exit(EXIT_FAILURE if ok else 0)

    # record every step so the compensator time integrals are sharp
    paths, sde = _stationary_paths(cfg, phi1, phi2, n_workers,
                                   record_stride=1)
    g = velocity_coordinate(0, phi1.dim)
    M = martingale_process(paths, g, phi1, phi2, rule="left")
    s, t = 0.25, 0.75
    scores = martingale_zscores(M, paths.times, s, t,
                                default_weight_battery(paths, M, s))
    qv, _ = empirical_quadratic_variation(M)
    comp = quadratic_compensator(paths, g, phi1, phi2, rule="left")
    comp_end = float(comp.mean(axis=0)[-1])
    qv_end = float(qv[-1])

    report = ConvergenceReport(columns=["weight", "z"])
    ok = True
    for zs in scores:
        if zs.z is None:
            click.echo(f"weight {zs.weight}: skipped ({zs.note})")
            continue
        report.add_row([zs.weight, zs.z])
        click.echo(f"weight {zs.weight}: z = {zs.z:+.3f}")
        ok &= abs(zs.z) <= 3.0
    rel_qv = abs(qv_end - comp_end) / comp_end
    click.echo(f"QV({paths.times[-1]:g}) = {qv_end:.4f} vs compensator "
               f"{comp_end:.4f} (relative {rel_qv:.3%})")
    ok &= rel_qv <= 0.05
    report.write_csv(out / "martingale.csv", config_hash(cfg))
    if not ok:
        sys.exit(EXIT_FAILURE)


@main.command()
@_common
def semigroup(config_path, seed, workers, out_flag):
    """Embedded-norm convergence and generator summand norms."""
    cfg = _load(config_path)
    out = _out_dir(cfg, out_flag)
    phi1, phi2 = cfg.phi1.build(), cfg.phi2.build()
    f = product_bump(np.zeros(phi1.dim), np.ones(phi1.dim))
    eps_grid = sorted(cfg.eps_grid, reverse=True)
    report = norm_convergence_curve(f, phi1, phi2, eps_grid)
    report.write_csv(out / "norm_convergence.csv", config_hash(cfg))
    save_line_plot(out / "norm_convergence.svg", report.column("eps"),
                   {"relative norm error": report.column("rel_error")},
                   xlabel="eps", ylabel="relative error", logx=True,
                   logy=True)

    summands = ConvergenceReport(
        columns=["eps", "term1", "term2", "term3", "term4",
                 "term5_distance", "term6_distance", "reconstruction"])
    for eps in eps_grid:
        rep = generator_summand_norms(f, phi1, phi2, eps)
        summands.add_row([eps, *rep.term_norms, rep.term5_distance,
                          rep.term6_distance, rep.reconstruction_error])
    summands.write_csv(out / "summand_norms.csv", config_hash(cfg))
    for line in report.summary_lines():
        click.echo(line)
    if not report.passed:
        sys.exit(EXIT_FAILURE)


@main.command()
@_common
@click.option("--eps", type=float, default=1.0, show_default=True)
def invariance(config_path, seed, workers, out_flag, eps):
    """One-line CSV record of the stationarity residual of a bump."""
    cfg = _load(config_path)
    out = _out_dir(cfg, out_flag)
    phi1, phi2 = cfg.phi1.build(), cfg.phi2.build()
    f = product_bump(np.zeros(2 * phi1.dim), np.ones(2 * phi1.dim))
    res = relative_invariance_residual(phi1, phi2, f, eps=eps)
    record = ConvergenceReport(columns=["phi1", "phi2", "eps", "residual"])
    record.add_row([phi1.name, phi2.name, eps, res])
    record.write_csv(out / "invariance.csv", config_hash(cfg))
    click.echo(f"{phi1.name},{phi2.name},{eps:g},{res!r}")
    if res > 1e-6:
        sys.exit(EXIT_FAILURE)


@main.command()
@_common
def report(config_path, seed, workers, out_flag):
    """Summarize the CSV artifacts present in the output directory."""
    cfg = _load(config_path)
    out = _out_dir(cfg, out_flag)
    found = sorted(out.glob("*.csv"))
    if not found:
        click.echo(f"no CSV artifacts in {out}")
        return
    expected = config_hash(cfg)
    for path in found:
        lines = path.read_text().strip().splitlines()
        tail = lines[-1] if lines else ""
        match = tail == f"# config_hash={expected}"
        status = "matches config" if match else "different config"
        click.echo(f"{path.name}: {max(len(lines) - 2, 0)} rows ({status})")


if __name__ == "__main__":
    main()
