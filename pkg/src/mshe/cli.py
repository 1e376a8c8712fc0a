"""Command-line front end.

    mshe <subcommand> --config PATH [--out PATH] [--guess mode:K|file:PATH]
                      [--seeds N] [--rng-seed N]

Exit status: 0 on success, 1 for invalid input or configuration, 2 for a
numerical failure (divergence, Newton failure, unusable fit window).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from . import serialize as ser
from .analysis import (
    attractor_sweep,
    estimate_lojasiewicz,
    fit_decay,
    lojasiewicz_from_series,
    verify_convergence,
)
from .config import initial_field, load_config, read_modes_file
from .dynamics import energy, integrate
from .errors import ConfigError, DivergenceError, MSHEError
from .field import Field
from .stationary import assemble_linearization, find_equilibrium, spectrum

log = logging.getLogger("mshe")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2


def _plot(args, cfg):
    return not args.no_plot and (cfg is None or cfg.outputs.figures)


def _figure(func, out, *fargs, **kwargs):
    from . import plotting

    path = plotting.figure_path(out)
    getattr(plotting, func)(*fargs, path, **kwargs)
    log.info("figure written to %s", path)
    return str(path)


def _require_out(args, fallback, what="--out"):
    out = args.out or fallback
    if out is None:
        raise ConfigError(f"{what} is required (or set it in the config outputs)", key="out")
    return out


def _guess_field(args, cfg, domain):
    spec = args.guess
    if spec is None:
        return initial_field(cfg, domain)
    kind, _, value = spec.partition(":")
    if kind == "mode":
        try:
            k = int(value)
        except ValueError:
            raise ConfigError(f"bad --guess {spec!r}; expected mode:<k>", key="guess") from None
        return domain.basis(k)
    if kind == "file":
        return Field.from_modes(domain, read_modes_file(value, domain, key="guess"))
    raise ConfigError(f"bad --guess {spec!r}; expected mode:<k> or file:<path>", key="guess")


def _run(cfg, args):
    domain = cfg.build_domain()
    if getattr(args, "resume", None):
        ckpt = ser.load_checkpoint(args.resume)
        if ckpt.domain.n_modes != domain.n_modes or ckpt.domain.length != domain.length:
            raise ConfigError("checkpoint domain differs from the configured domain", key="resume")
        return ser.resume(ckpt, cfg.scheme, domain)
    return integrate(initial_field(cfg, domain), cfg.params, cfg.scheme)


def cmd_simulate(args):
    cfg = load_config(args.config)
    out = _require_out(args, cfg.outputs.trajectory_path)
    try:
        traj = _run(cfg, args)
    except DivergenceError as exc:
        partial = exc.trajectory
        if partial is not None and len(partial):
            ser.emit_timeseries(partial, out)
            print(f"partial trajectory ({len(partial)} records) flushed to {out}", file=sys.stderr)
        raise
    ser.emit_timeseries(traj, out)
    summary = ser.trajectory_summary_doc(traj)
    if _plot(args, cfg):
        summary["figure"] = _figure("plot_timeseries", out, ser.read_timeseries(out))
    if cfg.outputs.report_path:
        ser.write_document(summary, cfg.outputs.report_path, cfg.to_dict())
    if cfg.outputs.checkpoint_path:
        ser.write_checkpoint(ser.checkpoint_from(traj), cfg.outputs.checkpoint_path, cfg.to_dict())
    print(f"wrote {len(traj)} records to {out}")
    return EXIT_OK


def cmd_equilibrium(args):
    cfg = load_config(args.config)
    out = _require_out(args, cfg.outputs.report_path)
    domain = cfg.build_domain()
    eq = find_equilibrium(_guess_field(args, cfg, domain), cfg.params)
    doc = ser.equilibrium_doc(eq, energy(eq.field, cfg.params))
    if _plot(args, cfg):
        doc["figure"] = _figure("plot_equilibrium", out, domain, eq.field.modes,
                                title=rf"$\mu$ = {eq.mu:.10g}")
    ser.write_document(doc, out, cfg.to_dict())
    print(f"equilibrium mu={eq.mu:.12g} residual={eq.residual_norm:.3e} iterations={eq.iterations}")
    return EXIT_OK


def cmd_spectrum(args):
    cfg = load_config(args.config)
    out = _require_out(args, cfg.outputs.report_path)
    domain = cfg.build_domain()
    eq = find_equilibrium(_guess_field(args, cfg, domain), cfg.params)
    report = spectrum(assemble_linearization(eq, cfg.params))
    doc = ser.stability_doc(report, eq)
    if _plot(args, cfg):
        doc["figure"] = _figure("plot_spectrum", out, report)
    ser.write_document(doc, out, cfg.to_dict())
    print(f"{report.classification}: slowest tangent rate {report.slowest_rate:.10g}")
    return EXIT_OK


def _series(args):
    """Time-series columns from ``--input`` or from a fresh run of ``--config``."""
    if args.input:
        return ser.read_timeseries(args.input), None, None
    if not args.config:
        raise ConfigError("either --input or --config is required", key="input")
    cfg = load_config(args.config)
    traj = integrate(initial_field(cfg), cfg.params, cfg.scheme)
    cols = {
        "t": traj.times,
        "energy": traj.energy,
        "l2_norm": traj.l2_norm,
        "v_norm_sq": traj.v_norm_sq,
        "residual_M": traj.residual_norm,
        "dissipation_integral": traj.dissipation_integral,
    }
    return cols, cfg, traj


def cmd_decay_fit(args):
    cols, cfg, _ = _series(args)
    if args.column not in cols:
        raise ConfigError(f"unknown column {args.column!r}", key="column")
    y = cols[args.column]
    if args.subtract_min:
        y = y - np.min(y)
    fit = fit_decay(cols["t"], y, args.model, t_min=args.t_min, t_max=args.t_max)
    out = _require_out(args, cfg.outputs.report_path if cfg else None)
    doc = ser.decay_fit_doc(fit, args.column)
    if _plot(args, cfg):
        doc["figure"] = _figure("plot_decay_fit", out, cols["t"], y, fit, label=args.column)
    ser.write_document(doc, out, cfg.to_dict() if cfg else {"input": args.input})
    rate = fit.kappa2 if fit.model == "exponential" else fit.exponent
    print(f"{fit.model} fit: rate {rate:.10g}, r^2 {fit.r_squared:.6f}")
    return EXIT_OK


def cmd_theta(args):
    cols, cfg, traj = _series(args)
    if args.equilibrium:
        doc = ser.read_document(args.equilibrium)
        if "energy" not in doc:
            raise ConfigError(f"{args.equilibrium} has no 'energy' entry", key="equilibrium")
        limit = float(doc["energy"])
        est = lojasiewicz_from_series(cols["energy"], cols["residual_M"], limit)
    elif traj is not None:
        eq = find_equilibrium(traj.final_field, cfg.params)
        limit = energy(eq.field, cfg.params)
        est = estimate_lojasiewicz(traj, eq)
    else:
        raise ConfigError("--equilibrium is required with --input", key="equilibrium")
    out = _require_out(args, cfg.outputs.report_path if cfg else None)
    doc = ser.theta_doc(est, limit)
    if _plot(args, cfg):
        doc["figure"] = _figure("plot_theta", out, np.abs(cols["energy"] - limit), cols["residual_M"], est)
    ser.write_document(doc, out, cfg.to_dict() if cfg else {"input": args.input})
    print(f"theta = {est.theta:.8f} ({est.n_points} records)")
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    sw = cfg.sweep
    if args.seeds is not None:
        sw = replace(sw, seeds=args.seeds)
    if args.rng_seed is not None:
        sw = replace(sw, rng_seed=args.rng_seed)
    cfg = replace(cfg, sweep=sw)
    out = _require_out(args, cfg.outputs.report_path)
    report = attractor_sweep(sw.seeds, cfg.params, cfg.scheme, sw.rng_seed, cfg.build_domain(),
                             n_active=sw.n_active, workers=sw.workers)
    doc = ser.attractor_doc(report)
    if _plot(args, cfg):
        doc["figure"] = _figure("plot_sweep", out, report)
    ser.write_document(doc, out, cfg.to_dict())
    print(f"{len(report.clusters)} cluster(s), {report.unconverged} unconverged, "
          f"{report.bound_violations} bound violations over {report.states_checked} states")
    return EXIT_OK


def cmd_converge(args):
    cfg = load_config(args.config)
    out = _require_out(args, cfg.outputs.report_path)
    domain = cfg.build_domain()
    traj = integrate(initial_field(cfg, domain), cfg.params, cfg.scheme)
    target = _guess_field(args, cfg, domain) if args.guess else traj.final_field
    eq = find_equilibrium(target, cfg.params)
    rep = verify_convergence(traj, eq)
    ser.write_document(ser.convergence_doc(rep), out, cfg.to_dict())
    print(f"converged={rep.converged} distance={rep.l2_distance:.3e} tail={rep.cauchy_tail:.3e}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mshe", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--out", help="output path (CSV for simulate, JSON otherwise)")
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
        return p

    p = common(sub.add_parser("simulate", help="integrate the flow and write the time series"))
    p.add_argument("--resume", help="continue from a checkpoint document")
    p.set_defaults(func=cmd_simulate)

    for name, func, text in (
        ("equilibrium", cmd_equilibrium, "solve for an equilibrium by bordered Newton"),
        ("spectrum", cmd_spectrum, "equilibrium, its linearization and stability"),
        ("converge", cmd_converge, "integrate and verify convergence to an equilibrium"),
    ):
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--guess", help="mode:<k> or file:<path> (default: the config's init)")
        p.set_defaults(func=func)

    p = common(sub.add_parser("decay-fit", help="fit a decay law to a time-series column"), False)
    p.add_argument("--input", help="CSV written by simulate (default: run --config)")
    p.add_argument("--column", default="residual_M", help="column to fit (default residual_M)")
    p.add_argument("--model", default="auto", choices=("auto", "exponential", "polynomial"))
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--subtract-min", action="store_true", help="fit y - min(y) (for the energy column)")
    p.set_defaults(func=cmd_decay_fit)

    p = common(sub.add_parser("theta", help="estimate the Lojasiewicz exponent"), False)
    p.add_argument("--input", help="CSV written by simulate (default: run --config)")
    p.add_argument("--equilibrium", help="equilibrium document supplying the limit energy")
    p.set_defaults(func=cmd_theta)

    p = common(sub.add_parser("sweep", help="ensemble of random initial data"))
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--rng-seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ser.OutputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MSHEError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
