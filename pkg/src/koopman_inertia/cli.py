"""Command-line front end: simulate, decompose and estimate inertia.

Every subcommand either simulates the configured fault or reads a time
series CSV given with ``--input``.  Errors end with a nonzero exit status and
a single ``error: <kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import dataio
from .config import RunConfig, load_config, write_manifest
from .errors import InertiaToolError
from .grid_model import load_network, scale_loading
from .inertia import estimate_from_series, leave_each_out, window_sweep
from .kmd import decompose
from .series import TimeSeriesSet, omega_label
from .simulator import simulate

EXIT_ERROR = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: usage: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration file (dotted keys)")
    p.add_argument("--network", help="builtin network name or .net file")
    p.add_argument("--loading", type=float, help="fraction of nominal load and dispatch")
    p.add_argument("--case", choices=["i", "ii"], help="fault preset")
    p.add_argument("--bus", type=int, help="faulted bus")
    p.add_argument("--trip", help="branch cleared with the fault, as A-B")
    p.add_argument("--cycles", type=float, help="fault duration in cycles")
    p.add_argument("--dt", type=float, help="integration step in seconds")
    p.add_argument("--t-end", type=float, dest="t_end", help="simulated span in seconds")
    p.add_argument("--sample-hz", type=float, dest="sample_hz", help="sampling rate")
    p.add_argument("--order", type=int, help="Prony order (upper bound)")
    p.add_argument("--stride", type=int, help="linear-prediction lag stride")
    p.add_argument("--keep", type=int, help="number of most energetic modes kept")
    p.add_argument("--energy-eps", type=float, dest="energy_eps",
                   help="keep modes above this fraction of total energy instead")
    p.add_argument("--window", type=float, help="analysis window in seconds")
    p.add_argument("--input", help="read the time series from this CSV instead of simulating")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker threads for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="koopman-inertia", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("simulate", help="simulate a fault and write the sampled series")
    _add_common(p)
    p = sub.add_parser("estimate", help="estimate inertia from one window")
    _add_common(p)
    p.add_argument("--sweep", nargs="?", const="", metavar="LO:HI:STEP",
                   help="also run a window sweep")
    p.add_argument("--leave-one-out", action="store_true", dest="leave_one_out",
                   help="also run the leave-one-generator-out study")
    p = sub.add_parser("sweep", help="estimate over a range of window lengths")
    _add_common(p)
    p.add_argument("--sweep", metavar="LO:HI:STEP", help="window range (default 2:12:2)")
    p = sub.add_parser("leave-one-out", help="withhold each speed channel in turn")
    _add_common(p)
    p = sub.add_parser("decompose", help="export the Koopman spectrum of one window")
    _add_common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    names = ("network", "loading", "case", "bus", "trip", "cycles", "dt", "t_end", "sample_hz",
             "order", "stride", "keep", "energy_eps", "window", "out", "jobs")
    changes = {n: getattr(args, n) for n in names}
    sweep = getattr(args, "sweep", None)
    if sweep:
        changes["sweep"] = sweep
    if getattr(args, "leave_one_out", False):
        changes["leave_one_out"] = True
    if args.case is not None:
        # a preset replaces any scenario details inherited from a config file
        cfg = dataclasses.replace(cfg, bus=None, trip=None, cycles=None)
    return cfg.updated(**changes)


def _network(cfg: RunConfig):
    return scale_loading(load_network(cfg.network_source()), cfg.loading)


def _series(cfg: RunConfig, args) -> tuple[TimeSeriesSet, dict | None]:
    if args.input:
        return dataio.read_timeseries_csv(args.input, require_power=True), None
    net = _network(cfg)
    data, _ = simulate(net, cfg.scenario(), cfg.t_end, cfg.period, cfg.dt)
    truth = {omega_label(g.id): g.inertia for g in net.dynamic_generators}
    return data, truth


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg: RunConfig, args) -> int:
    net = _network(cfg)
    data, _ = simulate(net, cfg.scenario(), cfg.t_end, cfg.period, cfg.dt)
    out = _out_dir(cfg)
    dataio.write_timeseries_csv(data, out / "timeseries.csv")
    write_manifest(cfg, out / "manifest.cfg")
    print(f"wrote {data.n_samples} samples of {len(data.labels)} channels to {out / 'timeseries.csv'}")
    return 0


def _print_estimate(est, truth) -> None:
    for lab, m in zip(est.labels, est.M):
        extra = f"  (true {truth[lab]:.4f})" if truth else ""
        print(f"{lab:>10s}  {m: .4f}{extra}")
    extra = f"  (true {sum(truth[lab] for lab in est.labels):.4f})" if truth else ""
    print(f"{'system':>10s}  {est.system_wide: .4f}{extra}  [{est.solver}]")


def _run_sweep(cfg, data, out) -> None:
    results = window_sweep(data, cfg.windows, cfg.settings(), cfg.jobs)
    dataio.write_sweep_csv(results, out / "sweep.csv")
    print("window_s  system_wide")
    for w, est in results:
        print(f"{w:8g}  {est.system_wide:.4f}")


def _run_leave_one_out(cfg, data, out) -> None:
    results = leave_each_out(data, cfg.window, cfg.settings(), cfg.jobs)
    dataio.write_leave_one_out_csv(results, out / "leave_one_out.csv")
    print("dropped     system_wide")
    for lab, est in results:
        print(f"{lab:10s}  {est.system_wide:.4f}")


def cmd_estimate(cfg: RunConfig, args) -> int:
    data, truth = _series(cfg, args)
    out = _out_dir(cfg)
    est = estimate_from_series(data, cfg.window, cfg.settings())
    dataio.write_estimate_csv(est, out / "estimate.csv", truth)
    write_manifest(cfg, out / "manifest.cfg")
    _print_estimate(est, truth)
    if args.sweep is not None:
        _run_sweep(cfg, data, out)
    if cfg.leave_one_out:
        _run_leave_one_out(cfg, data, out)
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    data, _ = _series(cfg, args)
    out = _out_dir(cfg)
    write_manifest(cfg, out / "manifest.cfg")
    _run_sweep(cfg, data, out)
    return 0


def cmd_leave_one_out(cfg: RunConfig, args) -> int:
    data, _ = _series(cfg, args)
    out = _out_dir(cfg)
    write_manifest(cfg, out / "manifest.cfg")
    _run_leave_one_out(cfg, data, out)
    return 0


def cmd_decompose(cfg: RunConfig, args) -> int:
    data, _ = _series(cfg, args)
    out = _out_dir(cfg)
    spec = decompose(data.window(cfg.window), cfg.settings())
    dataio.write_spectrum_csv(spec, out / "spectrum.csv")
    write_manifest(cfg, out / "manifest.cfg")
    print(f"{spec.order} modes; leading frequencies (Hz): "
          + ", ".join(f"{f:.3f}" for f in spec.frequency_hz[:6]))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "leave-one-out": cmd_leave_one_out,
    "decompose": cmd_decompose,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (InertiaToolError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"error: {type(exc).__name__}: {msg}\n")
    except OSError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc.strerror}: {exc.filename}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
