"""
Command-line entry point.

    heliotrack simulate        --config FILE --out LOG.csv [--metrics FILE]
    heliotrack sweep           --config FILE --grid GRID.yaml --out DIR [--workers N]
    heliotrack solar           [--site lat,lon,utc] [--date YYYY-MM-DD] [--time HH:MM[:SS]] [--out REF.csv]
    heliotrack energy          [--site lat,lon,utc] [--date YYYY-MM-DD] [--strategy S ...]
    heliotrack validate-config --config FILE

Exit status is 0 on success, 1 for a configuration error, 2 when a
simulation or computation fails and 3 for file-system errors. Files are
written to a temporary name next to the target and renamed into place.
Set ``HELIOTRACK_LOG`` (DEBUG, INFO, WARNING, ...) for diagnostics on stderr.
"""
import argparse
import contextlib
from datetime import datetime, time, timedelta
import io
import logging
import os
import sys
import tempfile

import numpy as np
import yaml

from .config import ConfigError, SimConfig, dump_config, load_config
from .energy import PanelOrientation, ratio_table
from .motor import DomainError
from .sim import (SimulationError, compute_metrics, default_workers, grid_points,
                  metrics_to_text, run_simulation, sweep, sweep_table)
from .sun import Site, day_angles, parse_date, reference_profile, solar_position

log = logging.getLogger("heliotrack")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

DEFAULT_SITE = "35.8,10.6,1"


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    """Yield a file handle whose content replaces ``path`` only on success."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _config(path):
    return SimConfig() if path is None else load_config(path)


def _say(args, text):
    if not args.quiet:
        sys.stdout.write(text)


def cmd_simulate(args):
    cfg = _config(args.config)
    sim_log = run_simulation(cfg)
    metrics_text = metrics_to_text(compute_metrics(sim_log))
    if args.out:
        with atomic_write(args.out) as fh:
            sim_log.to_csv(fh)
        log.info("wrote %d samples to %s", len(sim_log.t), args.out)
    if args.metrics:
        with atomic_write(args.metrics) as fh:
            fh.write(metrics_text)
    _say(args, metrics_text)
    return EXIT_OK


def _load_grid(path):
    try:
        with open(path) as fh:
            grid = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"grid: file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"grid: cannot parse {path}: {exc}") from None
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid: expected a non-empty mapping of dotted.path -> [values]")
    return grid


def cmd_sweep(args):
    cfg = _config(args.config)
    grid = _load_grid(args.grid)
    # validate every point up front so a typo is a config error, not N failed rows
    try:
        points = grid_points(grid)
    except DomainError as exc:
        raise ConfigError(f"grid: {exc}") from None
    for p in points:
        cfg.with_overrides(p)
    rows = sweep(cfg, grid, workers=args.workers or default_workers())
    header, table = sweep_table(rows)
    os.makedirs(args.out, exist_ok=True)
    target = os.path.join(args.out, "sweep.csv")
    with atomic_write(target) as fh:
        fh.write(",".join(header) + "\n")
        for r in table:
            fh.write(",".join(_csv_field(v) for v in r) + "\n")
    failed = sum(1 for r in rows if r["error"])
    _say(args, f"{len(rows)} runs, {failed} failed, table in {target}\n")
    return EXIT_OK


def _csv_field(v):
    return f'"{v}"' if ("," in v or '"' in v) else v


def _parse_time(text):
    try:
        return time.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"time: expected HH:MM[:SS], got {text!r}") from None


def cmd_solar(args):
    site = Site.parse(args.site)
    day = parse_date(args.date)
    if args.time:
        local = datetime.combine(day, _parse_time(args.time))
        az, el = solar_position(local - timedelta(hours=site.utc_offset), site)
        _say(args, f"azimuth_deg = {az!r}\nelevation_deg = {el!r}\n")
    else:
        t, az, el = day_angles(day, site, args.step)
        out = io.StringIO()
        out.write("local_time_s,azimuth_deg,elevation_deg\n")
        np.savetxt(out, np.column_stack([t, az, el]), fmt="%.17g", delimiter=",")
        _say(args, out.getvalue())
    if args.out:
        prof = reference_profile(day, site, args.sample_dt)
        with atomic_write(args.out) as fh:
            prof.to_csv(fh)
    return EXIT_OK


def cmd_energy(args):
    site = Site.parse(args.site)
    day = parse_date(args.date)
    names = args.strategy or ["horizontal", f"tilted:{abs(site.latitude):g}:"
                              f"{180 if site.latitude >= 0 else 0}", "tracked"]
    strategies = [PanelOrientation.parse(s) for s in names]
    rows = ratio_table(site, day, strategies, args.dt)
    out = ["strategy,full_sun_hours,ratio_to_horizontal"]
    out += [f"{label},{energy / 3600.0!r},{ratio!r}" for label, energy, ratio in rows]
    _say(args, "\n".join(out) + "\n")
    return EXIT_OK


def cmd_validate(args):
    cfg = load_config(args.config)
    _say(args, dump_config(cfg))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    p = argparse.ArgumentParser(prog="heliotrack", description="Sun-tracker simulation tools.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one closed-loop simulation")
    s.add_argument("--config", help="YAML config (defaults when omitted)")
    s.add_argument("--out", help="CSV log to write")
    s.add_argument("--metrics", help="also write the metrics text here")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common], help="run a parameter grid")
    s.add_argument("--config", help="base YAML config")
    s.add_argument("--grid", required=True, help="YAML mapping dotted.path -> list")
    s.add_argument("--out", required=True, help="output directory (gets sweep.csv)")
    s.add_argument("--workers", type=int, default=0, help="processes (default: auto)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("solar", parents=[common], help="sun position for a site and day")
    s.add_argument("--site", default=DEFAULT_SITE, help="lat,lon,utc_offset")
    s.add_argument("--date", default="2024-06-21")
    s.add_argument("--time", help="local clock time; prints a single position")
    s.add_argument("--step", type=float, default=3600.0, help="table step (s)")
    s.add_argument("--out", help="write the axis reference profile CSV here")
    s.add_argument("--sample-dt", type=float, default=1.0, help="reference sample step (s)")
    s.set_defaults(func=cmd_solar)

    s = sub.add_parser("energy", parents=[common], help="daily energy ratio per panel strategy")
    s.add_argument("--site", default=DEFAULT_SITE, help="lat,lon,utc_offset")
    s.add_argument("--date", default="2024-06-21")
    s.add_argument("--strategy", action="append",
                   help="horizontal, tracked or tilted:<tilt>:<azimuth>; repeatable")
    s.add_argument("--dt", type=float, default=60.0, help="integration step (s)")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("validate-config", parents=[common],
                       help="check a config and echo it with defaults filled in")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_validate)
    return p


def _log_level():
    name = os.environ.get("HELIOTRACK_LOG", "WARNING").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING


def main(argv=None):
    logging.basicConfig(level=_log_level(), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
