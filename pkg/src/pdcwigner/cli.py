"""Command-line entry point: ``pdcwigner <subcommand> [--config FILE] [--set key=value ...]``."""
from __future__ import annotations

import argparse
import csv
import io
import os
import platform
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bell import CH_ANGLES, CHSH_ANGLES, BellSetup, chsh, clauser_horne, coincidence_scan, default_angle_pairs
from .config import ConfigError, RunConfig, ValidationError, format_config, load_config, validate
from .correlations import analytic_cross, jackknife_mean
from .crystal import transform
from .detection import joint_rate_direct, singles_rate, window_components
from .fields import assemble_field
from .modes import Sector
from .vacuum import sample_vacuum

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_VALIDATION = 4
EXIT_RUNTIME = 5

SUBCOMMANDS = ("validate", "correlate", "detect", "bell", "scan", "dump-grid")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_outputs(out_dir, files: dict[str, str]) -> None:
    """Write every file to a temporary name first, then rename into place."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, dest in staged:
        os.replace(tmp, dest)


def manifest_text(cfg: RunConfig, subcommand: str, wall_time: float, outputs) -> str:
    """Resolved config preceded by comment metadata; loadable again with ``--config``."""
    head = [
        "# pdcwigner run manifest",
        f"# subcommand: {subcommand}",
        f"# outputs: {', '.join(outputs)}",
        f"# pdcwigner {__version__}, numpy {np.__version__}, python {platform.python_version()}",
        f"# wall_time_s: {wall_time:.3f}",
    ]
    return "\n".join(head) + "\n" + format_config(cfg.values)


def _ensemble(cfg: RunConfig, grid, params):
    vac = sample_vacuum(grid, cfg["run.realizations"], cfg["run.seed"], workers=cfg["run.workers"],
                        chunk_size=cfg["run.chunk_size"])
    return transform(vac, params, grid)


def run_correlate(cfg: RunConfig) -> dict[str, str]:
    grid, params = cfg.grid(), cfg.crystal()
    out = _ensemble(cfg, grid, params)
    tc, _ = cfg.sample_step(grid, params)
    taus = np.arange(cfg["correlate.points"]) * cfg["correlate.step_corr_times"] * tc
    fe = assemble_field(out, Sector.E, 0.0, 0.0)
    fo = assemble_field(out, Sector.O, 0.0, taus)
    mean, err = jackknife_mean(fe[:, None] * fo)
    rows = []
    for tau, m, e in zip(taus, mean, err):
        a = analytic_cross(grid, params, tau, tmap=out.tmap)
        rows.append((tau, m.real, m.imag, e, a.real, a.imag))
    return {"correlations.csv": csv_text(["tau", "re_mc", "im_mc", "stderr", "re_analytic", "im_analytic"], rows)}


def run_detect(cfg: RunConfig) -> dict[str, str]:
    grid, params = cfg.grid(), cfg.crystal()
    out = _ensemble(cfg, grid, params)
    phi = cfg["detect.angle"]
    workers = cfg["run.workers"]
    rows = []
    for n_corr in cfg["detect.windows_corr_times"]:
        det1, det2 = (d.at_angle(phi) for d in cfg.detectors(grid, params, n_corr))
        c1 = window_components(out, det1.probe, workers=workers)
        c2 = window_components(out, det2.probe, cfg["detector.delay"], workers=workers)
        for label, rep in (("singles_1", singles_rate(out, det1, components=c1)),
                           ("singles_2", singles_rate(out, det2, components=c2)),
                           ("joint", joint_rate_direct(out, det1, det2, cfg["detector.delay"],
                                                       components=(c1, c2)))):
            rows.append((label, n_corr, rep.standard, rep.clipped, rep.stderr, rep.negative_window_fraction))
    header = ["quantity", "window_corr_times", "standard", "clipped", "stderr", "negative_fraction"]
    return {"rates.csv": csv_text(header, rows)}


def _setup(cfg: RunConfig, engine: str) -> BellSetup:
    grid, params = cfg.grid(), cfg.crystal()
    det1, det2 = cfg.detectors(grid, params)
    out = None if engine == "gaussian" else _ensemble(cfg, grid, params)
    return BellSetup(grid, params, det1, det2, cfg["detector.delay"], out, cfg["run.workers"])


def _scan_files(setup: BellSetup, steps: int, engine: str) -> dict[str, str]:
    scan = coincidence_scan(setup, default_angle_pairs(steps), engine)
    rows = [(p[0], p[1], r, e, f, r - f)
            for p, r, e, f in zip(scan.pairs, scan.rates, scan.stderr, scan.fitted)]
    summary = [("engine", engine), ("amplitude_K", scan.amplitude), ("offset", scan.offset),
               ("visibility", scan.visibility), ("relative_residual", scan.relative_residual),
               ("pairs", len(rows))]
    return {"scan.csv": csv_text(["phi1", "phi2", "rate", "stderr", "fit", "residual"], rows),
            "scan_summary.txt": "".join(f"{k} = {_fmt(v)}\n" for k, v in summary)}


def run_scan(cfg: RunConfig) -> dict[str, str]:
    engine = cfg["scan.engine"]
    return _scan_files(_setup(cfg, engine), cfg["scan.steps"], engine)


def run_bell(cfg: RunConfig) -> dict[str, str]:
    engine = cfg["bell.engine"]
    setup = _setup(cfg, engine)
    files = _scan_files(setup, cfg["scan.steps"], engine) if cfg["bell.scan"] else {}
    gauss = BellSetup(setup.grid, setup.params, setup.det1, setup.det2, setup.tau)
    lines = []

    def section(name, report):
        lines.extend(f"{name}.{k} = {_fmt(v)}\n" for k, v in report.items())

    section("chsh.gaussian", chsh(gauss, *CHSH_ANGLES, engine="gaussian"))
    if engine != "gaussian":
        section(f"chsh.{engine}", chsh(setup, *CHSH_ANGLES, engine=engine))
    for eta in cfg["bell.efficiencies"]:
        section(f"ch.{engine}.eta={eta!r}", clauser_horne(setup, *CH_ANGLES, engine=engine, efficiency=eta))
    files["bell_report.txt"] = "".join(lines)
    return files


def run_dump_grid(cfg: RunConfig) -> dict[str, str]:
    return {"grid.csv": cfg.grid().to_csv()}


PIPELINES = {"correlate": run_correlate, "detect": run_detect, "scan": run_scan,
             "bell": run_bell, "dump-grid": run_dump_grid}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdcwigner",
                                     description="Stochastic-field simulation of type-II down-conversion.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--seed", type=int, help="master seed (same as --set run.seed=N)")
        p.add_argument("--workers", type=int, help="worker threads (same as --set run.workers=N)")
        p.add_argument("--out", help="output directory (same as --set run.out=DIR)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    for key, val in (("run.seed", args.seed), ("run.workers", args.workers), ("run.out", args.out)):
        if val is not None:
            overrides.append(f"{key}={val}")

    try:
        if args.command == "validate":
            diags = validate(load_config(args.config, overrides))
            for d in diags:
                print(d)
            return EXIT_VALIDATION if any(d.severity == "error" for d in diags) else EXIT_OK
        cfg = RunConfig.load(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_VALIDATION

    for d in validate(cfg.values):
        print(d, file=sys.stderr)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # ceiling warnings were already reported above
            files = PIPELINES[args.command](cfg)
        files["manifest.txt"] = manifest_text(cfg, args.command, time.perf_counter() - start, sorted(files))
        write_outputs(cfg["run.out"], files)
    except Exception as exc:  # noqa: BLE001 - report any pipeline failure as a runtime error
        print(f"runtime error in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name in sorted(files):
        print(Path(cfg["run.out"]) / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
