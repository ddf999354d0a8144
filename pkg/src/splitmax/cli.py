"""Command-line entry point: ``splitmax convergence|energy|divergence|audit``.

Exit status doubles as the acceptance gate: 0 when the study meets its
criterion, 1 when it runs but misses it, 2 on configuration or statistics
errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .analysis import convergence_study, default_workers, divergence_study, energy_series
from .audit import format_report, run_audit
from .config import ExperimentConfig
from .errors import SplitmaxError
from .grid import GridSpec
from .plots import CONVERGENCE, DIVERGENCE, ENERGY, emit_plots, render_png, write_csv
from .subflows import SchemeKind

log = logging.getLogger("splitmax")

EXIT_OK, EXIT_GATE, EXIT_ERROR = 0, 1, 2


def _outputs(csv_path: Path) -> list[Path]:
    return [csv_path, *emit_plots([csv_path]), render_png(csv_path)]


def cmd_convergence(cfg: ExperimentConfig, out: Path, workers: int) -> tuple[int, list[Path]]:
    reports = convergence_study(cfg.setup(), cfg.scheme, cfg.taus, cfg.tau_ref, cfg.samples, workers)
    rep = reports[cfg.scheme]
    path = write_csv(out / f"convergence_{rep.scheme.value}.csv", CONVERGENCE, rep.rows())
    log.info("fitted order p = %.4f (residual %.3g, M = %d)", rep.order, rep.residual, rep.samples)
    if not rep.passed:
        print(f"fitted order {rep.order:.4f} outside [0.85, 1.15]", file=sys.stderr)
    return (EXIT_OK if rep.passed else EXIT_GATE), _outputs(path)


def cmd_energy(cfg: ExperimentConfig, out: Path, workers: int) -> tuple[int, list[Path]]:
    if cfg.scheme is not SchemeKind.EXACT:
        print(
            f"energy study requires scheme 'exact' (got '{cfg.scheme.value}'); "
            "the linear energy law is exact only for the exact-flow splitting. "
            "Use 'splitmax convergence' for this scheme.",
            file=sys.stderr,
        )
        return EXIT_ERROR, []
    series = energy_series(cfg.setup(), cfg.steps, cfg.samples, workers=workers)
    rows = zip(series.times, series.mean, series.stderr, series.predicted)
    path = write_csv(out / "energy.csv", ENERGY, rows)
    bad = series.offending()
    if bad:
        ts = ", ".join("%.6g" % series.times[i] for i in bad)
        print(f"energy outside the 4-stderr band at t = {ts}", file=sys.stderr)
    return (EXIT_GATE if bad else EXIT_OK), _outputs(path)


def cmd_divergence(cfg: ExperimentConfig, out: Path, workers: int) -> tuple[int, list[Path]]:
    series = divergence_study(cfg.setup(), cfg.divergence_tau, cfg.samples, cfg.scheme, workers)
    path = write_csv(out / "divergence.csv", DIVERGENCE, zip(series.times, series.coarse, series.fine))
    log.info("final residual ratio %.4f", series.final_ratio)
    if not series.passed:
        print(f"divergence residual ratio {series.final_ratio:.4f} < 1.7", file=sys.stderr)
    return (EXIT_OK if series.passed else EXIT_GATE), _outputs(path)


def cmd_audit(cfg: ExperimentConfig, out: Path, workers: int) -> tuple[int, list[Path]]:
    grid = GridSpec(cfg.cuboid, 4, 4, 4)
    lines = run_audit(grid)
    path = out / "audit.txt"
    path.write_text(format_report(lines), encoding="utf-8")
    failed = [ln.tag for ln in lines if not ln.passed]
    for tag in failed:
        print(f"audit breach: {tag}", file=sys.stderr)
    return (EXIT_GATE if failed else EXIT_OK), [path]


COMMANDS = {
    "convergence": cmd_convergence,
    "energy": cmd_energy,
    "divergence": cmd_divergence,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitmax", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"splitmax {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="TOML experiment file (defaults if omitted)")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--workers", type=int, help="sample worker processes (env SPLITMAX_WORKERS)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = time.time()
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict()
        workers = args.workers if args.workers is not None else default_workers()
        out = args.out or cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        code, files = COMMANDS[args.command](cfg, out, max(1, workers))
    except SplitmaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    manifest = {
        "command": args.command,
        "config_hash": cfg.hash(),
        "version": __version__,
        "wall_clock_s": round(time.time() - started, 3),
        "exit_code": code,
        "outputs": [f.name for f in files],
    }
    path = out / f"manifest_{args.command}.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
