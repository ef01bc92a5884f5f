"""Command-line entry point: ``python -m drift_lab.main <command>``."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from drift_lab.config import reload_settings, settings
from drift_lab.config.sweep_config import load_config
from drift_lab.errors import ConfigError, DriftLabError
from drift_lab.numerics.selfsim import decay_fit_physical
from drift_lab.phase_lab import storage
from drift_lab.phase_lab.report import render_table, report
from drift_lab.phase_lab.sweep import run_single, run_sweep
from drift_lab.phase_lab.verify import SUITES, verify

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

logger = logging.getLogger(__name__)


def setup_logging(log_level: str):
    """Configure logging for the application."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="seed for random initial data")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int, help="worker processes")
    parser.add_argument("--grid-n", dest="grid_n", type=int, help="number of grid cells")
    parser.add_argument("--domain-L", dest="domain_L", type=float, help="domain half-width L")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drift-lab", description="Numerical lab for u_t + (b u^{k+1})_x = u_xx")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve the first cell of a config")
    run.add_argument("config", type=Path)
    _add_overrides(run)

    sweep = sub.add_parser("sweep", help="solve and classify every (p, k) cell of a config")
    sweep.add_argument("config", type=Path)
    sweep.add_argument("--no-resume", dest="resume", action="store_false", help="recompute finished cells")
    _add_overrides(sweep)

    check = sub.add_parser("verify", help="run property suites")
    check.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
    check.add_argument("--seed", type=int, help="corpus seed")

    fit = sub.add_parser("fit-decay", help="fit the sup-norm decay exponent of a series.csv")
    fit.add_argument("series", type=Path)
    fit.add_argument("--t-lo", dest="t_lo", type=float, help="window start (default from settings)")
    fit.add_argument("--t-hi", dest="t_hi", type=float, help="window end (default from settings)")

    rep = sub.add_parser("report", help="render the phase table of a run directory")
    rep.add_argument("run_dir", type=Path)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {name: getattr(args, name, None) for name in ("grid_n", "domain_L", "jobs", "seed", "out")}


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, **_overrides(args))
    cell = run_single(cfg)
    print(render_table([cell]))
    if cell.error:
        logger.error(f"Run failed: {cell.error}")
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, **_overrides(args))
    result = run_sweep(cfg, resume=args.resume)
    print(render_table(result.cells))
    if result.failed:
        logger.warning(f"{len(result.failed)} of {len(result.cells)} cells failed; see {result.out_dir}")
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    outcome = verify(args.suite, seed=args.seed)
    print(outcome.to_json())
    return EXIT_OK if outcome.passed else EXIT_VERIFY_FAILED


def _cmd_fit_decay(args: argparse.Namespace) -> int:
    series = storage.read_series(args.series)
    exponent = decay_fit_physical(series, args.t_lo, args.t_hi)
    print(json.dumps({"series": str(args.series), "decay_exponent": exponent}))
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    print(report(args.run_dir))
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "fit-decay": _cmd_fit_decay,
    "report": _cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    project_root = Path(__file__).resolve().parent.parent
    env_path = project_root / ".env"
    if load_dotenv(dotenv_path=env_path if env_path.exists() else None):
        reload_settings()

    args = build_parser().parse_args(argv)
    setup_logging(settings.log_level)

    if settings.metrics_enabled and settings.metrics_port:
        from prometheus_client import start_http_server

        start_http_server(settings.metrics_port)
        logger.info(f"Prometheus metrics on port {settings.metrics_port}")

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except DriftLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
