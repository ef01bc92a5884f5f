"""Run logger for phase cells.

One pipe-separated line per finished cell is appended to a dedicated file
(``logs/drift-lab-runs.log`` by default) for later auditing of sweeps.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from drift_lab.config.settings import settings

# Module logger for debugging
_logger = logging.getLogger(__name__)

_RUN_LOGGER_NAME = "drift_lab.runs"


def _get_run_logger(path: Optional[Union[str, Path]] = None) -> logging.Logger:
    """Get or create the run logger with a file handler on ``path``."""
    logger = logging.getLogger(_RUN_LOGGER_NAME)
    target = Path(path or settings.run_log_path).resolve()

    current = [h for h in logger.handlers if isinstance(h, logging.FileHandler)]
    if current and Path(current[0].baseFilename) == target:
        return logger
    for handler in current:
        logger.removeHandler(handler)
        handler.close()

    logger.setLevel(logging.INFO)
    target.parent.mkdir(parents=True, exist_ok=True)

    handler = logging.FileHandler(target)
    handler.setLevel(logging.INFO)

    # Format: timestamp | cell | p | k | regime | classification | exponent | elapsed_ms | status
    handler.setFormatter(logging.Formatter("%(asctime)s | %(message)s"))
    logger.addHandler(handler)

    # Prevent propagation to root logger
    logger.propagate = False
    return logger


def log_cell(
    cell: str,
    p: float,
    k: float,
    regime: str,
    classification: str,
    exponent: Optional[float],
    elapsed_ms: float,
    error: Optional[str] = None,
    path: Optional[Union[str, Path]] = None,
) -> None:
    """Append one finished cell to the run log.

    Args:
        cell: Cell identifier, e.g. ``"p=3,k=1.1667"``.
        p: Integrability exponent.
        k: Nonlinearity exponent.
        regime: Expected regime from the critical exponent.
        classification: Observed classification.
        exponent: Fitted sup-norm decay exponent, if any.
        elapsed_ms: Wall time of the cell.
        error: Error message when the cell failed.
        path: Log file; defaults to ``settings.run_log_path``.
    """
    logger = _get_run_logger(path)
    status = "OK" if error is None else "ERROR"
    exp = "-" if exponent is None else f"{exponent:.4f}"
    line = f"{cell} | {p:g} | {k:g} | {regime} | {classification} | {exp} | {elapsed_ms:.0f}ms | {status}"
    if error:
        line += f" | error:{error[:200]}"
    logger.info(line)


def summarize_run_log(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Count logged cells by classification and status.

    Returns:
        Dictionary with ``total``, ``errors``, ``by_classification`` and
        ``by_regime`` counts; ``error`` is set when the file cannot be read.
    """
    log_file = Path(path or settings.run_log_path)
    summary: Dict[str, Any] = {"total": 0, "errors": 0, "by_classification": {}, "by_regime": {}}
    if not log_file.exists():
        return summary

    try:
        with open(log_file, "r") as f:
            for line in f:
                parts = [part.strip() for part in line.rstrip("\n").split(" | ")]
                if len(parts) < 9:
                    _logger.debug("Malformed run log line, skipping: %s", line.strip())
                    continue
                regime, classification, status = parts[4], parts[5], parts[8]
                summary["total"] += 1
                if status == "ERROR":
                    summary["errors"] += 1
                by_class = summary["by_classification"]
                by_class[classification] = by_class.get(classification, 0) + 1
                by_regime = summary["by_regime"]
                by_regime[regime] = by_regime.get(regime, 0) + 1
    except OSError as e:
        summary["error"] = str(e)

    return summary
