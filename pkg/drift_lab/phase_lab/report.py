"""Human-readable summaries of run directories."""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from drift_lab.config.sweep_config import REGIMES, format_exponent
from drift_lab.errors import ArtifactError
from drift_lab.phase_lab import storage
from drift_lab.phase_lab.classify import PhaseCell

logger = logging.getLogger(__name__)

PHASE_TABLE_CSV = "phase_table.csv"
PHASE_TABLE_TXT = "phase_table.txt"
PHASE_TABLE_COLUMNS = ("p", "regime", "k", "mass", "classification", "decay_exponent", "expected", "error")

_SHORT = {
    "global_nondecay": "global",
    "global_decay": "decay",
    "blow_up": "blow-up",
    "inconclusive": "?",
}


def load_run_dir(run_dir: Union[str, Path]) -> List[PhaseCell]:
    """Cells of a sweep directory, a directory of cell directories or a single cell directory.

    Raises:
        ArtifactError: the directory does not exist or holds no readable cell.
    """
    from drift_lab.phase_lab.sweep import load_cell

    root = Path(run_dir)
    if not root.is_dir():
        raise ArtifactError(f"run directory not found: {root}")
    index = root / storage.INDEX_FILE
    if index.is_file():
        cells = [PhaseCell.from_dict(row) for row in storage.read_index(index)]
    elif (root / storage.REPORT_FILE).is_file():
        cells = [load_cell(root)]
    else:
        cells = [load_cell(d) for d in sorted(root.iterdir()) if (d / storage.REPORT_FILE).is_file()]
    if not cells:
        raise ArtifactError(f"no cell reports under {root}")
    return sorted(cells, key=lambda c: c.index)


def _exponent_text(value: Optional[float]) -> str:
    return "-" if value is None or not math.isfinite(value) else f"{value:+.3f}"


def _entry(cell: PhaseCell) -> str:
    text = _SHORT[cell.classification_observed.value]
    if cell.decay_exponent is not None:
        text += f" ({_exponent_text(cell.decay_exponent)})"
    if cell.error:
        text += " !"
    return text


def render_table(cells: Sequence[PhaseCell]) -> str:
    """Aligned p-by-regime matrix; several cells in one slot are joined with ``/``."""
    rows: Dict[float, Dict[str, List[str]]] = {}
    for cell in cells:
        rows.setdefault(cell.p, {r: [] for r in REGIMES})[cell.regime_expected.value].append(_entry(cell))
    header = ["p"] + list(REGIMES)
    body = [
        [format_exponent(p)] + [" / ".join(slots[r]) or "-" for r in REGIMES]
        for p, slots in sorted(rows.items(), key=lambda item: item[0])
    ]
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]

    def fmt(line: Sequence[str]) -> str:
        return "  ".join(text.ljust(width) for text, width in zip(line, widths)).rstrip()

    rule = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(line) for line in body])


def render_cells(cells: Sequence[PhaseCell]) -> str:
    """One line per cell with the fitted exponent and any error."""
    lines = []
    for cell in cells:
        mark = "ok" if cell.matches_expectation else "differs"
        line = (
            f"{cell.cell_id:<28} {cell.regime_expected.value:<13} {cell.classification_observed.value:<16}"
            f" exponent={_exponent_text(cell.decay_exponent)} {mark}"
        )
        if cell.flags:
            line += f" flags={','.join(cell.flags)}"
        if cell.error:
            line += f" error={cell.error}"
        lines.append(line)
    return "\n".join(lines)


def _table_rows(cells: Sequence[PhaseCell]) -> List[Tuple[object, ...]]:
    return [
        (
            format_exponent(c.p),
            c.regime_expected.value,
            c.k,
            c.mass,
            c.classification_observed.value,
            "" if c.decay_exponent is None else c.decay_exponent,
            int(c.matches_expectation),
            c.error or "",
        )
        for c in cells
    ]


def write_phase_table(run_dir: Union[str, Path], cells: Sequence[PhaseCell]) -> Path:
    """Write ``phase_table.csv`` and the aligned ``phase_table.txt``."""
    root = Path(run_dir)
    path = root / PHASE_TABLE_CSV
    storage.write_rows(path, PHASE_TABLE_COLUMNS, _table_rows(cells))
    (root / PHASE_TABLE_TXT).write_text(render_table(cells) + "\n")
    return path


def report(run_dir: Union[str, Path]) -> str:
    """Render a run directory and refresh its companion tables."""
    cells = load_run_dir(run_dir)
    write_phase_table(run_dir, cells)
    logger.info(f"Rendered {len(cells)} cells from {run_dir}")
    return render_table(cells) + "\n\n" + render_cells(cells)
