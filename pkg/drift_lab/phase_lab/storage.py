"""On-disk layout of runs and sweeps.

Every cell owns a directory ``<out>/<NNN>_<sanitized id>/`` holding
``config.toml``, ``series.csv`` and ``report.txt`` (plus ``entropy.csv`` and
``frames.csv`` when self-similar diagnostics were requested). The sweep root
gets a single ``index.csv`` once all cells are done. Nothing here records wall
time, so identical inputs give byte-identical files.
"""

import csv
import logging
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import tomli_w

from drift_lab.errors import ArtifactError
from drift_lab.numerics.pde_solver import SERIES_COLUMNS, Series

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SERIES_FILE = "series.csv"
REPORT_FILE = "report.txt"
CONFIG_FILE = "config.toml"
INDEX_FILE = "index.csv"
ENTROPY_FILE = "entropy.csv"
FRAMES_FILE = "frames.csv"

ENTROPY_COLUMNS = ("tau", "a", "eta", "lhs", "rhs", "margin")
FRAME_COLUMNS = ("tau", "t", "scale", "mass", "l2_squared", "sup", "l2_gap")
INDEX_COLUMNS = (
    "index",
    "cell_id",
    "case",
    "p",
    "k",
    "mass",
    "small_mass",
    "regime_expected",
    "classification_observed",
    "decay_exponent",
    "flags",
    "error",
    "dir",
)

_UNSAFE = re.compile(r"[^A-Za-z0-9.+-]+")


def cell_dir_name(index: int, cell_id: str) -> str:
    """``(3, "p=inf,k=1.5")`` -> ``"003_p-inf_k-1.5"``."""
    slug = _UNSAFE.sub("_", cell_id.replace("=", "-")).strip("_")
    return f"{index:03d}_{slug or 'cell'}"


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_rows(path: Path) -> Tuple[List[str], List[List[str]]]:
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ArtifactError(f"{path} is empty")
    return rows[0], rows[1:]


def write_series(path: PathLike, series: Series) -> Path:
    path = Path(path)
    write_rows(path, SERIES_COLUMNS, series.rows())
    return path


def read_series(path: PathLike) -> Series:
    """Parse a ``series.csv``.

    Raises:
        ArtifactError: missing file, wrong header or non-numeric cells.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    if tuple(header) != SERIES_COLUMNS:
        raise ArtifactError(f"{path}: unexpected header {header}")
    try:
        return Series.from_rows([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ArtifactError(f"{path}: {exc}") from exc


def write_report(path: PathLike, values: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {_fmt(values[key])}" for key in sorted(values)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_report(path: PathLike) -> Dict[str, str]:
    """Read ``key = value`` lines back as strings."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    values: Dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise ArtifactError(f"{path}: malformed line {line!r}")
        values[key.strip()] = value
    return values


def _strip_none(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _strip_none(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_strip_none(v) for v in value if v is not None]
    return value


def write_config(path: PathLike, data: Mapping[str, Any]) -> Path:
    """Dump the cell's effective config; TOML has no null so ``None`` entries are dropped."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        tomli_w.dump(_strip_none(dict(data)), f)
    return path


def write_index(path: PathLike, records: Sequence[Mapping[str, Any]]) -> Path:
    path = Path(path)
    ordered = sorted(records, key=lambda r: int(r["index"]))
    write_rows(path, INDEX_COLUMNS, ([r.get(col, "") for col in INDEX_COLUMNS] for r in ordered))
    return path


def read_index(path: PathLike) -> List[Dict[str, str]]:
    path = Path(path)
    header, rows = _read_rows(path)
    if tuple(header) != INDEX_COLUMNS:
        raise ArtifactError(f"{path}: unexpected header {header}")
    return [dict(zip(header, row)) for row in rows]


def write_entropy(path: PathLike, rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    write_rows(path, ENTROPY_COLUMNS, rows)
    return path


def write_frames(path: PathLike, rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    write_rows(path, FRAME_COLUMNS, rows)
    return path


def read_table(path: PathLike) -> Dict[str, List[float]]:
    """Column-oriented read of any numeric CSV written here."""
    path = Path(path)
    header, rows = _read_rows(path)
    try:
        columns = list(zip(*[[float(v) for v in row] for row in rows])) if rows else [()] * len(header)
    except ValueError as exc:
        raise ArtifactError(f"{path}: {exc}") from exc
    return {name: list(col) for name, col in zip(header, columns)}


def is_complete(cell_dir: PathLike) -> bool:
    """A cell is complete once its report exists and names a classification."""
    report = Path(cell_dir) / REPORT_FILE
    if not report.is_file() or not (Path(cell_dir) / SERIES_FILE).is_file():
        return False
    try:
        return "classification_observed" in read_report(report)
    except ArtifactError:
        logger.warning("Unreadable report in %s, cell will be recomputed", cell_dir)
        return False
