"""(p, k) sweeps: build, solve, classify and persist every cell.

Cells are independent. With ``jobs > 1`` they are dispatched to a process
pool; each worker writes only its own cell directory and the sweep index is
written once by the parent after all cells are back.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from drift_lab.config.settings import settings
from drift_lab.config.sweep_config import CellSpec, SweepConfig, format_exponent
from drift_lab.errors import ConfigError, DriftLabError, RescalingError
from drift_lab.numerics.drift_lib import (
    StationaryProfile,
    drift_from_config,
    stationary_pair_con1,
    stationary_pair_con2,
)
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.pde_solver import RunConfig, RunReport, Series, solve
from drift_lab.numerics.selfsim import (
    admissible_level,
    entropy_budget,
    entropy_series,
    frames_from_snapshots,
    l2_decay_fit,
)
from drift_lab.phase_lab import storage
from drift_lab.phase_lab.classify import PhaseCell, PhaseClass, Regime, classify_report
from drift_lab.telemetry import metrics
from drift_lab.telemetry.run_logger import log_cell

logger = logging.getLogger(__name__)

INITIAL_SHAPES = ("gaussian", "indicator", "stationary", "random_bumps")


class InjectedFailure(RuntimeError):
    """Raised inside the worker for cells listed under ``[inject] fail_cells``."""


def _stationary_profile(cell: CellSpec) -> StationaryProfile:
    builder = stationary_pair_con2 if cell.case == "con2" else stationary_pair_con1
    p = cell.drift.get("p", cell.p)
    p = math.inf if isinstance(p, str) else float(p)
    return builder(p, float(cell.drift.get("k", cell.k)))[0]


def initial_condition(cell: CellSpec, grid: Grid, seed: int) -> Field:
    """Nonnegative ``u0`` from the cell's ``[initial]`` table, normalised to ``cell.mass``.

    With ``normalize = false`` the shape is used as sampled; a stationary profile
    is only stationary at its own amplitude.

    Shapes: ``gaussian`` (``sigma``, ``center``), ``indicator`` (``width``),
    ``stationary`` (the profile paired with a stationary drift) and
    ``random_bumps`` (``count`` Gaussians of width ``sigma`` drawn from ``seed``).
    """
    section = cell.initial
    shape = section.get("shape", "gaussian")
    x = grid.centers
    if shape == "gaussian":
        sigma = float(section.get("sigma", 1.0))
        values = np.exp(-0.5 * ((x - float(section.get("center", 0.0))) / sigma) ** 2)
    elif shape == "indicator":
        values = (np.abs(x) <= 0.5 * float(section.get("width", 1.0))).astype(float)
    elif shape == "stationary":
        values = _stationary_profile(cell).values(x)
    elif shape == "random_bumps":
        rng = np.random.default_rng(seed + cell.index)
        count = int(section.get("count", 5))
        sigma = float(section.get("sigma", 0.5))
        spread = float(section.get("spread", 0.25 * grid.half_width))
        centers = rng.uniform(-spread, spread, size=count)
        weights = rng.uniform(0.5, 1.5, size=count)
        values = np.zeros_like(x)
        for c, w in zip(centers, weights):
            values += w * np.exp(-0.5 * ((x - c) / sigma) ** 2)
    else:
        raise ConfigError(f"unknown initial shape {shape!r}, expected one of {INITIAL_SHAPES}")
    total = float(np.sum(values) * grid.dx)
    if not total > 0:
        raise ConfigError(f"initial shape {shape!r} has no mass on the grid")
    if not section.get("normalize", True):
        return Field(grid, values)
    return Field(grid, values * (cell.mass / total))


def build_run(cell: CellSpec, cfg: SweepConfig) -> RunConfig:
    """Instantiate the solver config of one cell."""
    opts = cfg.solver
    grid = Grid(opts.domain_half_width, opts.grid_n)
    drift = drift_from_config(cell.drift, grid, cell.k, cell.p)
    u0 = initial_condition(cell, grid, cfg.seed)
    sup = u0.sup()
    snapshot_times = cfg.selfsim.times() if cfg.selfsim is not None else ()
    return RunConfig(
        k=cell.k,
        drift=drift,
        u0=u0,
        t_max=opts.t_max,
        blowup_threshold=opts.blowup_factor * sup if sup > 0 else math.inf,
        dt_floor=opts.dt_floor,
        diagnostics_stride=opts.diagnostics_stride,
        cfl=opts.cfl,
        dt_max=opts.dt_max,
        theta=opts.theta,
        snapshot_times=snapshot_times,
    )


def cell_config(cell: CellSpec, cfg: SweepConfig) -> Dict[str, Any]:
    """Self-contained TOML document that re-runs exactly this cell."""
    solver = asdict(cfg.solver)
    solver["domain_L"] = solver.pop("domain_half_width")
    data: Dict[str, Any] = {
        "sweep": {
            "name": cfg.name,
            "case": cell.case,
            "p_list": [format_exponent(cell.p)],
            "k_list": [cell.k],
            "mass_list": [cell.mass],
            "seed": cfg.seed,
        },
        "drift": dict(cell.drift),
        "initial": dict(cell.initial),
        "solver": solver,
        "classify": {key: list(v) if isinstance(v, tuple) else v for key, v in asdict(cfg.classify).items()},
    }
    if cfg.selfsim is not None:
        selfsim = asdict(cfg.selfsim)
        data["selfsim"] = {key: list(v) if isinstance(v, tuple) else v for key, v in selfsim.items()}
    return data


def export_selfsim(report: RunReport, run: RunConfig, cfg: SweepConfig, cell_dir: Path) -> Dict[str, Any]:
    """Write ``frames.csv`` (and ``entropy.csv`` when levels are configured)."""
    opts = cfg.selfsim
    if opts is None:
        return {}
    y_grid = Grid(opts.y_half_width, opts.y_cells)
    frames = frames_from_snapshots(report.snapshots, opts.T, y_grid, run.drift, run.k)
    rows = []
    for (t, u), frame in zip([s for s in report.snapshots if s[0] < opts.T], frames):
        v = frame.v.values
        dy = y_grid.dx
        l2_sq = float(np.sum(v**2) * dy)
        physical = frame.scale * float(np.sum(u.values**2) * u.grid.dx)
        gap = abs(l2_sq - physical) / physical if physical > 0 else 0.0
        rows.append((frame.tau, t, frame.scale, float(np.sum(v) * dy), l2_sq, frame.v.sup(), gap))
    storage.write_frames(cell_dir / storage.FRAMES_FILE, rows)
    extra: Dict[str, Any] = {"selfsim_frames": len(frames)}
    if len(frames) >= 3 and all(f.v.sup() > 0 for f in frames):
        extra["selfsim_l2_slope"] = l2_decay_fit(frames)
    if opts.levels and len(frames) >= 3:
        try:
            level = admissible_level(frames, opts.levels)
            a = level if level is not None else min(opts.levels)
            storage.write_entropy(cell_dir / storage.ENTROPY_FILE, (d.to_row() for d in entropy_series(frames, a)))
            extra["selfsim_level"] = a
            extra["selfsim_level_admissible"] = level is not None
            extra["selfsim_entropy_budget"] = entropy_budget(frames, a)
        except ConfigError as exc:
            logger.warning(f"Entropy diagnostics skipped for {cell_dir.name}: {exc}")
    return extra


def run_cell(cell: CellSpec, cfg: SweepConfig, out_dir: str) -> PhaseCell:
    """Solve, classify and persist one cell; never raises.

    Any failure (including an injected one) yields an ``inconclusive`` cell
    carrying the error message, with its report still written.
    """
    name = storage.cell_dir_name(cell.index, cell.cell_id)
    cell_dir = Path(out_dir) / name
    cell_dir.mkdir(parents=True, exist_ok=True)
    phase = PhaseCell(
        cell_id=cell.cell_id,
        p=cell.p,
        k=cell.k,
        regime_expected=Regime(cell.regime),
        classification_observed=PhaseClass.INCONCLUSIVE,
        mass=cell.mass,
        small_mass=cell.mass <= cfg.classify.small_mass,
        case=cell.case,
        artifacts={"dir": name},
        index=cell.index,
    )
    extra: Dict[str, Any] = {}
    try:
        storage.write_config(cell_dir / storage.CONFIG_FILE, cell_config(cell, cfg))
        if cell.cell_id in cfg.fail_cells:
            raise InjectedFailure(f"injected failure for cell {cell.cell_id}")
        run = build_run(cell, cfg)
        report = solve(run)
        storage.write_series(cell_dir / storage.SERIES_FILE, report.series)
        phase.classification_observed, phase.decay_exponent = classify_report(report, cfg.classify)
        phase.flags = report.flags
        extra.update(report.summary())
        if report.snapshots:
            try:
                extra.update(export_selfsim(report, run, cfg, cell_dir))
            except RescalingError as exc:
                logger.warning(f"Self-similar export skipped for {cell.cell_id}: {exc}")
                phase.flags = phase.flags + ("selfsim_skipped",)
    except Exception as exc:  # one bad cell must not abort the sweep
        kind = "error" if isinstance(exc, DriftLabError) else "crash"
        phase.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        logger.error(f"Cell {cell.cell_id} failed ({kind}): {phase.error}")
        if not (cell_dir / storage.SERIES_FILE).exists():
            storage.write_series(cell_dir / storage.SERIES_FILE, Series.from_rows([]))
    values = {key: value for key, value in extra.items() if key not in ("flags",)}
    values.update({key: value for key, value in phase.to_dict().items() if key != "dir"})
    storage.write_report(cell_dir / storage.REPORT_FILE, values)
    return phase


def load_cell(cell_dir: Path) -> PhaseCell:
    """Re-read a finished cell from its ``report.txt``."""
    values: Dict[str, Any] = dict(storage.read_report(cell_dir / storage.REPORT_FILE))
    values["dir"] = cell_dir.name
    return PhaseCell.from_dict(values)


@dataclass
class SweepResult:
    """Cells of one sweep in index order."""

    cells: List[PhaseCell]
    out_dir: Path
    resumed: int = 0
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def failed(self) -> List[PhaseCell]:
        return [c for c in self.cells if c.error]


class SweepRunner:
    """Dispatch the cells of a :class:`SweepConfig` and collect the phase matrix."""

    def __init__(self, cfg: SweepConfig, out_dir: Optional[str] = None, resume: bool = True):
        self.cfg = cfg
        self.out_dir = Path(out_dir or cfg.output_dir)
        self.resume = resume
        self.stats = {"total": 0, "solved": 0, "resumed": 0, "failed": 0}
        self.logger = logging.getLogger("[lab] SweepRunner")

    def _pending(self, cells: List[CellSpec]) -> Mapping[int, Optional[PhaseCell]]:
        done: Dict[int, Optional[PhaseCell]] = {}
        for cell in cells:
            cell_dir = self.out_dir / storage.cell_dir_name(cell.index, cell.cell_id)
            previous = None
            if self.resume and storage.is_complete(cell_dir):
                try:
                    previous = load_cell(cell_dir)
                except DriftLabError as exc:
                    self.logger.warning(f"Cannot reuse {cell_dir.name}: {exc}")
                if previous is not None and previous.error:
                    previous = None
            done[cell.index] = previous
        return done

    def _record(self, cell: CellSpec, phase: PhaseCell, elapsed: float) -> None:
        if phase.error:
            self.stats["failed"] += 1
        else:
            self.stats["solved"] += 1
        log_cell(
            cell.cell_id,
            cell.p,
            cell.k,
            cell.regime,
            phase.classification_observed.value,
            phase.decay_exponent,
            elapsed * 1000.0,
            error=phase.error,
        )
        if settings.metrics_enabled:
            metrics.cells_processed_total.labels(
                case=cell.case, classification=phase.classification_observed.value
            ).inc()
            metrics.cell_duration_seconds.labels(case=cell.case).observe(elapsed)

    def run(self) -> SweepResult:
        cells = self.cfg.cells()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stats["total"] = len(cells)
        previous = self._pending(cells)
        results: Dict[int, PhaseCell] = {}
        todo = []
        for cell in cells:
            prior = previous.get(cell.index)
            if prior is not None:
                results[cell.index] = prior
                self.stats["resumed"] += 1
            else:
                todo.append(cell)
        self.logger.info(
            f"Sweep '{self.cfg.name}': {len(cells)} cells, {len(todo)} to solve, "
            f"{self.stats['resumed']} reused, jobs={self.cfg.jobs}"
        )

        if self.cfg.jobs <= 1 or len(todo) <= 1:
            for cell in todo:
                started = time.perf_counter()
                phase = run_cell(cell, self.cfg, str(self.out_dir))
                self._record(cell, phase, time.perf_counter() - started)
                results[cell.index] = phase
        else:
            self._run_pool(todo, results)

        ordered = [results[cell.index] for cell in cells]
        storage.write_index(self.out_dir / storage.INDEX_FILE, [c.to_dict() for c in ordered])
        from drift_lab.phase_lab.report import write_phase_table

        write_phase_table(self.out_dir, ordered)
        self.logger.info(
            f"Sweep '{self.cfg.name}' done: solved={self.stats['solved']} failed={self.stats['failed']} "
            f"resumed={self.stats['resumed']}"
        )
        return SweepResult(cells=ordered, out_dir=self.out_dir, resumed=self.stats["resumed"], stats=dict(self.stats))

    def _run_pool(self, todo: List[CellSpec], results: Dict[int, PhaseCell]) -> None:
        started: Dict[int, float] = {}
        with ProcessPoolExecutor(max_workers=self.cfg.jobs) as pool:
            futures = {}
            for cell in todo:
                started[cell.index] = time.perf_counter()
                futures[pool.submit(run_cell, cell, self.cfg, str(self.out_dir))] = cell
                if settings.metrics_enabled:
                    metrics.sweep_cells_in_flight.inc()
            for future in as_completed(futures):
                cell = futures[future]
                if settings.metrics_enabled:
                    metrics.sweep_cells_in_flight.dec()
                try:
                    phase = future.result()
                except Exception as exc:  # worker process died
                    self.logger.error(f"Worker for {cell.cell_id} died: {exc}", exc_info=True)
                    phase = PhaseCell(
                        cell_id=cell.cell_id,
                        p=cell.p,
                        k=cell.k,
                        regime_expected=Regime(cell.regime),
                        classification_observed=PhaseClass.INCONCLUSIVE,
                        mass=cell.mass,
                        small_mass=cell.mass <= self.cfg.classify.small_mass,
                        case=cell.case,
                        error=f"{type(exc).__name__}: {exc}",
                        artifacts={"dir": storage.cell_dir_name(cell.index, cell.cell_id)},
                        index=cell.index,
                    )
                self._record(cell, phase, time.perf_counter() - started[cell.index])
                results[cell.index] = phase


def run_sweep(cfg: SweepConfig, out_dir: Optional[str] = None, resume: bool = True) -> SweepResult:
    return SweepRunner(cfg, out_dir, resume=resume).run()


def run_single(cfg: SweepConfig, out_dir: Optional[str] = None) -> PhaseCell:
    """Run the first cell of ``cfg`` (the ``run`` subcommand).

    Raises:
        ConfigError: the config names no cell or the cell fails validation.
    """
    cells = cfg.cells()
    if not cells:
        raise ConfigError("config defines no cell to run")
    if len(cells) > 1:
        logger.warning(f"Config defines {len(cells)} cells; running only {cells[0].cell_id}")
    cell = cells[0]
    target = Path(out_dir or cfg.output_dir)
    # surface config errors before anything is written
    build_run(cell, cfg)
    started = time.perf_counter()
    phase = run_cell(cell, cfg, str(target))
    log_cell(
        cell.cell_id,
        cell.p,
        cell.k,
        cell.regime,
        phase.classification_observed.value,
        phase.decay_exponent,
        (time.perf_counter() - started) * 1000.0,
        error=phase.error,
    )
    return phase


__all__ = [
    "InjectedFailure",
    "SweepResult",
    "SweepRunner",
    "build_run",
    "initial_condition",
    "run_cell",
    "run_single",
    "run_sweep",
]
