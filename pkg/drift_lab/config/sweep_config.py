"""TOML configuration for single runs and (p, k) sweeps.

A config file has the sections ``[sweep]``, ``[drift]``, ``[solver]``,
``[initial]``, ``[classify]``, ``[inject]`` and ``[selfsim]``. ``[drift]`` and
``[initial]`` are either flat tables or hold one sub-table per regime
(``subcritical``, ``critical``, ``supercritical``).
"""

import importlib
import importlib.util
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from drift_lab.config.settings import settings
from drift_lab.errors import ConfigError

logger = logging.getLogger(__name__)

REGIMES = ("subcritical", "critical", "supercritical")
CASES = ("con1", "con2")


def _toml_module():
    if importlib.util.find_spec("tomllib"):
        return importlib.import_module("tomllib")
    return importlib.import_module("tomli")


def parse_exponent(value: Any) -> float:
    """Accept numbers and the strings ``"inf"`` / ``"infinity"``."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"not an exponent: {value!r}") from exc
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"not an exponent: {value!r}")
    return float(value)


def format_exponent(p: float) -> str:
    return "inf" if p == math.inf else f"{p:g}"


def _float(section: Mapping[str, Any], key: str, default: float, positive: bool = True) -> float:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{key} must be positive, got {value}")
    return float(value)


def _int(section: Mapping[str, Any], key: str, default: int, minimum: int = 1) -> int:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {value!r}")
    return value


def _pair(section: Mapping[str, Any], key: str, default: Tuple[float, float]) -> Tuple[float, float]:
    value = section.get(key, default)
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a pair of numbers, got {value!r}") from exc
    if not lo < hi:
        raise ConfigError(f"{key} must be increasing, got {value!r}")
    return lo, hi


@dataclass(frozen=True)
class SolverOptions:
    t_max: float = 10.0
    grid_n: int = field(default_factory=lambda: settings.grid_n)
    domain_half_width: float = field(default_factory=lambda: settings.domain_half_width)
    dt_max: float = 0.05
    theta: float = 0.5
    cfl: float = field(default_factory=lambda: settings.cfl)
    blowup_factor: float = field(default_factory=lambda: settings.blowup_factor)
    dt_floor: float = field(default_factory=lambda: settings.dt_floor)
    diagnostics_stride: int = 10

    @classmethod
    def from_section(cls, section: Mapping[str, Any]) -> "SolverOptions":
        base = cls()
        theta = _float(section, "theta", base.theta)
        if not 0.5 <= theta <= 1.0:
            raise ConfigError(f"theta must lie in [0.5, 1], got {theta}")
        cfl = _float(section, "cfl", base.cfl)
        if cfl > 1:
            raise ConfigError(f"cfl must be <= 1, got {cfl}")
        return cls(
            t_max=_float(section, "t_max", base.t_max),
            grid_n=_int(section, "grid_n", base.grid_n, minimum=2),
            domain_half_width=_float(section, "domain_L", base.domain_half_width),
            dt_max=_float(section, "dt_max", base.dt_max),
            theta=theta,
            cfl=cfl,
            blowup_factor=_float(section, "blowup_factor", base.blowup_factor),
            dt_floor=_float(section, "dt_floor", base.dt_floor),
            diagnostics_stride=_int(section, "diagnostics_stride", base.diagnostics_stride),
        )


@dataclass(frozen=True)
class ClassifyOptions:
    decay_window: Tuple[float, float] = field(default_factory=lambda: settings.decay_window)
    decay_band: Tuple[float, float] = field(default_factory=lambda: settings.decay_band)
    nondecay_band: Tuple[float, float] = field(default_factory=lambda: settings.nondecay_band)
    small_mass: float = field(default_factory=lambda: settings.small_mass)

    @classmethod
    def from_section(cls, section: Mapping[str, Any]) -> "ClassifyOptions":
        base = cls()
        return cls(
            decay_window=_pair(section, "decay_window", base.decay_window),
            decay_band=_pair(section, "decay_band", base.decay_band),
            nondecay_band=_pair(section, "nondecay_band", base.nondecay_band),
            small_mass=_float(section, "small_mass", base.small_mass, positive=False),
        )


@dataclass(frozen=True)
class SelfsimOptions:
    """Rescaled-frame export: frames at ``tau_list`` about blow-up time ``T``.

    A section with ``tau_bar`` (plus ``tau_span`` and ``tau_step``) instead of
    ``T``/``tau_list`` takes ``T = e^{τ̄}`` and frames on ``[τ̄, τ̄ + span]``.
    """

    T: float
    tau_list: Tuple[float, ...]
    y_half_width: float
    y_cells: int
    levels: Tuple[float, ...] = ()

    @classmethod
    def from_section(cls, section: Mapping[str, Any]) -> "SelfsimOptions":
        if "tau_bar" in section:
            if "T" in section or "tau_list" in section:
                raise ConfigError("selfsim.tau_bar excludes T and tau_list")
            from drift_lab.numerics.selfsim import tail_schedule

            T, taus = tail_schedule(
                _float(section, "tau_bar", 0.0, positive=False),
                _float(section, "tau_span", 4.0),
                _float(section, "tau_step", 0.1),
            )
        else:
            T = _float(section, "T", 1.0)
            taus = tuple(float(t) for t in section.get("tau_list", ()))
        if len(taus) < 3 or any(t < 0 for t in taus) or list(taus) != sorted(taus):
            raise ConfigError("selfsim.tau_list needs at least three increasing nonnegative values")
        levels = tuple(float(a) for a in section.get("levels", ()))
        if any(a <= 0 for a in levels):
            raise ConfigError("selfsim.levels must be positive")
        return cls(
            T=T,
            tau_list=taus,
            y_half_width=_float(section, "y_half_width", 10.0),
            y_cells=_int(section, "y_cells", 1024, minimum=2),
            levels=levels,
        )

    def times(self) -> Tuple[float, ...]:
        return tuple(-self.T * math.expm1(-tau) for tau in self.tau_list)


@dataclass(frozen=True)
class CellSpec:
    """One (p, k, mass) instantiation of a sweep."""

    cell_id: str
    case: str
    p: float
    k: float
    mass: float
    regime: str
    drift: Dict[str, Any]
    initial: Dict[str, Any]
    index: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cell_id": self.cell_id,
            "case": self.case,
            "p": format_exponent(self.p),
            "k": self.k,
            "mass": self.mass,
            "regime": self.regime,
            "drift": dict(self.drift),
            "initial": dict(self.initial),
        }


def regime_of(k: float, critical: float, tol: float = 1e-12) -> str:
    if abs(k - critical) <= tol * max(1.0, abs(critical)):
        return "critical"
    return "subcritical" if k < critical else "supercritical"


def _regime_table(section: Mapping[str, Any], regime: str) -> Dict[str, Any]:
    if any(name in section for name in REGIMES):
        flat = {key: val for key, val in section.items() if key not in REGIMES}
        flat.update(section.get(regime, {}))
        return flat
    return dict(section)


@dataclass(frozen=True)
class SweepConfig:
    """Validated sweep (or single-run) configuration."""

    case: str
    p_list: Tuple[float, ...]
    k_list: Tuple[float, ...]
    k_mode: str = "absolute"
    mass_list: Tuple[float, ...] = (1.0,)
    name: str = "sweep"
    drift: Dict[str, Any] = field(default_factory=dict)
    initial: Dict[str, Any] = field(default_factory=dict)
    solver: SolverOptions = field(default_factory=SolverOptions)
    classify: ClassifyOptions = field(default_factory=ClassifyOptions)
    selfsim: Optional[SelfsimOptions] = None
    fail_cells: Tuple[str, ...] = ()
    output_dir: str = field(default_factory=lambda: settings.output_dir)
    jobs: int = field(default_factory=lambda: settings.jobs)
    seed: int = field(default_factory=lambda: settings.seed)
    source: Dict[str, Any] = field(default_factory=dict)

    def cells(self) -> List[CellSpec]:
        """Instantiate every (p, k, mass) cell in file order."""
        from drift_lab.numerics.drift_lib import critic

        cells: List[CellSpec] = []
        for p in self.p_list:
            crit = critic(p, self.case)
            for k_entry in self.k_list:
                k = crit + k_entry if self.k_mode == "offset" else k_entry
                regime = regime_of(k, crit)
                for mass in self.mass_list:
                    cell_id = f"p={format_exponent(p)},k={k:.6g}"
                    if len(self.mass_list) > 1:
                        cell_id += f",m={mass:g}"
                    cells.append(
                        CellSpec(
                            cell_id=cell_id,
                            case=self.case,
                            p=p,
                            k=k,
                            mass=mass,
                            regime=regime,
                            drift=_regime_table(self.drift, regime),
                            initial=_regime_table(self.initial, regime),
                            index=len(cells),
                        )
                    )
        return cells

    def with_overrides(self, **overrides: Any) -> "SweepConfig":
        """Apply CLI overrides (``grid_n``, ``domain_L``, ``jobs``, ``seed``, ``out``).

        ``None`` keeps the file value.
        """
        solver = self.solver
        if overrides.get("grid_n") is not None:
            solver = replace(solver, grid_n=int(overrides["grid_n"]))
        if overrides.get("domain_L") is not None:
            solver = replace(solver, domain_half_width=float(overrides["domain_L"]))
        updated = replace(self, solver=solver)
        if overrides.get("jobs") is not None:
            updated = replace(updated, jobs=int(overrides["jobs"]))
        if overrides.get("seed") is not None:
            updated = replace(updated, seed=int(overrides["seed"]))
        if overrides.get("out") is not None:
            updated = replace(updated, output_dir=str(overrides["out"]))
        if updated.jobs < 1 or updated.solver.grid_n < 2 or not updated.solver.domain_half_width > 0:
            raise ConfigError("overrides must keep jobs >= 1, grid_n >= 2 and domain_L > 0")
        return updated


def _list(section: Mapping[str, Any], key: str, default: Optional[Sequence[Any]] = None) -> List[Any]:
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"[sweep] is missing {key}")
    if not isinstance(value, list):
        raise ConfigError(f"{key} must be a list, got {value!r}")
    return list(value)


def parse_config(data: Mapping[str, Any]) -> SweepConfig:
    """Validate a parsed TOML document.

    Raises:
        ConfigError: unknown sections, wrong types or out-of-range values.
    """
    known = {"sweep", "drift", "solver", "initial", "classify", "inject", "selfsim"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    sweep = data.get("sweep", {})
    case = sweep.get("case", "con1")
    if case not in CASES:
        raise ConfigError(f"case must be one of {CASES}, got {case!r}")
    p_list = tuple(parse_exponent(p) for p in _list(sweep, "p_list"))
    if any(not p > 1 for p in p_list):
        raise ConfigError("every p must be > 1")
    k_mode = sweep.get("k_mode", "absolute")
    if k_mode not in ("absolute", "offset"):
        raise ConfigError(f"k_mode must be 'absolute' or 'offset', got {k_mode!r}")
    k_list = tuple(_float({"k": k}, "k", 0.0, positive=False) for k in _list(sweep, "k_list"))
    initial = dict(data.get("initial", {}))
    mass_list = tuple(
        _float({"mass": m}, "mass", 1.0) for m in _list(sweep, "mass_list", [initial.get("mass", 1.0)])
    )
    fail_cells = tuple(str(c) for c in data.get("inject", {}).get("fail_cells", ()))
    selfsim = SelfsimOptions.from_section(data["selfsim"]) if "selfsim" in data else None
    cfg = SweepConfig(
        case=case,
        p_list=p_list,
        k_list=k_list,
        k_mode=k_mode,
        mass_list=mass_list,
        name=str(sweep.get("name", "sweep")),
        drift=dict(data.get("drift", {})),
        initial=initial,
        solver=SolverOptions.from_section(data.get("solver", {})),
        classify=ClassifyOptions.from_section(data.get("classify", {})),
        selfsim=selfsim,
        fail_cells=fail_cells,
        output_dir=str(sweep.get("out", settings.output_dir)),
        jobs=_int(sweep, "jobs", settings.jobs),
        seed=_int(sweep, "seed", settings.seed, minimum=0),
        source=dict(data),
    )
    for cell in cfg.cells():
        if not cell.k > 0:
            raise ConfigError(f"cell {cell.cell_id} has k <= 0")
    return cfg


def load_config(path: Union[str, Path], **overrides: Any) -> SweepConfig:
    """Read and validate a TOML config, then apply CLI overrides.

    Raises:
        ConfigError: missing file, TOML syntax error or invalid values.
    """
    path = Path(path)
    toml = _toml_module()
    try:
        with open(path, "rb") as f:
            data = toml.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except toml.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    logger.debug("Loaded config %s", path)
    return parse_config(data).with_overrides(**overrides)
