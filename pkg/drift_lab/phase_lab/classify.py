"""Regime expectations and observed classification of phase cells."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Mapping, Optional, Tuple

from drift_lab.config.sweep_config import ClassifyOptions, format_exponent, parse_exponent, regime_of
from drift_lab.errors import ConfigError
from drift_lab.numerics.drift_lib import critic
from drift_lab.numerics.pde_solver import RunReport
from drift_lab.numerics.selfsim import decay_fit_physical

logger = logging.getLogger(__name__)


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


class PhaseClass(str, Enum):
    """Observed behaviour of a cell."""

    GLOBAL_NONDECAY = "global_nondecay"
    GLOBAL_DECAY = "global_decay"
    BLOW_UP = "blow_up"
    INCONCLUSIVE = "inconclusive"


# what the theory predicts for each regime with the drifts the lab uses
EXPECTED = {
    Regime.SUBCRITICAL: PhaseClass.GLOBAL_NONDECAY,
    Regime.CRITICAL: PhaseClass.GLOBAL_DECAY,
    Regime.SUPERCRITICAL: PhaseClass.BLOW_UP,
}

# with too little mass the supercritical drift cannot concentrate the solution
SMALL_MASS_EXPECTED = frozenset({PhaseClass.GLOBAL_DECAY, PhaseClass.GLOBAL_NONDECAY})


def expected_regime(p: float, k: float, case: str) -> Regime:
    return Regime(regime_of(k, critic(p, case)))


def expected_classes(regime: Regime, small_mass: bool = False) -> FrozenSet[PhaseClass]:
    """Observed classes that agree with ``regime``.

    A small-mass supercritical cell is exempt from blowing up and agrees
    when it stays global, decaying or not.
    """
    if small_mass and regime is Regime.SUPERCRITICAL:
        return SMALL_MASS_EXPECTED
    return frozenset({EXPECTED[regime]})


@dataclass
class PhaseCell:
    """One classified (p, k) experiment."""

    cell_id: str
    p: float
    k: float
    regime_expected: Regime
    classification_observed: PhaseClass
    decay_exponent: Optional[float] = None
    mass: float = 1.0
    small_mass: bool = False
    case: str = "con1"
    flags: Tuple[str, ...] = ()
    error: Optional[str] = None
    artifacts: Dict[str, str] = field(default_factory=dict)
    index: int = 0

    @property
    def matches_expectation(self) -> bool:
        return self.classification_observed in expected_classes(self.regime_expected, self.small_mass)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "cell_id": self.cell_id,
            "case": self.case,
            "p": format_exponent(self.p),
            "k": self.k,
            "mass": self.mass,
            "small_mass": int(self.small_mass),
            "regime_expected": self.regime_expected.value,
            "classification_observed": self.classification_observed.value,
            "decay_exponent": "" if self.decay_exponent is None else self.decay_exponent,
            "flags": ";".join(self.flags),
            "error": self.error or "",
            "dir": self.artifacts.get("dir", ""),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PhaseCell":
        """Inverse of :meth:`to_dict`; accepts the string values read back from CSV."""
        try:
            exponent = data.get("decay_exponent", "")
            flags = str(data.get("flags", "") or "")
            return cls(
                cell_id=str(data["cell_id"]),
                p=parse_exponent(data["p"]),
                k=float(data["k"]),
                regime_expected=Regime(data["regime_expected"]),
                classification_observed=PhaseClass(data["classification_observed"]),
                decay_exponent=None if exponent in ("", None) else float(exponent),
                mass=float(data.get("mass", 1.0)),
                small_mass=str(data.get("small_mass", "0")).strip().lower() in ("1", "true"),
                case=str(data.get("case", "con1")),
                flags=tuple(f for f in flags.split(";") if f),
                error=str(data.get("error") or "") or None,
                artifacts={"dir": str(data.get("dir", ""))} if data.get("dir") else {},
                index=int(data.get("index", 0)),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed phase cell record: {exc}") from exc


def classify_report(report: RunReport, options: ClassifyOptions) -> Tuple[PhaseClass, Optional[float]]:
    """Classification rules.

    * ``blow_up`` if the solver fired a blow-up or dt-collapse event;
    * otherwise the sup-norm exponent is fitted on the decay window (cut at the
      final time): ``global_decay`` inside ``decay_band``, ``global_nondecay``
      inside ``nondecay_band`` (open below, closed above) with a bounded sup
      norm, ``inconclusive`` otherwise or when the fit is impossible.
    """
    if report.blew_up:
        return PhaseClass.BLOW_UP, None
    lo, hi = options.decay_window
    hi = min(hi, report.terminal.t)
    try:
        exponent = decay_fit_physical(report, lo, hi)
    except ConfigError as exc:
        logger.debug("decay fit impossible: %s", exc)
        return PhaseClass.INCONCLUSIVE, None
    if not math.isfinite(exponent):
        return PhaseClass.INCONCLUSIVE, None
    d_lo, d_hi = options.decay_band
    n_lo, n_hi = options.nondecay_band
    bounded = math.isfinite(float(report.series.sup_norm.max()))
    if d_lo <= exponent <= d_hi:
        return PhaseClass.GLOBAL_DECAY, exponent
    if n_lo < exponent <= n_hi and bounded:
        return PhaseClass.GLOBAL_NONDECAY, exponent
    return PhaseClass.INCONCLUSIVE, exponent
