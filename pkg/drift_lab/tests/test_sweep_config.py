"""Tests for TOML sweep configs."""

import math

import pytest

from drift_lab.config.sweep_config import (
    ClassifyOptions,
    SelfsimOptions,
    SolverOptions,
    format_exponent,
    load_config,
    parse_config,
    parse_exponent,
    regime_of,
)
from drift_lab.errors import ConfigError

DIAGONAL = """
[sweep]
name = "diagonal"
case = "con1"
p_list = [2, 4, "inf"]
k_list = [-0.25, 0.0, 0.25]
k_mode = "offset"

[drift.subcritical]
family = "stationary_con1"

[drift.supercritical]
family = "blowup_con1"
alpha = 0.1
beta = 0.5

[initial]
shape = "gaussian"
sigma = 1.0

[solver]
t_max = 5.0
grid_n = 256
domain_L = 20.0
"""


@pytest.fixture
def diagonal(tmp_path):
    path = tmp_path / "diagonal.toml"
    path.write_text(DIAGONAL)
    return path


def _minimal(**sweep):
    body = {"p_list": [2.0], "k_list": [0.25]}
    body.update(sweep)
    return {"sweep": body}


class TestExponents:
    """Tests for p parsing and formatting."""

    @pytest.mark.parametrize("value", ["inf", "Infinity", " +inf "])
    def test_infinity_strings(self, value):
        assert parse_exponent(value) == math.inf

    def test_numbers(self):
        assert parse_exponent(4) == 4.0
        assert parse_exponent("2.5") == 2.5

    @pytest.mark.parametrize("value", ["four", True, None, [2]])
    def test_rejects_non_exponents(self, value):
        with pytest.raises(ConfigError):
            parse_exponent(value)

    def test_format(self):
        assert format_exponent(math.inf) == "inf"
        assert format_exponent(4.0) == "4"
        assert format_exponent(2.5) == "2.5"


class TestRegimes:
    """Tests for regime_of."""

    def test_classification(self):
        assert regime_of(0.5, 0.75) == "subcritical"
        assert regime_of(0.75, 0.75) == "critical"
        assert regime_of(1.0, 0.75) == "supercritical"

    def test_tolerance(self):
        assert regime_of(0.75 + 1e-14, 0.75) == "critical"


class TestLoadConfig:
    """Tests for load_config and the cell expansion."""

    def test_diagonal_cells(self, diagonal):
        cfg = load_config(diagonal)
        cells = cfg.cells()
        assert len(cells) == 9
        assert [c.index for c in cells] == list(range(9))
        first = cells[0]
        assert first.p == 2.0
        assert first.k == pytest.approx(0.25)
        assert first.regime == "subcritical"
        assert first.cell_id == "p=2,k=0.25"
        assert [c.regime for c in cells[:3]] == ["subcritical", "critical", "supercritical"]

    def test_infinite_p_critical_k(self, diagonal):
        cells = load_config(diagonal).cells()
        crit = [c for c in cells if c.p == math.inf and c.regime == "critical"]
        assert len(crit) == 1
        assert crit[0].k == pytest.approx(1.0)
        assert crit[0].cell_id == "p=inf,k=1"

    def test_regime_tables_are_merged(self, diagonal):
        cells = load_config(diagonal).cells()
        assert cells[0].drift == {"family": "stationary_con1"}
        assert cells[2].drift["family"] == "blowup_con1"
        assert cells[1].drift == {}
        assert cells[0].initial == {"shape": "gaussian", "sigma": 1.0}

    def test_solver_section(self, diagonal):
        solver = load_config(diagonal).solver
        assert solver.t_max == 5.0
        assert solver.grid_n == 256
        assert solver.domain_half_width == 20.0

    def test_overrides(self, diagonal, tmp_path):
        cfg = load_config(diagonal, grid_n=64, domain_L=8.0, jobs=3, seed=9, out=str(tmp_path / "o"))
        assert cfg.solver.grid_n == 64
        assert cfg.solver.domain_half_width == 8.0
        assert (cfg.jobs, cfg.seed) == (3, 9)
        assert cfg.output_dir == str(tmp_path / "o")

    def test_none_overrides_keep_file_values(self, diagonal):
        cfg = load_config(diagonal, grid_n=None, jobs=None)
        assert cfg.solver.grid_n == 256

    def test_invalid_override(self, diagonal):
        with pytest.raises(ConfigError):
            load_config(diagonal, jobs=0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.toml")

    def test_bad_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[sweep\np_list = ")
        with pytest.raises(ConfigError, match="invalid TOML"):
            load_config(path)

    def test_source_is_kept(self, diagonal):
        assert load_config(diagonal).source["sweep"]["name"] == "diagonal"


class TestParseConfig:
    """Validation errors raised by parse_config."""

    def test_unknown_section(self):
        data = _minimal()
        data["extra"] = {}
        with pytest.raises(ConfigError, match="extra"):
            parse_config(data)

    def test_unknown_case(self):
        with pytest.raises(ConfigError):
            parse_config(_minimal(case="con3"))

    def test_p_must_exceed_one(self):
        with pytest.raises(ConfigError):
            parse_config(_minimal(p_list=[1.0]))

    def test_missing_lists(self):
        with pytest.raises(ConfigError, match="k_list"):
            parse_config({"sweep": {"p_list": [2.0]}})

    def test_list_type(self):
        with pytest.raises(ConfigError):
            parse_config(_minimal(k_list=0.5))

    def test_nonpositive_k_cell(self):
        with pytest.raises(ConfigError, match="k <= 0"):
            parse_config(_minimal(k_list=[-1.0], k_mode="offset"))

    def test_bad_k_mode(self):
        with pytest.raises(ConfigError):
            parse_config(_minimal(k_mode="relative"))

    def test_mass_list_builds_ids(self):
        cells = parse_config(_minimal(mass_list=[1.0, 0.01])).cells()
        assert [c.cell_id for c in cells] == ["p=2,k=0.25,m=1", "p=2,k=0.25,m=0.01"]

    def test_single_mass_from_initial(self):
        data = _minimal()
        data["initial"] = {"mass": 0.5}
        assert parse_config(data).mass_list == (0.5,)

    def test_fail_cells(self):
        data = _minimal()
        data["inject"] = {"fail_cells": ["p=2,k=0.25"]}
        assert parse_config(data).fail_cells == ("p=2,k=0.25",)


class TestSections:
    """Tests for the option sections."""

    def test_solver_defaults(self):
        opts = SolverOptions.from_section({})
        assert opts.theta == 0.5
        assert opts.diagnostics_stride == 10

    @pytest.mark.parametrize(
        "section", [{"theta": 0.2}, {"cfl": 2.0}, {"grid_n": 1}, {"t_max": -1.0}, {"t_max": "long"}]
    )
    def test_solver_rejects(self, section):
        with pytest.raises(ConfigError):
            SolverOptions.from_section(section)

    def test_classify_pairs(self):
        opts = ClassifyOptions.from_section({"decay_band": [-0.6, -0.4]})
        assert opts.decay_band == (-0.6, -0.4)
        with pytest.raises(ConfigError):
            ClassifyOptions.from_section({"decay_band": [0.1, -0.1]})
        with pytest.raises(ConfigError):
            ClassifyOptions.from_section({"decay_window": "1-100"})

    def test_classify_small_mass(self):
        assert ClassifyOptions().small_mass == pytest.approx(0.05)
        assert ClassifyOptions.from_section({"small_mass": 0.02}).small_mass == 0.02
        with pytest.raises(ConfigError):
            ClassifyOptions.from_section({"small_mass": "tiny"})

    def test_selfsim_times(self):
        opts = SelfsimOptions.from_section({"T": 2.0, "tau_list": [0.0, 0.5, 1.0]})
        assert opts.times() == pytest.approx((0.0, 2.0 * (1 - math.exp(-0.5)), 2.0 * (1 - math.exp(-1.0))))
        assert opts.y_cells == 1024

    def test_selfsim_tail_from_tau_bar(self):
        opts = SelfsimOptions.from_section({"tau_bar": 1.0, "tau_span": 2.0, "tau_step": 0.5})
        assert opts.T == pytest.approx(math.e)
        assert opts.tau_list == pytest.approx((1.0, 1.5, 2.0, 2.5, 3.0))
        assert opts.times()[0] == pytest.approx(math.e - 1.0)

    @pytest.mark.parametrize(
        "section",
        [
            {"tau_bar": 1.0, "T": 2.0},
            {"tau_bar": 1.0, "tau_span": 0.1},
            {"tau_list": [0.0, 1.0]},
            {"tau_list": [1.0, 0.5, 2.0]},
            {"tau_list": [0.0, 1.0, 2.0], "levels": [0.0]},
        ],
    )
    def test_selfsim_rejects(self, section):
        with pytest.raises(ConfigError):
            SelfsimOptions.from_section(section)
