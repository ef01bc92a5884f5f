"""Tests for environment-driven settings."""

import logging

from drift_lab.config.settings import Settings, _safe_float, _safe_int, _safe_pair, reload_settings, settings


class TestSafeParsers:
    """Tests for the _safe_* helpers."""

    def test_int_from_environment(self, monkeypatch):
        """Parser reads a valid integer."""
        monkeypatch.setenv("DRIFT_LAB_JOBS", "4")
        assert _safe_int("DRIFT_LAB_JOBS", "1") == 4

    def test_int_falls_back_on_garbage(self, monkeypatch, caplog):
        """Parser logs a warning and returns the default for invalid input."""
        monkeypatch.setenv("DRIFT_LAB_JOBS", "many")
        with caplog.at_level(logging.WARNING):
            assert _safe_int("DRIFT_LAB_JOBS", "1") == 1
        assert "Invalid value 'many'" in caplog.text

    def test_float_default_when_unset(self, monkeypatch):
        monkeypatch.delenv("DRIFT_LAB_CFL", raising=False)
        assert _safe_float("DRIFT_LAB_CFL", "0.9") == 0.9

    def test_float_accepts_exponent_notation(self, monkeypatch):
        monkeypatch.setenv("DRIFT_LAB_DT_FLOOR", "1e-8")
        assert _safe_float("DRIFT_LAB_DT_FLOOR", "1e-10") == 1e-8

    def test_pair_parses(self, monkeypatch):
        monkeypatch.setenv("DRIFT_LAB_DECAY_BAND", "-0.7,-0.3")
        assert _safe_pair("DRIFT_LAB_DECAY_BAND", "-0.65,-0.35") == (-0.7, -0.3)

    def test_pair_rejects_decreasing(self, monkeypatch, caplog):
        """A reversed range is invalid and falls back to the default."""
        monkeypatch.setenv("DRIFT_LAB_DECAY_BAND", "0.5,-0.5")
        with caplog.at_level(logging.WARNING):
            assert _safe_pair("DRIFT_LAB_DECAY_BAND", "-0.65,-0.35") == (-0.65, -0.35)
        assert "Invalid range" in caplog.text

    def test_pair_rejects_wrong_arity(self, monkeypatch):
        monkeypatch.setenv("DRIFT_LAB_DECAY_WINDOW", "1,2,3")
        assert _safe_pair("DRIFT_LAB_DECAY_WINDOW", "1.0,100.0") == (1.0, 100.0)


class TestSettings:
    """Tests for the Settings dataclass."""

    def test_defaults(self, monkeypatch):
        for name in ("DRIFT_LAB_GRID_N", "DRIFT_LAB_METRICS_ENABLED", "DRIFT_LAB_METRICS_PORT", "DRIFT_LAB_JOBS"):
            monkeypatch.delenv(name, raising=False)
        s = Settings()
        assert s.grid_n == 4096
        assert s.metrics_enabled is True
        assert s.metrics_port == 0
        assert s.jobs == 1
        assert s.decay_window == (1.0, 100.0)

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("DRIFT_LAB_GRID_N", "512")
        monkeypatch.setenv("DRIFT_LAB_DOMAIN_L", "12.5")
        monkeypatch.setenv("DRIFT_LAB_METRICS_ENABLED", "FALSE")
        s = Settings()
        assert s.grid_n == 512
        assert s.domain_half_width == 12.5
        assert s.metrics_enabled is False

    def test_reload_updates_shared_instance(self, monkeypatch):
        """reload_settings mutates the module-level instance in place."""
        monkeypatch.setenv("DRIFT_LAB_SEED", "17")
        assert reload_settings() is settings
        assert settings.seed == 17
        monkeypatch.delenv("DRIFT_LAB_SEED")
        reload_settings()
        assert settings.seed == 0
