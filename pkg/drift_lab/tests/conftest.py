"""Shared fixtures for drift_lab unit tests."""

import pytest

from drift_lab.config.settings import settings


@pytest.fixture(autouse=True)
def run_log(tmp_path, monkeypatch):
    """Keep the per-cell run log out of the working tree."""
    path = tmp_path / "runs.log"
    monkeypatch.setattr(settings, "run_log_path", str(path))
    return path
