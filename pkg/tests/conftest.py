"""Global pytest hooks for test categorization."""

from pathlib import Path

import pytest

from drift_lab.config.settings import settings


@pytest.hookimpl
def pytest_collection_modifyitems(config, items):
    """
    Automatically tag tests with markers based on their location.

    - tests under tests/acceptance → slow
    - all other collected tests → unit
    """
    root = Path(config.rootpath)
    for item in items:
        rel = Path(item.fspath).resolve().relative_to(root)
        if "acceptance" in rel.parts:
            item.add_marker("slow")
        else:
            item.add_marker("unit")


@pytest.fixture(autouse=True)
def run_log(tmp_path, monkeypatch):
    """Keep the per-cell run log out of the working tree."""
    path = tmp_path / "runs.log"
    monkeypatch.setattr(settings, "run_log_path", str(path))
    return path
