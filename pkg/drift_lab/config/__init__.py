"""Configuration management for drift-lab."""

from .settings import Settings, reload_settings, settings

__all__ = ["Settings", "reload_settings", "settings"]
