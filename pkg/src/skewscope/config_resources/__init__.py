"""Packaged experiment configurations."""

from __future__ import annotations

from importlib.resources import files


DEFAULT_CONFIG = str(files(__package__) / "default.yml")
DRIFT_RECOVERY_CONFIG = str(files(__package__) / "drift_recovery.yml")

NAMED_CONFIGS = {
    "default": DEFAULT_CONFIG,
    "drift_recovery": DRIFT_RECOVERY_CONFIG,
}
