"""Access to data files shipped with the package."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path


def fixture_path(name: str) -> Path:
    """Absolute path of a packaged fixture (sql seed, sample corpus)."""
    return Path(str(files("toolloop").joinpath("fixtures", name)))
