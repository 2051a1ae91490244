"""Access to the model, system and timing files shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def _root():
    return resources.files("paroracle") / "data"


def bundled_files() -> list[str]:
    return sorted(p.name for p in _root().iterdir() if p.is_file() and not p.name.startswith("_"))


def data_path(name: str) -> Path:
    """Filesystem path of a bundled file; raises FileNotFoundError if absent."""
    entry = _root() / name
    if not entry.is_file():
        raise FileNotFoundError(f"no bundled file named {name!r}")
    return Path(str(entry))
