"""Formal verification and simulation evidence for traffic-rule controllers."""
from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str = "") -> Path:
    """Location of a shipped example file (scenarios, controllers, bindings)."""
    return Path(str(resources.files("corrovv") / "data")) / name
