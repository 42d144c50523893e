"""Static operating models of HVAC buildings and incentive analysis on them."""

from importlib.resources import files

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a file shipped in the package ``data`` directory."""
    return files(__package__) / "data" / name
