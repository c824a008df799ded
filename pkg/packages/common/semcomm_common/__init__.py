"""Shared enums, models, errors and serialization for the semcomm workspace."""

__version__ = "0.1.0"

__all__ = ["__version__"]
