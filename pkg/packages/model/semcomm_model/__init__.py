"""Autodiff tensors, encoders, fusion, channel and task heads for the semcomm simulator."""

__version__ = "0.1.0"

__all__ = ["__version__"]
