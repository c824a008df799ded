"""Datasets, training, evaluation sweeps, overhead accounting and the `semcomm` CLI."""

__version__ = "0.1.0"
