"""Weighted sum-rate beamforming: solvers, an unfolded learned solver, and a benchmark service."""

__version__ = "0.1.0"
