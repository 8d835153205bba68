"""Catch-disperse-release dispersive readout simulator."""

__version__ = "0.1.0"
