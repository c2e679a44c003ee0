"""Desk-scale checks of periodic-orbit growth for annulus maps and closed geodesics."""

__version__ = "0.1.0"
