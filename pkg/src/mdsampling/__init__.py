"""Sensing-slot selection for micro-Doppler reconstruction in communication-centric ISAC."""

__version__ = "0.1.0"
