"""Keyframe stand-up motion engine with joint-error compensation, and a simulated NAO-like plant."""

__version__ = "0.1.0"
