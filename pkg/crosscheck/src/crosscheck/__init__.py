"""Differential oracle for causalproc membership verdicts."""

__version__ = "0.1.0"
