"""Simulated spatial question-answer data generation."""

__version__ = "0.1.0"
