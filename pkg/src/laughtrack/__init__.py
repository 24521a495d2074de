"""Laugh-track supervised humor corpus building, models and evaluation."""

__version__ = "0.1.0"
