"""Deterministic survival gridworld with a self-contained neural agent stack."""

__version__ = "0.1.0"
