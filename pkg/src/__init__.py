"""Counterfactual locality checker for the Hardy experiment."""

__version__ = "1.0.0"
