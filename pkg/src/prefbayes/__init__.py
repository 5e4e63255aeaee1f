"""Bayesian preference learning from pairwise comparisons, response times,
and per-criterion attention durations."""

__version__ = "0.1.0"
