"""Simulation library for infinite occupancy schemes with stick-breaking
probabilities, perturbed random walks, Ewens permutations, and the stable /
Brownian limit laws they converge to, plus a replicated-experiment harness."""

__version__ = "0.1.0"

from . import sampling, prw, occupancy, ewens, limits, harness  # noqa: F401
