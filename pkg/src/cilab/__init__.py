"""Convex integration laboratory: constructive schemes for the Euler relaxation,
active scalars, and the Nash-Kuiper iteration, with numerical checks."""

__version__ = "0.1.0"
