"""Indifference prices and implied-volatility skews under stochastic volatility
with distorted entropic risk measures."""

__version__ = "0.1.0"
