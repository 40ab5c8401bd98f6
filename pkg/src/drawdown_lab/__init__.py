"""Drawdown, drawup and occupation-time laws for one-dimensional diffusions."""

__version__ = "0.1.0"
