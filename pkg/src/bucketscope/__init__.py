"""Learn bucket naming patterns, generate candidates, validate them and score exposure."""

__version__ = "0.1.0"
