"""Feature-model guided multi-objective optimization for self-adaptive software."""

__version__ = "0.1.0"
