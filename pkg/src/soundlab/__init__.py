"""Soundness and consistency analysis of online game-playing algorithms in
two-player zero-sum imperfect-information games."""

__version__ = "0.1.0"
