"""Return times of trees with dynamics, puzzles and meta-Fibonacci sequences."""

__version__ = "0.1.0"
