"""Learners that predict the future of non-stationary streams, and the benchmarks that test them."""

__version__ = "0.1.0"
