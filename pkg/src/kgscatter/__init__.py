"""Numerical laboratory for 1D Klein-Gordon equations with localized
variable-coefficient quadratic and cubic nonlinearities."""

__version__ = "0.1.0"
