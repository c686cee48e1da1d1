"""edskit: verification and simulation toolkit for third-order
Euler-Poisson (variational) differential systems."""

__version__ = "0.1.0"
