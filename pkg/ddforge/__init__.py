"""ddforge: discovery and evaluation of dynamical-decoupling sequences."""

__version__ = "0.1.0"
