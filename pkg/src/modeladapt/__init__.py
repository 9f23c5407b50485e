"""Model-adaptive discontinuous Galerkin solver with a posteriori estimators."""
__version__ = "0.1.0"
