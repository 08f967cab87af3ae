"""Space-time least-squares Petrov-Galerkin model reduction."""

__version__ = "0.1.0"
