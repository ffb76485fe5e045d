"""Hybrid quantum-classical fraud-detection models on a from-scratch
differentiable statevector simulator."""

__version__ = "0.1.0"
