"""radonbl - Brascamp-Lieb weights and Radon-like operator laboratory.

Numerical experiments around L^p-improving estimates for averages over
polynomial submanifolds, driven from a seeded command line.
"""

__version__ = "0.1.0"
