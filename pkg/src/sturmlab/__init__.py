"""Spectra, fractal dimensions and density of states of Sturmian Hamiltonians.

Modules: ``cf`` (continued fractions and Gauss sampling), ``coding``
(symbolic band words and exact counts), ``spectrum`` (certified band trees,
gaps, Chebyshev families), ``dimension`` (partition functions, pressure,
dimension estimates), ``dos`` (density of states), ``cli``.
"""

__version__ = "0.1.0"

from .cf import Frequency, GaussSampler, KHINCHIN, LEVY
from .coding import Letter, Word, count_words, enumerate_words
from .spectrum import Band, BandTree, build_band_tree

__all__ = [
    "__version__",
    "Frequency",
    "GaussSampler",
    "KHINCHIN",
    "LEVY",
    "Letter",
    "Word",
    "count_words",
    "enumerate_words",
    "Band",
    "BandTree",
    "build_band_tree",
]
