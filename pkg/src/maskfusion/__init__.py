"""Time-frequency mask fusion toolkit for speech enhancement.

Computes oracle IRM and TBM masks, fuses them with a two-parameter
(delta, gamma) rule, trains a small two-head mask estimator, and
evaluates enhancement on synthetic mixtures.
"""
from ._kernels import BACKEND as FFT_BACKEND

__version__ = "0.1.0"

__all__ = ["FFT_BACKEND", "__version__"]
