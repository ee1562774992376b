"""Semi-generative modelling for covariate-shift adaptation with cause and effect features."""

from semigen.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
