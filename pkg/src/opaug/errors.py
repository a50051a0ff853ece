"""Exception types raised by the library."""

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix that must be inverted is singular to working precision."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class DegenerateAugmentationError(ArithmeticError):
    """The augmentation matrix has zero expected semi-norm, so no optimal factor exists."""


class NoiseModelError(RuntimeError):
    """A bootstrap noise model produced too many singular draws."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or out of range."""
