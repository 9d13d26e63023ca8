"""Exception types shared across the package."""

import numpy as np


class InputError(ValueError):
    """Rejected input: bad dimensions, parameters or labels."""


class FormatError(InputError):
    """A text or image file could not be parsed."""


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorization met a non-positive pivot."""
