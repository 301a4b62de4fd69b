"""Input validation helpers used across the package."""

import numpy as np

from .errors import DataError


def as_float_matrix(X, name="X", require_finite=True):
    """Coerce to a 2-D float64 array, raising DataError on bad shape or values."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError(f"{name} must be a 2-D matrix, got ndim={X.ndim}")
    if require_finite and not np.all(np.isfinite(X)):
        raise DataError(f"{name} contains non-finite values")
    return X


def as_float_vector(x, name="x", require_finite=True):
    """Coerce to a 1-D float64 array, raising DataError on bad shape or values."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError(f"{name} must be a 1-D vector, got ndim={x.ndim}")
    if require_finite and not np.all(np.isfinite(x)):
        raise DataError(f"{name} contains non-finite values")
    return x


def check_labels(y, name="y"):
    """Validate labels are in {-1, +1} and return them as an int8 array."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError(f"{name} must be a 1-D vector")
    values = np.unique(y)
    if not np.all(np.isin(values, (-1, 1))):
        raise DataError(f"{name} must contain only -1/+1 labels, got values {values}")
    return y.astype(np.int8)


def check_both_classes(y, name="y"):
    """Validate that both -1 and +1 are present."""
    y = check_labels(y, name)
    if not (np.any(y == 1) and np.any(y == -1)):
        raise DataError(f"{name} must contain both classes")
    return y


def check_square(K, name="K"):
    """Validate a square 2-D matrix."""
    K = as_float_matrix(K, name)
    if K.shape[0] != K.shape[1]:
        raise DataError(f"{name} must be square, got shape {K.shape}")
    return K


def check_symmetric(K, name="K", atol=1e-8):
    """Validate a square symmetric matrix within an absolute tolerance."""
    K = check_square(K, name)
    if not np.allclose(K, K.T, atol=atol, rtol=0.0):
        raise DataError(f"{name} must be symmetric within atol={atol}")
    return K


def positive_scalar(value, name):
    """Validate a strictly positive finite scalar."""
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise DataError(f"{name} must be a positive finite scalar, got {value}")
    return value
