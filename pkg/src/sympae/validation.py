"""Input validation helpers on top of :func:`sklearn.utils.check_array`."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionError


def check_states(X, n_features=None, ensure_min_samples=1):
    """Validate a ``(n_samples, n_features)`` float64 array of states."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=ensure_min_samples)
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_even_features(X):
    if X.shape[1] % 2:
        raise DimensionError(f"phase-space data needs an even number of features, got {X.shape[1]}")
    return X

