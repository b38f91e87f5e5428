"""Input validation helpers used by the estimators and functional API."""
import math
import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import EmptyDataError, InvalidParameterError
from .mechanisms import PrivacyBudget


def check_column(values, *, allow_empty=False, name="values"):
    """Return ``values`` as a finite 1-d float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size == 0 and not allow_empty:
        raise EmptyDataError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains NaN or infinite entries")
    return arr


def check_matrix(X, *, name="X"):
    """2-d float array with at least one row; 1-d input becomes one column."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] == 0:
        raise EmptyDataError(f"{name} has no rows")
    return check_array(X, dtype=float, ensure_all_finite=True, input_name=name)


def check_n_bins(b):
    if isinstance(b, bool) or not isinstance(b, numbers.Integral):
        raise InvalidParameterError(f"number of bins must be an integer, got {b!r}")
    if b < 1:
        raise InvalidParameterError(f"number of bins must be >= 1, got {b}")
    return int(b)


def check_budget(budget):
    """Accept a PrivacyBudget or a bare epsilon (float or the string 'inf')."""
    if isinstance(budget, PrivacyBudget):
        return budget
    if isinstance(budget, str):
        budget = parse_epsilon(budget)
    return PrivacyBudget(float(budget))


def parse_epsilon(value):
    if isinstance(value, str):
        if value.strip().lower() in {"inf", "infinity", "∞"}:
            return math.inf
        return float(value)
    return float(value)
