"""Small input-validation helpers shared by the solver API, the estimator, and the CLI."""

import numpy as np

from .errors import DimensionMismatch


def as_float_array(a, name="array"):
    """Return ``a`` as a C-contiguous float64 array, rejecting non-finite entries."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def check_field(u, n_nodes, n_components, name="field"):
    """Validate a nodal field and return it with shape (n_nodes, n_components)."""
    out = as_float_array(u, name)
    if out.ndim == 1:
        out = out.reshape(-1, 1)
    if out.shape != (n_nodes, n_components):
        raise DimensionMismatch(
            f"{name} has shape {np.shape(u)}, expected ({n_nodes}, {n_components})"
        )
    return out


def check_positive(value, name):
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_in_open_interval(value, lo, hi, name):
    value = float(value)
    if not (lo < value < hi):
        raise ValueError(f"{name} must lie in ({lo}, {hi}), got {value}")
    return value
