"""Input validation helpers used by the estimators and the functional API."""

import numpy as np
from sklearn.utils.validation import check_array

from .errors import WheelSpeedError


def check_sequence(x, *, name="signal", min_length=1):
    """Return ``x`` as a finite 1-d float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise WheelSpeedError("bad-shape", f"{name} must be 1-d, got shape {arr.shape}")
    if arr.size < min_length:
        raise WheelSpeedError("empty-input" if min_length <= 1 else "signal-too-short",
                              f"{name} has {arr.size} samples, need {min_length}")
    if not np.all(np.isfinite(arr)):
        raise WheelSpeedError("non-finite-input", name)
    return arr


def check_features(X, n_features=None, *, name="X"):
    """2-d finite float array with an optional fixed column count."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name)
    if n_features is not None and X.shape[1] != n_features:
        raise WheelSpeedError(
            "bad-prediction-shape" if name == "prediction" else "bad-shape",
            f"{name} has {X.shape[1]} columns, expected {n_features}",
        )
    return X


def check_groups(groups, n_samples):
    """Validate per-sample group labels and return contiguous runs.

    Groups identify maneuvers; each maneuver must occupy one contiguous run of
    samples. Returns a list of ``(group_id, start, end)`` tuples.
    """
    if groups is None:
        return [("all", 0, n_samples)]
    groups = np.asarray(groups)
    if groups.shape != (n_samples,):
        raise WheelSpeedError("bad-shape", f"groups must have shape ({n_samples},)")
    if n_samples == 0:
        return []
    change = np.flatnonzero(groups[1:] != groups[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [n_samples]])
    runs = [(str(groups[s]), int(s), int(e)) for s, e in zip(starts, ends)]
    ids = [r[0] for r in runs]
    if len(set(ids)) != len(ids):
        raise WheelSpeedError("non-contiguous-groups", "a maneuver id appears in more than one run")
    return runs


def check_positive(value, name, code):
    if not np.isfinite(value) or value <= 0:
        raise WheelSpeedError(code, f"{name} must be > 0, got {value}")
    return float(value)
