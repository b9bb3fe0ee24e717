"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array, column_or_1d

from .exceptions import ConfigError, DataError


def check_times(time, *, name="time"):
    time = column_or_1d(check_array(time, ensure_2d=False, dtype=np.float64,
                                    ensure_all_finite=True), warn=False)
    if time.size and np.any(time <= 0):
        raise DataError(f"{name} must be strictly positive")
    return time


def check_events(event, n=None):
    event = column_or_1d(check_array(event, ensure_2d=False, dtype=None), warn=False)
    if event.dtype.kind == "b":
        out = event.astype(bool)
    else:
        vals = np.asarray(event, dtype=np.float64)
        if not np.all((vals == 0) | (vals == 1)):
            raise DataError("event indicators must be 0 or 1")
        out = vals.astype(bool)
    if n is not None and out.shape[0] != n:
        raise DataError(f"event has length {out.shape[0]}, expected {n}")
    return out


def check_survival_arrays(time, event):
    time = check_times(time)
    event = check_events(event, time.shape[0])
    if time.shape[0] == 0:
        raise DataError("empty sample")
    return time, event


def split_target(y):
    """Accept y as (n, 2) [time, event] or a structured array with those fields."""
    y_arr = np.asarray(y)
    if y_arr.dtype.names:
        names = y_arr.dtype.names
        tcol = "time" if "time" in names else names[1]
        ecol = "event" if "event" in names else names[0]
        return check_survival_arrays(y_arr[tcol], y_arr[ecol])
    y_arr = check_array(y, ensure_2d=True, dtype=np.float64)
    if y_arr.shape[1] != 2:
        raise DataError("y must have two columns: time, event")
    return check_survival_arrays(y_arr[:, 0], y_arr[:, 1])


def check_fraction(value, name, *, closed_low=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a real number")
    low_ok = value >= 0 if closed_low else value > 0
    if not (low_ok and value < 1):
        interval = "[0, 1)" if closed_low else "(0, 1)"
        raise ConfigError(f"{name} must lie in {interval}, got {value}")
    return float(value)


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
