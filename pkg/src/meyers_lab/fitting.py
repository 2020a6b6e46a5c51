"""Log-log least squares used by sweeps and the experiment harness."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    slope: float
    intercept: float
    r2: float
    samples: int


def fit_loglog(pairs) -> FitResult:
    """Least-squares slope of log(value) against log(scale).

    Needs at least 3 strictly positive pairs.
    """
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise FitError("need at least 3 (scale, value) pairs")
    if np.any(arr <= 0):
        raise FitError("scales and values must be positive")
    x = np.log(arr[:, 0])
    y = np.log(arr[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return FitResult(float(slope), float(intercept), r2, len(arr))
