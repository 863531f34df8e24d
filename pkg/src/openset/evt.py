"""Weibull tail fitting and CDF evaluation.

Distances of correctly classified samples to their class centroid are
fitted on the largest values ("fit high"): the top ``tail_size`` distances
are shifted just above zero and a two-parameter Weibull is fitted by
maximum likelihood. The resulting CDF scores how extreme a new distance is
relative to the training tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateTail, InsufficientData

SHAPE_TOL = 1e-10
MAX_ITER = 200
SHAPE_LO = 1e-4
SHAPE_HI = 1e4


@dataclass(frozen=True)
class WeibullModel:
    """Two-parameter Weibull over (x - t), fitted to the largest distances.

    t is the translation (just below the smallest tail value), scale > 0
    and shape > 0 are the MLE parameters, tail_size is the requested tail
    length and n_fitted the number of samples actually used.
    """

    t: float
    scale: float
    shape: float
    tail_size: int
    n_fitted: int

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "lambda": self.scale,
            "k": self.shape,
            "tail_size": self.tail_size,
            "n_fitted": self.n_fitted,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "WeibullModel":
        return cls(
            t=float(obj["t"]),
            scale=float(obj["lambda"]),
            shape=float(obj["k"]),
            tail_size=int(obj["tail_size"]),
            n_fitted=int(obj["n_fitted"]),
        )


def _shape_equation(k: float, log_y: np.ndarray, mean_log: float) -> tuple[float, float]:
    """Profiled MLE stationarity equation g(k) and its derivative.

    g(k) = E_w[ln y] - 1/k - mean(ln y) with weights w_i ∝ y_i^k.
    g is strictly increasing in k (g' = Var_w[ln y] + 1/k^2 > 0), so the
    root is unique and bisection always converges.
    """
    z = k * log_y
    z = z - z.max()
    w = np.exp(z)
    w /= w.sum()
    mean_w = float(np.dot(w, log_y))
    var_w = float(np.dot(w, (log_y - mean_w) ** 2))
    g = mean_w - 1.0 / k - mean_log
    g_prime = var_w + 1.0 / (k * k)
    return g, g_prime


def _solve_shape(log_y: np.ndarray) -> float:
    mean_log = float(log_y.mean())
    lo, hi = SHAPE_LO, SHAPE_HI
    g_hi, _ = _shape_equation(hi, log_y, mean_log)
    if g_hi <= 0.0:
        # spread of the tail is below float resolution
        raise DegenerateTail("tail values are numerically indistinguishable")
    k = 1.0
    for _ in range(MAX_ITER):
        g, g_prime = _shape_equation(k, log_y, mean_log)
        if abs(g) < SHAPE_TOL:
            break
        if g > 0.0:
            hi = k
        else:
            lo = k
        step = k - g / g_prime
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        if abs(step - k) < 1e-15 * max(1.0, k):
            k = step
            break
        k = step
    return k


def fit_weibull_tail(distances: Sequence[float], tail_size: int) -> WeibullModel:
    """Fit a Weibull model to the largest ``tail_size`` distances.

    Sorts descending, keeps the top min(tail_size, n) values, translates
    them by t = min(tail) - margin with margin = 1e-6 * max(1, |min(tail)|)
    so every fitted point is strictly positive, and solves the shape MLE by
    Newton iteration with a guaranteed bisection fallback; the scale
    follows in closed form.

    Raises InsufficientData for fewer than 2 usable samples and
    DegenerateTail when all tail values are equal.
    """
    x = np.asarray(list(distances), dtype=np.float64)
    if x.size < 2:
        raise InsufficientData(f"need at least 2 distances, got {x.size}")
    if tail_size < 2:
        raise InsufficientData(f"tail_size must be >= 2, got {tail_size}")
    m = int(min(tail_size, x.size))
    tail = np.sort(x)[-m:]
    tail_min = float(tail[0])
    if tail_min == float(tail[-1]):
        raise DegenerateTail(f"all {m} tail values equal {tail_min}")
    margin = 1e-6 * max(1.0, abs(tail_min))
    t = tail_min - margin
    log_y = np.log(tail - t)
    shape = _solve_shape(log_y)
    # scale^shape = mean(y^shape), evaluated in log space for stability
    z = shape * log_y
    z_max = float(z.max())
    log_mean_pow = z_max + math.log(float(np.exp(z - z_max).sum())) - math.log(m)
    scale = math.exp(log_mean_pow / shape)
    return WeibullModel(t=t, scale=scale, shape=shape, tail_size=int(tail_size), n_fitted=m)


def weibull_cdf(model: WeibullModel, x: float) -> float:
    """CDF of the fitted model: 0 for x <= t, else 1 - exp(-((x-t)/scale)^shape)."""
    if x <= model.t:
        return 0.0
    log_z = model.shape * (math.log(x - model.t) - math.log(model.scale))
    if log_z > 700.0:
        return 1.0
    return -math.expm1(-math.exp(log_z))


def weibull_survival(model: WeibullModel, x: float) -> float:
    """1 - cdf, kept in exp form so it stays positive far beyond where the
    CDF saturates to 1.0 in double precision."""
    if x <= model.t:
        return 1.0
    log_z = model.shape * (math.log(x - model.t) - math.log(model.scale))
    if log_z > 709.0:
        return 0.0
    return math.exp(-math.exp(log_z))
