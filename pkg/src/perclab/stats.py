"""Small statistics layer for the Monte Carlo estimators.

Proportions get exact binomial (Clopper-Pearson) intervals via the Beta
quantiles; sample means get normal-approximation intervals from the sample
variance.  Estimates travel as EstimateSeries records so every number in an
artifact file carries its sample count and half-width with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sps

DEFAULT_CONF = 0.95


def clopper_pearson(k: int, n: int, conf: float = DEFAULT_CONF) -> tuple[float, float]:
    """Exact binomial CI for k successes in n trials."""
    if n <= 0:
        raise ValueError("need at least one trial")
    alpha = 1.0 - conf
    lo = 0.0 if k == 0 else float(sps.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(sps.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class EstimateSeries:
    """A point estimate (or one point of a curve) with its uncertainty.

    ci_halfwidth is half the CI length; ci_lo/ci_hi keep the asymmetric
    exact interval when the binomial method was used.  `method` records how
    the interval was computed, and extra carries estimator-specific
    context (window radius, truncation fraction, ...).
    """

    value: float
    samples: int
    ci_lo: float
    ci_hi: float
    method: str
    extra: dict = field(default_factory=dict)

    @property
    def ci_halfwidth(self) -> float:
        return (self.ci_hi - self.ci_lo) / 2.0

    def as_dict(self) -> dict:
        d = {
            "value": self.value,
            "samples": self.samples,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "method": self.method,
        }
        d.update(self.extra)
        return d


def proportion_estimate(k: int, n: int, conf: float = DEFAULT_CONF, **extra) -> EstimateSeries:
    lo, hi = clopper_pearson(k, n, conf)
    return EstimateSeries(k / n, n, lo, hi, "clopper-pearson", dict(extra))


def mean_estimate(values: np.ndarray, conf: float = DEFAULT_CONF, **extra) -> EstimateSeries:
    """Sample mean with a normal-approximation interval."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        raise ValueError("no samples")
    m = float(values.mean())
    if n == 1:
        return EstimateSeries(m, 1, m, m, "normal", dict(extra))
    se = float(values.std(ddof=1)) / np.sqrt(n)
    z = float(sps.norm.ppf(0.5 + conf / 2))
    return EstimateSeries(m, n, m - z * se, m + z * se, "normal", dict(extra))


@dataclass(frozen=True)
class CurvePoint:
    """One grid point of an estimated curve: x is p (or a scale n)."""

    x: float
    estimate: EstimateSeries

    def row(self) -> list:
        e = self.estimate
        return [self.x, e.value, e.ci_halfwidth, e.samples]


CURVE_HEADER = ["x", "estimate", "ci_halfwidth", "samples"]
