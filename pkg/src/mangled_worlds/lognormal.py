"""Analytic lognormal picture of world sizes.

Both densities here are per unit ``ln m``: the number of worlds (or the
amount of measure) whose log size falls in ``d ln m``.  ``local_power`` is
the exception; it reports the logarithmic slope of the density per unit
``m``, which is one less than the slope of the per-``ln m`` density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr

from .branching import WorldEnsemble
from .errors import DegenerateDistributionError
from .numerics import LogValue, logsumexp

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LognormalSpec:
    """Measure is normal in ``ln m`` around ``log_median_measure``; worlds are
    normal around ``log_median_world``, ``sigma**2`` lower.

    ``log_total_measure`` is the log of the measure the population carries
    (0 for a whole unit-measure ensemble).
    """

    log_median_measure: float
    sigma: float
    log_total_measure: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DegenerateDistributionError(f"sigma must be positive, got {self.sigma}")

    @property
    def log_median_world(self) -> float:
        return self.log_median_measure - self.sigma**2

    @property
    def log_total_worlds(self) -> float:
        # measure = N * exp(ln m~ + sigma^2/2)
        return self.log_total_measure - self.log_median_world - 0.5 * self.sigma**2

    def at_z(self, z: float) -> float:
        """Log size ``z`` spreads above the median measure."""
        return self.log_median_measure + z * self.sigma


def binary_moments(p: float) -> tuple[float, float]:
    """Per-event ``(ln m^_1, sigma_1)`` for a binary split with weight ``p``."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie strictly between 0 and 1, got {p}")
    q = 1.0 - p
    log_mhat1 = p * math.log(p) + q * math.log(q)
    sigma1 = math.sqrt(p * q) * math.log(p / q)
    return log_mhat1, abs(sigma1)


def from_binary(n: int, p: float) -> LognormalSpec:
    log_mhat1, sigma1 = binary_moments(p)
    if sigma1 == 0.0:
        raise DegenerateDistributionError("p = 0.5 gives every world the same size (sigma = 0)")
    return LognormalSpec(n * log_mhat1, math.sqrt(n) * sigma1)


def from_ensemble(ensemble: WorldEnsemble) -> LognormalSpec:
    """Moment-matched spec: measure-weighted mean and spread of class log sizes."""
    w = ensemble.log_measures()
    total = logsumexp(w)
    weights = np.exp(w - total)
    mean = float(np.sum(weights * ensemble.log_size))
    var = float(np.sum(weights * (ensemble.log_size - mean) ** 2))
    if var <= 0:
        raise DegenerateDistributionError("ensemble has a single class size (sigma = 0)")
    return LognormalSpec(mean, math.sqrt(var), total)


def compose(*specs: LognormalSpec) -> LognormalSpec:
    """Spec after independent event groups: log medians add, variances add."""
    if not specs:
        raise ValueError("nothing to compose")
    return LognormalSpec(
        sum(s.log_median_measure for s in specs),
        math.sqrt(sum(s.sigma**2 for s in specs)),
        sum(s.log_total_measure for s in specs),
    )


def _log_normal_pdf(x, mu, sigma):
    return -0.5 * ((np.asarray(x, dtype=float) - mu) / sigma) ** 2 - math.log(sigma) - _LOG_SQRT_2PI


def log_world_density(spec: LognormalSpec, log_m, per: str = "ln_m"):
    """Vectorised log of :func:`world_density`."""
    out = spec.log_total_worlds + _log_normal_pdf(log_m, spec.log_median_world, spec.sigma)
    if per == "m":
        return out - np.asarray(log_m, dtype=float)
    if per != "ln_m":
        raise ValueError(f"per must be 'ln_m' or 'm', got {per!r}")
    return out


def log_measure_density(spec: LognormalSpec, log_m, per: str = "ln_m"):
    out = spec.log_total_measure + _log_normal_pdf(log_m, spec.log_median_measure, spec.sigma)
    if per == "m":
        return out - np.asarray(log_m, dtype=float)
    if per != "ln_m":
        raise ValueError(f"per must be 'ln_m' or 'm', got {per!r}")
    return out


def world_density(spec: LognormalSpec, log_m: float, per: str = "ln_m") -> LogValue:
    """Number of worlds per unit ``ln m`` (or per unit ``m`` with ``per="m"``).

    The total count is ``exp(-sigma**2/2) / m~`` times the carried measure,
    which is what makes ``m * world_density`` integrate to that measure.
    """
    return LogValue.from_log(float(log_world_density(spec, log_m, per)))


def measure_density(spec: LognormalSpec, log_m: float, per: str = "ln_m") -> LogValue:
    return LogValue.from_log(float(log_measure_density(spec, log_m, per)))


def log_count_above(spec: LognormalSpec, log_cutoff) -> np.ndarray | float:
    """Closed-form log number of worlds larger than the cutoff."""
    z = (spec.log_median_world - np.asarray(log_cutoff, dtype=float)) / spec.sigma
    out = spec.log_total_worlds + log_ndtr(z)
    return float(out) if np.ndim(out) == 0 else out


def local_power(spec: LognormalSpec, log_m: float) -> float:
    """``d ln D / d ln m`` with ``D`` per unit ``m``: -1 at m~, -2 at m^."""
    return (spec.log_median_measure - log_m) / spec.sigma**2 - 2.0


def deviation(spec: LognormalSpec, log_m: float) -> float:
    """Departure of the local power from the inverse-square law, ``alpha + 2``."""
    return (spec.log_median_measure - log_m) / spec.sigma**2


def z_score(spec: LognormalSpec, log_m: float) -> float:
    return (log_m - spec.log_median_measure) / spec.sigma


def power_law_count_above(
    log_cutoff: float,
    alpha: float = -2.0,
    log_k: float = 0.0,
    count_scale: float = 1.0,
    value_scale: float = 1.0,
) -> float:
    """Worlds above ``exp(log_cutoff)`` for ``D(m) = k m**alpha`` after scaling.

    ``count_scale`` multiplies how many worlds there are; ``value_scale``
    multiplies every world's size, ``D(m) -> D(m / lam) / lam``.  Integrated
    numerically in ``ln m`` so the two scalings are checked independently of
    the closed form.
    """
    if alpha >= -1:
        raise ValueError("alpha must be below -1 for a finite count above the cutoff")
    log_lam = math.log(value_scale)

    def integrand(u):
        # u = ln m - log_cutoff, so the integral starts at 0
        x = u + log_cutoff
        log_d = log_k + alpha * (x - log_lam) - log_lam
        return math.exp(log_d + x + math.log(count_scale))

    val, _ = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return val
