"""Closed-form time evolution of world sizes and the coherence race.

With decoherence events at rate ``r`` the number of events by time ``t`` is
``N = r t``: the median world shrinks exponentially while the log-size
spread grows only as ``sqrt(r t)``.  Whether a small world gets mangled is a
race between its residual coherence ``eps(t)`` and its relative size
``delta(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr

from .errors import EmptyResultError, OnsetIndeterminateError
from .lognormal import LognormalSpec, binary_moments, log_count_above, log_world_density
from .mangling import TransitionRegion, log_unmangled_fraction, unmangled_count
from .numerics import logsumexp


@dataclass(frozen=True)
class PopulationSpec:
    rate: float
    per_event_log_median_measure: float
    per_event_sigma: float
    log_measure: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.per_event_sigma < 0:
            raise ValueError("per-event sigma must be non-negative")

    @classmethod
    def binary(cls, p: float, rate: float = 1.0, log_measure: float = 0.0) -> "PopulationSpec":
        log_mhat1, sigma1 = binary_moments(p)
        return cls(rate, log_mhat1, sigma1, log_measure)


def median_trajectory(pop: PopulationSpec, t) -> np.ndarray | float:
    """``ln m~(t) = r t (ln m^_1 - sigma_1**2)``."""
    n = pop.rate * np.asarray(t, dtype=float)
    out = n * (pop.per_event_log_median_measure - pop.per_event_sigma**2)
    return float(out) if np.ndim(out) == 0 else out


def sigma_trajectory(pop: PopulationSpec, t) -> np.ndarray | float:
    out = pop.per_event_sigma * np.sqrt(pop.rate * np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def median_measure_trajectory(pop: PopulationSpec, t) -> np.ndarray | float:
    """``ln m^(t)`` including the population's share of measure."""
    out = pop.rate * np.asarray(t, dtype=float) * pop.per_event_log_median_measure + pop.log_measure
    return float(out) if np.ndim(out) == 0 else out


def spec_at(pop: PopulationSpec, t: float) -> LognormalSpec:
    return LognormalSpec(median_measure_trajectory(pop, t), sigma_trajectory(pop, t), pop.log_measure)


@dataclass(frozen=True)
class CoherenceModel:
    """Residual coherence ``eps(t)``.

    Exponential decay from ``initial`` at ``decay_rate`` that either levels
    off at ``floor`` or, past ``crossover``, turns into a power-law tail with
    ``tail_exponent``.
    """

    initial: float
    decay_rate: float
    floor: float = 0.0
    tail_exponent: Optional[float] = None
    crossover: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.initial <= 1.0):
            raise ValueError("initial coherence must lie in (0, 1]")
        if not self.decay_rate > 0:
            raise ValueError("decay rate must be positive")
        if not (0.0 <= self.floor <= self.initial):
            raise ValueError("floor must lie in [0, initial]")
        if (self.tail_exponent is None) != (self.crossover is None):
            raise ValueError("tail_exponent and crossover go together")
        if self.tail_exponent is not None and (self.tail_exponent <= 0 or self.crossover <= 0):
            raise ValueError("tail_exponent and crossover must be positive")

    @property
    def has_tail(self) -> bool:
        return self.tail_exponent is not None


def log_coherence_at(model: CoherenceModel, t) -> np.ndarray | float:
    t = np.asarray(t, dtype=float)
    log_eps = math.log(model.initial) - model.decay_rate * t
    if model.has_tail:
        t0 = model.crossover
        with np.errstate(divide="ignore"):
            tail = math.log(model.initial) - model.decay_rate * t0 - model.tail_exponent * np.log(np.maximum(t, t0) / t0)
        log_eps = np.where(t > t0, tail, log_eps)
    if model.floor > 0:
        log_eps = np.maximum(log_eps, math.log(model.floor))
    return float(log_eps) if np.ndim(log_eps) == 0 else log_eps


def coherence_at(model: CoherenceModel, t) -> np.ndarray | float:
    return np.exp(log_coherence_at(model, t))


def log_relative_size(pop: PopulationSpec, t, z: float, z_ref: float = 0.0):
    """``ln delta`` for a world at z-score ``z`` against one at ``z_ref``.

    ``delta**2`` is the size ratio, so ``ln delta = (z - z_ref) sigma(t) / 2``.
    """
    return 0.5 * (z - z_ref) * sigma_trajectory(pop, t)


def mangling_onset(
    pop: PopulationSpec,
    model: CoherenceModel,
    z: float,
    horizon: float = 1e7,
    z_ref: float = 0.0,
    grid_points: int = 4096,
    rtol: float = 1e-6,
) -> Optional[float]:
    """Earliest time at which coherence reaches the relative size, or ``None``.

    ``None`` means the gap is still widening at the horizon, so no crossing
    is coming.  If the gap is closing but has not closed by the horizon the
    answer is undetermined and :class:`OnsetIndeterminateError` is raised.
    """
    if z >= z_ref:
        raise ValueError("z must sit below the reference world")

    def gap(t):
        return log_coherence_at(model, t) - log_relative_size(pop, t, z, z_ref)

    if gap(0.0) >= 0:
        return 0.0
    start = min(1e-6, horizon * 1e-9)
    grid = np.concatenate([[0.0], np.geomspace(start, horizon, grid_points)])
    g = gap(grid)
    hits = np.flatnonzero(g >= 0)
    if hits.size == 0:
        if g[-1] > g[-2]:
            raise OnsetIndeterminateError(
                f"coherence is closing on the relative size but has not reached it by t={horizon:g}"
            )
        return None
    lo, hi = grid[hits[0] - 1], grid[hits[0]]
    return float(brentq(gap, lo, hi, xtol=1e-12, rtol=rtol))


def _combined_median(mu: np.ndarray, sig: np.ndarray, log_w: np.ndarray, iters: int = 200) -> np.ndarray:
    """Vectorised bisection for the size splitting total measure in half.

    Rows are time points, columns are populations.  The net measure above a
    trial cutoff is written as a bulk term (each population counted whole on
    the side its median falls) minus twice the tails that spill across.  When
    two populations of equal measure sit far apart the bulk cancels exactly
    and only the tails, compared as logs, say where the balance point is.
    """
    spread = np.maximum(sig.max(axis=1), 1.0)
    lo = mu.min(axis=1) - 40.0 * spread
    hi = mu.max(axis=1) + 40.0 * spread
    point = sig == 0
    safe_sig = np.where(point, 1.0, sig)
    w = np.exp(log_w - log_w.max())
    lw = np.log(w)

    def net_above(c):
        x = (c[:, None] - mu) / safe_sig
        side = np.where(x < 0, 1.0, -1.0)
        with np.errstate(divide="ignore"):
            tail = np.where(point, -np.inf, log_ndtr(-np.abs(x))) + lw
        bulk = np.sum(side * w, axis=1)
        tail_up = logsumexp(np.where(side > 0, tail, -np.inf), axis=1)
        tail_down = logsumexp(np.where(side < 0, tail, -np.inf), axis=1)
        spill = np.exp(tail_up) - np.exp(tail_down)
        with np.errstate(invalid="ignore"):
            return np.where(bulk != 0, bulk - 2.0 * spill, np.sign(tail_down - tail_up))

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        heavy_above = net_above(mid) > 0
        lo = np.where(heavy_above, mid, lo)
        hi = np.where(heavy_above, hi, mid)
    return 0.5 * (lo + hi)


def _log_unmangled(pop: PopulationSpec, t: float, region: TransitionRegion) -> float:
    sigma = sigma_trajectory(pop, t)
    mhat = median_measure_trajectory(pop, t)
    if sigma == 0:
        # every world has the same size; count = measure / size
        return float(pop.log_measure - mhat + log_unmangled_fraction(region, mhat))
    spec = LognormalSpec(mhat, sigma, pop.log_measure)
    if region.shape == "step":
        return log_count_above(spec, region.midpoint)
    dens = lambda x: log_world_density(spec, x)  # noqa: E731
    return unmangled_count(dens, region, center=mhat).log


def rate_selection(
    slow: PopulationSpec,
    fast: PopulationSpec,
    t_grid: Sequence[float],
    region: Optional[TransitionRegion] = None,
    offset: float = 0.0,
    width: float = 0.0,
    shape: str = "step",
    scale: Optional[float] = None,
) -> list[tuple[float, float]]:
    """Share of unmangled worlds that belong to the slow population.

    With ``region`` given it is held fixed.  Otherwise the region follows
    the combined median measure of both populations (shifted by ``offset``
    ln-units) and is rebuilt at every time.
    """
    if slow.rate > fast.rate:
        raise ValueError("slow population must not have the higher rate")
    t = np.asarray(list(t_grid), dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    pops = (slow, fast)
    if region is None:
        mu = np.column_stack([median_measure_trajectory(p, t) for p in pops])
        sig = np.column_stack([sigma_trajectory(p, t) for p in pops])
        centres = _combined_median(mu, sig, np.array([p.log_measure for p in pops])) + offset
        regions = [TransitionRegion.around(c, width, shape, scale) for c in centres]
    else:
        regions = [region] * len(t)

    out = []
    for ti, reg in zip(t, regions):
        logs = np.array([_log_unmangled(p, ti, reg) for p in pops])
        total = logsumexp(logs)
        if total == -math.inf:
            raise EmptyResultError(f"both populations fully mangled at t={ti:g}: cutoff too high")
        out.append((float(ti), float(np.exp(logs[0] - total))))
    return out
