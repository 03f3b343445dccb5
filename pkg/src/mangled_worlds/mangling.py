"""Transition regions and the unmangled-world counts they induce.

A region is a band ``[log_m_low, log_m_high]`` in log world size with an
unmangled fraction gamma that climbs from ~0 below the band to ~1 above it.
The same region applies to every outcome.  Counting the surviving worlds
of each outcome gives the outcome shares that are compared with the Born
weights ``F * G``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, TextIO

import numpy as np

from .branching import BranchEvent, WorldEnsemble
from .errors import EmptyResultError, QuadratureError
from .lognormal import LognormalSpec, from_ensemble, log_world_density
from .numerics import LogValue, logsumexp

SHAPES = ("step", "linear", "logistic")
# logistic endpoints sit this many scales from the centre, so gamma(low) = 0.01
_LOGISTIC_HALF_SPAN = math.log(99.0)
# integrand is dropped once it falls this far below its running peak (1e-30)
_TAIL_DROP = 30.0 * math.log(10.0)

LogDensity = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TransitionRegion:
    log_m_low: float
    log_m_high: float
    shape: str = "step"
    scale: Optional[float] = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if math.isnan(self.log_m_low) or math.isnan(self.log_m_high):
            raise ValueError("region endpoints must not be NaN")
        if self.log_m_low > self.log_m_high:
            raise ValueError("log_m_low must not exceed log_m_high")
        if self.shape == "logistic":
            if self.scale is None or not self.scale > 0:
                raise ValueError("logistic shape needs a positive scale")
            if not math.isfinite(self.width):
                raise ValueError("logistic region needs finite endpoints")
            if self.width / 2 < self.scale * _LOGISTIC_HALF_SPAN - 1e-12:
                raise ValueError(
                    "logistic scale too wide for the region: gamma would exceed 0.01 at its bottom"
                )
        elif self.shape == "linear" and not math.isfinite(self.width):
            raise ValueError("linear region needs finite endpoints")

    @property
    def width(self) -> float:
        if self.log_m_low == self.log_m_high:
            return 0.0
        return self.log_m_high - self.log_m_low

    @property
    def midpoint(self) -> float:
        if self.log_m_low == self.log_m_high:
            return self.log_m_low
        return 0.5 * (self.log_m_low + self.log_m_high)

    @classmethod
    def step_at(cls, log_cutoff: float) -> "TransitionRegion":
        return cls(log_cutoff, log_cutoff, "step")

    @classmethod
    def unmangled(cls) -> "TransitionRegion":
        """gamma identically one: nothing is mangled."""
        return cls.step_at(-math.inf)

    @classmethod
    def logistic(cls, center: float, scale: float) -> "TransitionRegion":
        """Tightest logistic region for a given centre and scale.

        Keep ``scale`` below 1 for world counts: below the median measure the
        world density grows like ``1/m``, and a gentler tail than that lets
        tiny worlds dominate, so the count then hinges on where the lower
        tail is cut off.
        """
        half = scale * _LOGISTIC_HALF_SPAN
        return cls(center - half, center + half, "logistic", scale)

    @classmethod
    def around(cls, center: float, width: float = 0.0, shape: str = "step", scale: Optional[float] = None):
        if shape == "logistic" and scale is None:
            scale = width / (2 * _LOGISTIC_HALF_SPAN) if width > 0 else None
        return cls(center - width / 2, center + width / 2, shape, scale)

    @classmethod
    def at_z(cls, spec: LognormalSpec, z: float, width: float = 0.0, shape: str = "step", scale=None):
        """Region centred ``z`` spreads from the median measure of ``spec``."""
        return cls.around(spec.at_z(z), width, shape, scale)

    def breakpoints(self) -> list[float]:
        pts = {self.log_m_low, self.midpoint, self.log_m_high}
        return sorted(p for p in pts if math.isfinite(p))

    def support_start(self) -> float:
        """Lowest log size with gamma > 0 (``-inf`` for the logistic tail)."""
        if self.shape == "step":
            return self.midpoint
        if self.shape == "linear":
            return self.log_m_low if self.width > 0 else self.midpoint
        return -math.inf


def log_unmangled_fraction(region: TransitionRegion, log_m) -> np.ndarray:
    """Vectorised ``ln gamma``; ``-inf`` where every world is mangled."""
    x = np.asarray(log_m, dtype=float)
    mid = region.midpoint
    if region.shape == "step" or (region.shape == "linear" and region.width == 0):
        return np.where(x >= mid, 0.0, -np.inf)
    if region.shape == "linear":
        with np.errstate(divide="ignore", over="ignore"):
            frac = np.clip((x - region.log_m_low) / region.width, 0.0, 1.0)
            return np.log(frac)
    return -np.logaddexp(0.0, -(x - mid) / region.scale)


def unmangled_fraction(region: TransitionRegion, log_m: float) -> float:
    return float(np.exp(log_unmangled_fraction(region, log_m)))


def outcome_log_density(base: LogDensity, fraction: float, multiplicity: int) -> LogDensity:
    """Density of one outcome's children, per unit ``ln m``.

    Per unit ``m`` this is ``G D(m / F) / F``; in ``ln m`` coordinates the
    ``1/F`` Jacobian cancels, leaving a shift by ``ln F`` and a factor ``G``.
    """
    shift = math.log(fraction)
    log_g = math.log(multiplicity)

    def density(log_m):
        return log_g + base(np.asarray(log_m, dtype=float) - shift)

    return density


def outcome_density(base: LogDensity, fraction: float, multiplicity: int, log_m: float) -> LogValue:
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction {fraction} outside (0, 1]")
    if multiplicity < 1:
        raise ValueError("multiplicity must be at least 1")
    return LogValue.from_log(float(outcome_log_density(base, fraction, multiplicity)(log_m)))


def _simpson_log(f: LogDensity, a: float, b: float, panels: int) -> float:
    x = np.linspace(a, b, panels + 1)
    w = np.full(panels + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return logsumexp(f(x) + np.log(w)) + math.log((b - a) / (3.0 * panels))


def _find_edge(f: LogDensity, x0: float, direction: float, stop_at: float, peak: float) -> tuple[float, float]:
    """Walk from ``x0`` until the integrand is negligible or ``stop_at`` is hit."""
    step = 1.0
    x = x0
    for _ in range(80):
        nxt = x + direction * step
        if (direction > 0 and nxt >= stop_at) or (direction < 0 and nxt <= stop_at):
            return stop_at, peak
        val = float(f(np.array([nxt]))[0])
        if math.isnan(val):
            raise QuadratureError(f"integrand is NaN at log_m = {nxt}")
        peak = max(peak, val)
        x = nxt
        if val < peak - _TAIL_DROP:
            return x, peak
        step *= 1.5
    raise QuadratureError("integrand does not decay; density is not integrable over the region")


def unmangled_count(
    density: LogDensity,
    region: TransitionRegion,
    center: Optional[float] = None,
    rtol: float = 1e-6,
    max_panels: int = 1 << 20,
) -> LogValue:
    """``ln`` of the integral of ``gamma * density`` over ``ln m``.

    ``density`` maps an array of log sizes to log densities per unit
    ``ln m``.  The range runs from the bottom of gamma's support (ten widths
    under the region for the logistic tail) up to where the integrand has
    fallen 1e-30 below its peak.  Panels double until the log of the
    result moves by less than ``rtol``.
    """

    def integrand(x):
        return np.asarray(density(x), dtype=float) + log_unmangled_fraction(region, x)

    support = region.support_start()
    if region.shape == "logistic":
        support = region.log_m_low - 10.0 * max(region.width, 1.0)
    if center is None:
        center = region.midpoint if math.isfinite(region.midpoint) else 0.0
    x0 = max(center, support)
    if not math.isfinite(x0):
        raise QuadratureError("cannot place the integration range: region lies at +inf")
    peak = float(integrand(np.array([x0]))[0])
    hi, peak = _find_edge(integrand, x0, +1.0, math.inf, peak)
    lo, peak = _find_edge(integrand, x0, -1.0, support, peak)
    if not math.isfinite(peak):
        return LogValue.zero()

    cuts = [lo] + [p for p in region.breakpoints() if lo < p < hi] + [hi]
    pieces = [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]
    panels = 64
    prev = None
    while panels <= max_panels:
        total = logsumexp([_simpson_log(integrand, a, b, panels) for a, b in pieces])
        if prev is not None and (
            total == prev == -math.inf or abs(total - prev) < rtol
        ):
            return LogValue.from_log(total)
        prev = total
        panels *= 2
    raise QuadratureError(f"quadrature did not settle to {rtol} within {max_panels} panels")


def unmangled_count_exact(
    ensemble: WorldEnsemble,
    region: TransitionRegion,
    class_filter: Optional[Callable[[str], bool]] = None,
    log_fraction: float = 0.0,
    log_multiplicity: float = 0.0,
) -> LogValue:
    """Exact class sum of ``gamma(size) * count``.

    ``log_fraction`` and ``log_multiplicity`` shift every class as if each
    world had been split once more by a single outcome.
    """
    sizes = ensemble.log_size + log_fraction
    terms = ensemble.log_count + log_multiplicity + log_unmangled_fraction(region, sizes)
    if class_filter is not None:
        keep = np.array([class_filter(lbl) for lbl in ensemble.labels], dtype=bool)
        terms = terms[keep]
    return LogValue.from_log(logsumexp(terms))


@dataclass(frozen=True)
class ShareRow:
    label: str
    fraction: float
    multiplicity: int
    share: float
    log_unmangled: float = math.nan

    @property
    def born_weight(self) -> float:
        return self.fraction * self.multiplicity

    @property
    def deviation(self) -> float:
        return self.share - self.born_weight


def _normalise(event: BranchEvent, log_counts: Iterable[float]) -> list[ShareRow]:
    logs = np.asarray(list(log_counts), dtype=float)
    total = logsumexp(logs)
    if total == -math.inf:
        raise EmptyResultError("every world is mangled: the cutoff sits above all worlds")
    shares = np.exp(logs - total)
    return [
        ShareRow(o.label, o.fraction, o.multiplicity, float(s), float(lc))
        for o, s, lc in zip(event.outcomes, shares, logs)
    ]


def outcome_shares(event: BranchEvent, background: WorldEnsemble, region: TransitionRegion) -> list[ShareRow]:
    """Fraction of unmangled worlds that saw each outcome, by exact class sums.

    Each background class is split by the event; outcome ``k`` children have
    size ``m F_k`` and there are ``G_k`` of them per parent.
    """
    return _normalise(
        event,
        (
            unmangled_count_exact(background, region, None, math.log(o.fraction), math.log(o.multiplicity)).log
            for o in event.outcomes
        ),
    )


def outcome_shares_at_z(
    event: BranchEvent,
    background: WorldEnsemble,
    z: float,
    width: float = 0.0,
    shape: str = "step",
    scale: Optional[float] = None,
) -> list[ShareRow]:
    """:func:`outcome_shares` with the region placed by z-score on the background."""
    spec = from_ensemble(background)
    return outcome_shares(event, background, TransitionRegion.at_z(spec, z, width, shape, scale))


def outcome_shares_lognormal(event: BranchEvent, spec: LognormalSpec, region: TransitionRegion) -> list[ShareRow]:
    """Same shares from the smooth lognormal density, by quadrature."""
    base = lambda x: log_world_density(spec, x)  # noqa: E731
    counts = []
    for o in event.outcomes:
        dens = outcome_log_density(base, o.fraction, o.multiplicity)
        counts.append(unmangled_count(dens, region, center=spec.log_median_measure).log)
    return _normalise(event, counts)


def power_law_shares(alpha: float, event: BranchEvent) -> list[ShareRow]:
    """Shares for ``D ~ m**alpha`` with a sharp lower cutoff: ``G F**-(1 + alpha)``."""
    if alpha >= -1:
        raise ValueError(f"alpha must be below -1, got {alpha}")
    logs = [math.log(o.multiplicity) - (1.0 + alpha) * math.log(o.fraction) for o in event.outcomes]
    return _normalise(event, logs)


def write_shares_csv(rows: Iterable[ShareRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["outcome_label", "F", "G", "share", "born_weight", "deviation"])
    for r in rows:
        w.writerow([r.label, f"{r.fraction:.15g}", r.multiplicity, f"{r.share:.15g}",
                    f"{r.born_weight:.15g}", f"{r.deviation:.15g}"])
