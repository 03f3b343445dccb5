"""Counted events against a background of uncounted ones.

A world's history is ``N`` counted binary events (``M`` of them "up") and
``n_b`` background events (``M'`` up).  Worlds sharing ``M`` form one
frequency line: as ``M'`` varies the line traces log count against log size.
Lines close to the Born frequency dominate their neighbours over a wide
band of sizes, which is what the crossing and window computations measure.

Two count models are available.  ``"exact"`` uses ``ln C(n, k)`` through
log-gamma, which also interpolates between integer classes.  ``"gaussian"``
replaces every binomial coefficient by its de Moivre-Laplace normal
approximation; the crossing values -5956 and -6384 quoted for the standard
configuration are reproduced by that model, while the exact model puts them
at -5972.6 and -6396.9.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence, TextIO

import numpy as np
from scipy.optimize import bisect

from .artifacts import comment_line, config_digest, fmt
from .errors import EmptyResultError, NoCrossingError
from .lognormal import LognormalSpec, compose, from_binary
from .mangling import TransitionRegion, log_unmangled_fraction
from .numerics import LN10, log_binomial_array, log_binomial_gaussian, logsumexp

COUNT_MODELS = ("exact", "gaussian")
DEFAULT_FREQUENCIES = tuple(round(0.5 + 0.05 * i, 2) for i in range(9))
FIGURE1_HEADER = ["config_hash", "f", "m_prime", "log_size", "log_count"]


def _log_count_fn(model: str):
    if model == "exact":
        return log_binomial_array
    if model == "gaussian":
        def gaussian(n, k):
            # a zero-event binomial has one world; the normal form is undefined there
            return log_binomial_gaussian(n, k) if n > 0 else log_binomial_array(n, k)
        return gaussian
    raise ValueError(f"count model must be one of {COUNT_MODELS}, got {model!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    n_counted: int = 100
    n_background: int = 10_000
    p: float = 0.7
    counted_frequencies: tuple = DEFAULT_FREQUENCIES
    background_p: Optional[float] = None
    count_model: str = "exact"
    region: Optional[TransitionRegion] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "counted_frequencies", tuple(float(f) for f in self.counted_frequencies))
        if int(self.n_counted) != self.n_counted or self.n_counted < 1:
            raise ValueError("n_counted must be a positive integer")
        if int(self.n_background) != self.n_background or self.n_background < 0:
            raise ValueError("n_background must be a non-negative integer")
        for prob in (self.p, self.bg_p):
            if not (0.0 < prob < 1.0):
                raise ValueError(f"probabilities must lie strictly between 0 and 1, got {prob}")
        if self.count_model not in COUNT_MODELS:
            raise ValueError(f"count model must be one of {COUNT_MODELS}")
        for f in self.counted_frequencies:
            m = f * self.n_counted
            if not (0 <= f <= 1) or abs(m - round(m)) > 1e-9:
                raise ValueError(f"frequency {f} is not of the form M/{self.n_counted}")

    @property
    def bg_p(self) -> float:
        return self.p if self.background_p is None else self.background_p

    @property
    def counted_classes(self) -> list[int]:
        return [int(round(f * self.n_counted)) for f in self.counted_frequencies]

    def counted_log_size(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        return m * math.log(self.p) + (self.n_counted - m) * math.log1p(-self.p)

    def background_log_size(self, m_prime) -> np.ndarray:
        m_prime = np.asarray(m_prime, dtype=float)
        return m_prime * math.log(self.bg_p) + (self.n_background - m_prime) * math.log1p(-self.bg_p)

    def log_count(self, n, k):
        return _log_count_fn(self.count_model)(n, k)

    def as_params(self) -> dict:
        d = asdict(self)
        d.pop("region")
        d["background_p"] = self.bg_p
        d["counted_frequencies"] = list(self.counted_frequencies)
        if self.region is not None:
            d["region"] = asdict(self.region)
        return d

    def digest(self) -> str:
        return config_digest(self.as_params())


def born_log_size(config: ExperimentConfig) -> float:
    """Joint log size of worlds showing exactly the Born frequency everywhere."""
    def per_event(prob):
        return prob * math.log(prob) + (1.0 - prob) * math.log1p(-prob)

    return config.n_counted * per_event(config.p) + config.n_background * per_event(config.bg_p)


def joint_spec(config: ExperimentConfig) -> LognormalSpec:
    """Lognormal summary of all ``N + n_b`` events (anchor for z-score cutoffs)."""
    specs = [from_binary(config.n_counted, config.p)]
    if config.n_background:
        specs.append(from_binary(config.n_background, config.bg_p))
    return compose(*specs)


@dataclass(frozen=True)
class FrequencyLine:
    """Worlds with ``m_counted`` up-outcomes among the counted events.

    ``points`` are the integer background classes; :meth:`log_count_at`
    evaluates the same line at any log size in between.
    """

    f: float
    m_counted: int
    m_prime: np.ndarray
    log_size: np.ndarray
    log_count: np.ndarray
    config: ExperimentConfig = field(repr=False, compare=False)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.log_size.tolist(), self.log_count.tolist()))

    def m_prime_at(self, log_size: float) -> float:
        c = self.config
        step = math.log(c.bg_p / (1.0 - c.bg_p))
        base = float(c.counted_log_size(self.m_counted)) + c.n_background * math.log1p(-c.bg_p)
        return (log_size - base) / step

    def log_count_at(self, log_size: float) -> float:
        c = self.config
        mp = self.m_prime_at(log_size)
        # rounding can push the line's own end points just outside [0, n_b]
        slack = 1e-9 * max(c.n_background, 1)
        if -slack < mp < 0 or c.n_background < mp < c.n_background + slack:
            mp = min(max(mp, 0.0), float(c.n_background))
        return float(c.log_count(c.n_counted, self.m_counted) + c.log_count(c.n_background, mp))

    def size_range(self) -> tuple[float, float]:
        return float(self.log_size.min()), float(self.log_size.max())


def frequency_line(config: ExperimentConfig, f: float) -> FrequencyLine:
    m = int(round(f * config.n_counted))
    mp = np.arange(config.n_background + 1)
    log_size = config.counted_log_size(m) + config.background_log_size(mp)
    log_count = config.log_count(config.n_counted, m) + config.log_count(config.n_background, mp)
    return FrequencyLine(m / config.n_counted, m, mp, log_size, np.asarray(log_count, dtype=float), config)


def frequency_lines(config: ExperimentConfig) -> list[FrequencyLine]:
    return [frequency_line(config, f) for f in config.counted_frequencies]


def line_crossing(a: FrequencyLine, b: FrequencyLine, xtol: float = 1e-7) -> float:
    """Log size at which two lines carry equal counts.

    The background class ``M'`` is treated as continuous, so the count gap
    between the lines is monotone in log size and bisection brackets the
    single root.
    """
    if a.m_counted == b.m_counted:
        raise NoCrossingError(f"lines for f={a.f} and f={b.f} coincide")
    if a.config.bg_p == 0.5:
        raise NoCrossingError("background p = 0.5 puts every background class at the same size")
    lo = max(a.size_range()[0], b.size_range()[0])
    hi = min(a.size_range()[1], b.size_range()[1])
    if not lo < hi:
        raise NoCrossingError("lines share no range of sizes")

    def gap(s):
        return a.log_count_at(s) - b.log_count_at(s)

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0:
        return lo
    if g_hi == 0:
        return hi
    if np.sign(g_lo) == np.sign(g_hi):
        raise NoCrossingError(f"f={a.f} and f={b.f} do not cross: one dominates across the physical range")
    return float(bisect(gap, lo, hi, xtol=xtol, maxiter=400))


class BornWindow(NamedTuple):
    span_ln: float
    span_log10: float
    lower: float
    upper: float


def born_window(config: ExperimentConfig, window: Sequence[float]) -> BornWindow:
    """Band of cutoff sizes over which the Born line beats both window edges.

    ``upper`` is where the Born line meets the high-frequency edge and
    ``lower`` where it meets the low-frequency edge.
    """
    low_f, high_f = window
    m_p = int(round(config.p * config.n_counted))
    f_p = m_p / config.n_counted
    if not (low_f <= f_p + 1e-12 and high_f >= f_p - 1e-12):
        raise ValueError(f"window [{low_f}, {high_f}] must straddle the Born frequency {f_p}")
    centre = frequency_line(config, f_p)
    anchor = born_log_size(config)

    def edge(f):
        if abs(f - f_p) < 1e-12:
            return anchor
        return line_crossing(centre, frequency_line(config, f))

    upper, lower = edge(high_f), edge(low_f)
    span = upper - lower
    return BornWindow(span, span / LN10, lower, upper)


@dataclass(frozen=True)
class Histogram:
    f: np.ndarray
    log_unmangled_count: np.ndarray
    share: np.ndarray

    @property
    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.f.tolist(), self.log_unmangled_count.tolist(), self.share.tolist()))

    @property
    def modal_f(self) -> float:
        return float(self.f[int(np.argmax(self.share))])

    def mass_within(self, low: float, high: float) -> float:
        mask = (self.f >= low - 1e-12) & (self.f <= high + 1e-12)
        return float(self.share[mask].sum())


def unmangled_frequency_histogram(
    config: ExperimentConfig,
    cutoff_log_size: Optional[float] = None,
    region: Optional[TransitionRegion] = None,
) -> Histogram:
    """Unmangled worlds per counted frequency, summed over background classes.

    Give either a step cutoff or a full region; with neither, the config's
    own region is used.
    """
    if region is None:
        if cutoff_log_size is not None:
            region = TransitionRegion.step_at(cutoff_log_size)
        elif config.region is not None:
            region = config.region
        else:
            raise ValueError("need a cutoff or a region")
    mp = np.arange(config.n_background + 1)
    bg_count = np.asarray(config.log_count(config.n_background, mp), dtype=float)
    bg_size = config.background_log_size(mp)
    logs = []
    for m in config.counted_classes:
        sizes = config.counted_log_size(m) + bg_size
        terms = bg_count + log_unmangled_fraction(region, sizes)
        logs.append(float(config.log_count(config.n_counted, m)) + logsumexp(terms))
    logs = np.array(logs)
    total = logsumexp(logs)
    if total == -math.inf:
        raise EmptyResultError("no unmangled worlds above the cutoff")
    return Histogram(np.array([m / config.n_counted for m in config.counted_classes]), logs, np.exp(logs - total))


def figure1_rows(config: ExperimentConfig, digest: Optional[str] = None) -> Iterator[tuple]:
    """Rows under :data:`FIGURE1_HEADER`: the solid line, then one dashed block per f.

    Solid-line rows leave ``m_prime`` as ``None`` and carry ``(ln m(f), ln C(f))``
    for every counted class.  Dashed-line rows are ordered by ``M'``.
    """
    digest = config.digest() if digest is None else digest
    n = config.n_counted
    m = np.arange(n + 1)
    solid_size = config.counted_log_size(m)
    solid_count = np.asarray(config.log_count(n, m), dtype=float)
    for mi in m.tolist():
        yield digest, mi / n, None, float(solid_size[mi]), float(solid_count[mi])
    if config.n_background == 0:
        return
    for line in frequency_lines(config):
        for mp, s, c in zip(line.m_prime.tolist(), line.log_size.tolist(), line.log_count.tolist()):
            yield digest, line.f, mp, s, c


def emit_figure1(config: ExperimentConfig, out: TextIO, comment: bool = True) -> int:
    """Write :func:`figure1_rows` as CSV; returns the number of data rows."""
    digest = config.digest()
    if comment:
        out.write(comment_line(digest, "figure1"))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FIGURE1_HEADER)
    rows = 0
    for h, f, mp, s, c in figure1_rows(config, digest):
        w.writerow([h, fmt(f), "" if mp is None else mp, fmt(s), fmt(c)])
        rows += 1
    return rows
