"""Log-domain arithmetic for counts and measures.

Counts such as 2**10000 and measures such as exp(-6170) are far outside
float range, so everything is carried as a natural-log magnitude.  Scalars
use :class:`LogValue`, which keeps zero as an explicit flag; bulk work on
ensembles uses plain float arrays of logs where ``-inf`` marks an empty
entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln

LN10 = math.log(10.0)


@dataclass(frozen=True)
class LogValue:
    """A non-negative real stored as ``exp(log_magnitude)``.

    When ``is_zero`` is set the magnitude is meaningless and ignored.
    """

    log_magnitude: float = 0.0
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(0.0, True)

    @classmethod
    def from_log(cls, x: float) -> "LogValue":
        """Wrap a raw log; ``-inf`` becomes the zero flag."""
        x = float(x)
        if math.isnan(x):
            raise ValueError("log magnitude is NaN")
        if x == -math.inf:
            return cls.zero()
        if x == math.inf:
            raise OverflowError("log magnitude is +inf")
        return cls(x, False)

    @classmethod
    def from_real(cls, value: float) -> "LogValue":
        if value < 0:
            raise ValueError("LogValue represents non-negative reals only")
        if value == 0:
            return cls.zero()
        return cls(math.log(value), False)

    @property
    def log(self) -> float:
        """Raw natural log, ``-inf`` for zero."""
        return -math.inf if self.is_zero else self.log_magnitude

    @property
    def log10(self) -> float:
        return self.log / LN10

    def to_real(self) -> float:
        return 0.0 if self.is_zero else math.exp(self.log_magnitude)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.is_zero or other.is_zero:
            return LogValue.zero()
        return LogValue(self.log_magnitude + other.log_magnitude)

    def __add__(self, other: "LogValue") -> "LogValue":
        return log_add(self, other)

    def isclose(self, other: "LogValue", abs_tol: float = 1e-12) -> bool:
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        return abs(self.log_magnitude - other.log_magnitude) <= abs_tol


def log_add(a: LogValue, b: LogValue) -> LogValue:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    hi, lo = (a.log_magnitude, b.log_magnitude)
    if lo > hi:
        hi, lo = lo, hi
    return LogValue(hi + math.log1p(math.exp(lo - hi)))


def log_sum(values: Iterable[LogValue]) -> LogValue:
    """Sum of represented values; an empty input sums to zero."""
    logs = np.array([v.log_magnitude for v in values if not v.is_zero], dtype=float)
    return LogValue.from_log(logsumexp(logs))


def logsumexp(logs, axis=None) -> float | np.ndarray:
    """Max-shifted ``log(sum(exp(logs)))``; entries of ``-inf`` are empty.

    Returns ``-inf`` for an empty or all-empty input instead of warning.
    """
    x = np.asarray(logs, dtype=float)
    if x.size == 0:
        return -math.inf if axis is None else np.full(np.delete(x.shape, axis), -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def log_binomial_array(n, k) -> np.ndarray:
    """Vectorised ``ln C(n, k)`` with ``-inf`` outside ``0 <= k <= n``.

    ``k`` may be non-integer, in which case the log-gamma extension is used.
    """
    n, k = np.broadcast_arrays(np.asarray(n, dtype=float), np.asarray(k, dtype=float))
    inside = (k >= 0) & (k <= n)
    kk = np.where(inside, k, 0.0)
    val = gammaln(n + 1.0) - gammaln(kk + 1.0) - gammaln(n - kk + 1.0)
    return np.where(inside, val, -np.inf)


def log_binomial(n: int, k: float) -> LogValue:
    """``ln C(n, k)`` as a :class:`LogValue`; out-of-range ``k`` gives zero."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return LogValue.from_log(float(log_binomial_array(n, k)))


def log_binomial_gaussian(n, k) -> np.ndarray:
    """de Moivre-Laplace approximation of ``ln C(n, k)``.

    ``C(n, k) ~ 2**n * sqrt(2 / (pi n)) * exp(-2 (k - n/2)**2 / n)``.  This
    is a smooth parabola in ``k`` and is defined for every real ``k``.
    """
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return n * math.log(2.0) + 0.5 * np.log(2.0 / (math.pi * n)) - 2.0 * (k - n / 2.0) ** 2 / n

