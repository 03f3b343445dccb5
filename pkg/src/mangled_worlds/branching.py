"""Frequency-class bookkeeping for repeated decoherence events.

Worlds are never tracked one by one.  A class is keyed by how many times
each outcome label occurred along its history; every world in a class has
the same measure, so the class is fully described by a count and a
per-world size, both held as natural logs.

A label always stands for one measure fraction, so a class size is the dot
product of its key with the per-label log fractions.  Recomputing sizes that
way (instead of accumulating ``+= ln F`` per split) keeps long split chains
bit-compatible with the closed-form binomial ensemble.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .numerics import LogValue, log_binomial_array, logsumexp

MEASURE_TOL = 1e-12
FRACTION_TOL = 1e-12


@dataclass(frozen=True)
class Outcome:
    fraction: float
    multiplicity: int
    label: str


@dataclass(frozen=True)
class BranchEvent:
    """One decoherence event: each world splits into ``multiplicity`` children
    per outcome, each child carrying ``fraction`` of the parent's measure."""

    outcomes: tuple[Outcome, ...]

    def __post_init__(self):
        outs = tuple(o if isinstance(o, Outcome) else Outcome(*o) for o in self.outcomes)
        object.__setattr__(self, "outcomes", outs)
        if not outs:
            raise ValueError("an event needs at least one outcome")
        labels = [o.label for o in outs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate outcome labels: {labels}")
        for o in outs:
            if not (0.0 < o.fraction <= 1.0):
                raise ValueError(f"fraction {o.fraction} outside (0, 1]")
            if int(o.multiplicity) != o.multiplicity or o.multiplicity < 1:
                raise ValueError(f"multiplicity {o.multiplicity} must be a positive integer")
        total = math.fsum(o.fraction * o.multiplicity for o in outs)
        if abs(total - 1.0) > MEASURE_TOL:
            raise ValueError(f"sum of fraction*multiplicity is {total!r}, not 1")

    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.outcomes]

    def born_weights(self) -> np.ndarray:
        return np.array([o.fraction * o.multiplicity for o in self.outcomes])


def binary_event(p: float) -> BranchEvent:
    """Two-outcome event with measure ``p`` on "up" and ``1 - p`` on "down"."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie strictly between 0 and 1, got {p}")
    return BranchEvent((Outcome(p, 1, "up"), Outcome(1.0 - p, 1, "down")))


@dataclass(frozen=True)
class WorldClass:
    label: str
    log_count: LogValue
    log_size: float


class WorldEnsemble:
    """Immutable set of frequency classes.

    ``keys[i, j]`` is how often label ``label_names[j]`` occurred in the
    history of class ``i``; ``label_log_fractions[j]`` is that label's
    ``ln F``.  Classes are stored in a canonical order (sorted by key) so two
    ensembles built along different routes line up row by row.
    """

    def __init__(self, label_names, label_log_fractions, keys, log_count, log_size, event_count: int):
        self.label_names = tuple(label_names)
        self.label_log_fractions = tuple(float(x) for x in label_log_fractions)
        self.log_count = np.asarray(log_count, dtype=float)
        self.keys = np.asarray(keys, dtype=np.int64).reshape(len(self.log_count), len(self.label_names))
        self.log_size = np.asarray(log_size, dtype=float)
        self.event_count = int(event_count)
        for arr in (self.keys, self.log_count, self.log_size):
            arr.setflags(write=False)
        if not (len(self.keys) == len(self.log_count) == len(self.log_size)):
            raise ValueError("class arrays differ in length")

    @classmethod
    def unit(cls) -> "WorldEnsemble":
        """A single world of measure one, before any event."""
        return cls((), (), np.zeros((1, 0), dtype=np.int64), [0.0], [0.0], 0)

    def __len__(self) -> int:
        return len(self.log_count)

    def __repr__(self) -> str:
        return f"WorldEnsemble(classes={len(self)}, events={self.event_count}, labels={self.label_names})"

    def label_of(self, i: int) -> str:
        return ";".join(f"{name}={int(c)}" for name, c in zip(self.label_names, self.keys[i]))

    @property
    def labels(self) -> list[str]:
        return [self.label_of(i) for i in range(len(self))]

    @property
    def classes(self) -> list[WorldClass]:
        return [
            WorldClass(self.label_of(i), LogValue.from_log(self.log_count[i]), float(self.log_size[i]))
            for i in range(len(self))
        ]

    def label_counts(self, name: str) -> np.ndarray:
        """Per-class occurrence count of one outcome label."""
        if name not in self.label_names:
            return np.zeros(len(self), dtype=np.int64)
        return self.keys[:, self.label_names.index(name)]

    def log_measures(self) -> np.ndarray:
        """Per-class total measure, ``log_count + log_size``."""
        return self.log_count + self.log_size

    def total_log_measure(self) -> float:
        return logsumexp(self.log_measures())

    def total_log_count(self) -> float:
        return logsumexp(self.log_count)

    def write_csv(self, fh: TextIO) -> None:
        """Columns label, log_count, log_size in natural-log units, 15 significant digits."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "log_count", "log_size"])
        for i in range(len(self)):
            w.writerow([self.label_of(i), f"{self.log_count[i]:.15g}", f"{self.log_size[i]:.15g}"])


def _merge(label_names, label_log_fractions, keys, log_count, event_count) -> WorldEnsemble:
    """Collapse rows with equal keys, adding their counts in log space."""
    n_labels = keys.shape[1]
    if n_labels == 0:
        codes = np.zeros(len(keys), dtype=np.int64)
    else:
        radix = int(keys.max()) + 1
        if n_labels * math.log2(max(radix, 2)) < 62:
            codes = keys @ (radix ** np.arange(n_labels - 1, -1, -1, dtype=np.int64))
        else:
            _, codes = np.unique(keys, axis=0, return_inverse=True)
            codes = codes.reshape(-1).astype(np.int64)
    order = np.argsort(codes, kind="stable")
    codes, keys, log_count = codes[order], keys[order], log_count[order]

    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
    if len(starts) < len(codes):
        group = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(codes)]))
        peak = np.maximum.reduceat(log_count, starts)
        log_count = peak + np.log(np.add.reduceat(np.exp(log_count - peak[group]), starts))
        keys = keys[starts]
    log_size = keys @ np.asarray(label_log_fractions, dtype=float) if n_labels else np.zeros(len(keys))
    return WorldEnsemble(label_names, label_log_fractions, keys, log_count, log_size, event_count)


def split(ensemble: WorldEnsemble, event: BranchEvent) -> WorldEnsemble:
    """Split every class by ``event`` and merge children that share a key."""
    names = list(ensemble.label_names)
    fractions = list(ensemble.label_log_fractions)
    for o in event.outcomes:
        lf = math.log(o.fraction)
        if o.label in names:
            known = fractions[names.index(o.label)]
            if abs(known - lf) > FRACTION_TOL:
                raise ValueError(
                    f"label {o.label!r} already stands for fraction {math.exp(known)!r}; "
                    f"use a distinct label for fraction {o.fraction!r}"
                )
        else:
            names.append(o.label)
            fractions.append(lf)
    base = np.zeros((len(ensemble), len(names)), dtype=np.int64)
    base[:, : len(ensemble.label_names)] = ensemble.keys

    keys, counts = [], []
    for o in event.outcomes:
        k = base.copy()
        k[:, names.index(o.label)] += 1
        keys.append(k)
        counts.append(ensemble.log_count + math.log(o.multiplicity))
    return _merge(names, fractions, np.vstack(keys), np.concatenate(counts), ensemble.event_count + 1)


def split_many(ensemble: WorldEnsemble, events: Iterable[BranchEvent]) -> WorldEnsemble:
    for e in events:
        ensemble = split(ensemble, e)
    return ensemble


def binomial_ensemble(n: int, p: float) -> WorldEnsemble:
    """Closed form of ``n`` binary splits: class M has ``C(n, M)`` worlds of
    size ``p**M (1-p)**(n-M)``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie strictly between 0 and 1, got {p}")
    m = np.arange(n + 1)
    keys = np.column_stack([m, n - m])
    return _merge(("up", "down"), (math.log(p), math.log(1.0 - p)), keys, log_binomial_array(n, m), n)
