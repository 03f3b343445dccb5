import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mangled_worlds.branching import (
    BranchEvent,
    Outcome,
    WorldEnsemble,
    binary_event,
    binomial_ensemble,
    split,
    split_many,
)
from mangled_worlds.numerics import logsumexp


def test_binary_event_validation():
    ev = binary_event(0.7)
    assert ev.labels == ["up", "down"]
    assert np.allclose(ev.born_weights(), [0.7, 0.3])
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            binary_event(bad)


@pytest.mark.parametrize(
    "outcomes",
    [
        (),
        ((0.5, 1, "a"), (0.5, 1, "a")),
        ((0.6, 1, "a"), (0.6, 1, "b")),
        ((1.5, 1, "a"),),
        ((0.5, 0, "a"), (1.0, 1, "b")),
        ((0.25, 1.5, "a"), (0.625, 1, "b")),
    ],
)
def test_branch_event_rejects_invalid(outcomes):
    with pytest.raises(ValueError):
        BranchEvent(outcomes)


def test_unit_world_split_once_and_twice():
    one = split(WorldEnsemble.unit(), binary_event(0.5))
    assert len(one) == 2
    assert np.allclose(one.log_count, 0.0)
    assert np.allclose(one.log_size, math.log(0.5))

    two = split(one, binary_event(0.5))
    assert len(two) == 3
    assert np.allclose(np.exp(two.log_count), [1, 2, 1])
    assert np.allclose(two.log_size, math.log(0.25))


def test_multiplicity_event():
    ev = BranchEvent((Outcome(0.25, 2, "a"), Outcome(0.5, 1, "b")))
    ens = split(WorldEnsemble.unit(), ev)
    counts = {lbl: math.exp(c) for lbl, c in zip(ens.labels, ens.log_count)}
    assert counts == pytest.approx({"a=1;b=0": 2.0, "a=0;b=1": 1.0})
    assert abs(ens.total_log_measure()) < 1e-15


def test_label_reuse_with_other_fraction_is_rejected():
    ens = split(WorldEnsemble.unit(), binary_event(0.7))
    with pytest.raises(ValueError, match="already stands for"):
        split(ens, binary_event(0.6))


def test_binomial_ensemble_examples():
    ens = binomial_ensemble(100, 0.7)
    i = int(np.flatnonzero(ens.label_counts("up") == 70)[0])
    assert ens.log_count[i] == pytest.approx(math.log(math.comb(100, 70)), abs=1e-10)
    assert ens.log_size[i] == pytest.approx(-61.0864, abs=1e-4)

    small = binomial_ensemble(1, 0.5)
    assert len(small) == 2 and np.allclose(small.log_size, math.log(0.5))

    big = binomial_ensemble(10_100, 0.7)
    j = int(np.flatnonzero(big.label_counts("up") == 7070)[0])
    assert big.log_size[j] == pytest.approx(-6169.73, abs=0.01)

    for bad in ((0, 0.7), (10, 0.0), (10, 1.0)):
        with pytest.raises(ValueError):
            binomial_ensemble(*bad)


def test_binomial_ensemble_equals_repeated_splits():
    n = 300
    folded = split_many(WorldEnsemble.unit(), [binary_event(0.7)] * n)
    closed = binomial_ensemble(n, 0.7)
    assert np.array_equal(folded.keys, closed.keys)
    assert np.max(np.abs(folded.log_count - closed.log_count)) < 1e-9
    assert np.max(np.abs(folded.log_size - closed.log_size)) < 1e-9


@pytest.mark.parametrize("n", [1, 10, 1000, 10_000])
def test_binomial_world_count_is_two_to_the_n(n):
    assert binomial_ensemble(n, 0.7).total_log_count() == pytest.approx(n * math.log(2), abs=1e-9)


event_strategy = st.sampled_from(
    [
        binary_event(0.7),
        binary_event(0.5),
        BranchEvent((Outcome(0.25, 2, "a"), Outcome(0.5, 1, "b"))),
        BranchEvent((Outcome(0.1, 1, "x"), Outcome(0.3, 3, "y"))),
    ]
)


@settings(max_examples=40, deadline=None)
@given(st.lists(event_strategy, min_size=1, max_size=25))
def test_measure_is_conserved_by_any_split_sequence(events):
    # the same label may appear with two fractions across events (up/0.7 vs up/0.5)
    seen = {}
    usable = []
    for e in events:
        if all(seen.setdefault(o.label, o.fraction) == o.fraction for o in e.outcomes):
            usable.append(e)
    ens = split_many(WorldEnsemble.unit(), usable)
    assert abs(ens.total_log_measure()) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(event_strategy, min_size=2, max_size=8), st.randoms())
def test_split_order_does_not_matter(events, rnd):
    seen = {}
    events = [e for e in events if all(seen.setdefault(o.label, o.fraction) == o.fraction for o in e.outcomes)]
    shuffled = events[:]
    rnd.shuffle(shuffled)
    a = split_many(WorldEnsemble.unit(), events)
    b = split_many(WorldEnsemble.unit(), shuffled)

    def table(ens):
        # label text lists labels in first-seen order, so key on the parts
        return {frozenset(lbl.split(";")): (c, s) for lbl, c, s in zip(ens.labels, ens.log_count, ens.log_size)}

    ta, tb = table(a), table(b)
    assert ta.keys() == tb.keys()
    for k in ta:
        assert ta[k][0] == pytest.approx(tb[k][0], abs=1e-10)
        assert ta[k][1] == pytest.approx(tb[k][1], abs=1e-10)


def test_arrays_are_read_only_and_classes_view():
    ens = binomial_ensemble(4, 0.7)
    with pytest.raises(ValueError):
        ens.log_count[0] = 1.0
    classes = ens.classes
    assert len(classes) == 5
    assert classes[0].log_count.log == pytest.approx(ens.log_count[0])


def test_write_csv_format():
    buf = io.StringIO()
    binomial_ensemble(2, 0.5).write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "label,log_count,log_size"
    assert len(lines) == 4
    assert lines[2] == f"up=1;down=1,{math.log(2):.15g},{2 * math.log(0.5):.15g}"


def test_measures_sum_through_logsumexp():
    ens = binomial_ensemble(2000, 0.9)
    assert logsumexp(ens.log_measures()) == pytest.approx(0.0, abs=1e-9)
