from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsep.simulator import EPRB_CELLS, ConditionRecord, EventDataset, QuantumEPRB, QuantumSG
from qsep.stats import (
    EmptyDatasetError, SummaryStatistics, count_table, empirical_E, from_moments,
    standard_error_E, summarize,
)

Z = (0.0, 0.0, 1.0)
SG_COND = ConditionRecord.sg(Z, Z)
EPRB_COND = ConditionRecord.eprb(Z, Z)


def sg_dataset(values):
    return EventDataset(SG_COND, QuantumSG(), 0, np.array(values))


def eprb_dataset(pairs):
    return EventDataset(EPRB_COND, QuantumEPRB(), 0, np.array(pairs).reshape(-1, 2))


def test_sg_example():
    stats = summarize(sg_dataset([1, 1, -1, 1]))
    assert stats.counts == {1: 3, -1: 1}
    assert stats.mean_x == 0.5
    assert stats.frequencies() == {1: 0.75, -1: 0.25}


def test_eprb_example():
    stats = summarize(eprb_dataset([(1, -1), (-1, 1), (1, 1), (-1, -1)]))
    assert stats.mean_x == 0 and stats.mean_y == 0 and stats.corr_xy == 0


def test_empty_dataset():
    with pytest.raises(EmptyDatasetError):
        summarize(sg_dataset([]))
    with pytest.raises(EmptyDatasetError):
        SummaryStatistics("SG", {1: 0, -1: 0}).mean_x


def test_eprb_only_moments():
    with pytest.raises(AttributeError):
        summarize(sg_dataset([1])).corr_xy


sg_events = st.lists(st.sampled_from([1, -1]), min_size=1, max_size=200)
eprb_events = st.lists(st.sampled_from(EPRB_CELLS), min_size=1, max_size=200)


@settings(max_examples=200)
@given(sg_events)
def test_sg_frequency_identity_exact(events):
    stats = summarize(sg_dataset(events))
    freqs = stats.frequencies(exact=True)
    n = len(events)
    for x in (1, -1):
        assert freqs[x] == Fraction(events.count(x), n)


@settings(max_examples=200)
@given(eprb_events)
def test_eprb_frequency_identity_exact(events):
    stats = summarize(eprb_dataset(events))
    freqs = stats.frequencies(exact=True)
    n = len(events)
    for cell in EPRB_CELLS:
        assert freqs[cell] == Fraction(events.count(cell), n)
    # direct moment oracle
    arr = np.array(events)
    assert stats.exact_moments()["corr_xy"] == Fraction(int((arr[:, 0] * arr[:, 1]).sum()), n)


@settings(max_examples=100)
@given(eprb_events, eprb_events)
def test_merge_is_concatenation(a, b):
    merged = summarize(eprb_dataset(a)).merge(summarize(eprb_dataset(b)))
    assert merged == summarize(eprb_dataset(a + b))


def test_merge_rejects_other_condition():
    other = EventDataset(ConditionRecord.sg((1, 0, 0), Z), QuantumSG(), 0, np.array([1]))
    with pytest.raises(ValueError):
        summarize(sg_dataset([1])).merge(summarize(other))


def test_count_table_cell_order():
    table = count_table("EPRB", np.array([(1, 1), (1, -1), (1, -1), (-1, 1), (-1, -1)] * 2))
    assert table == {(1, 1): 2, (1, -1): 4, (-1, 1): 2, (-1, -1): 2}


def test_standard_error():
    stats = SummaryStatistics("SG", {1: 75, -1: 25})
    assert standard_error_E(stats) == pytest.approx(np.sqrt((1 - 0.25) / 100))
    assert empirical_E(stats) == 0.5


def test_from_moments_round_trip():
    stats = from_moments("EPRB", 1000, 0.1, -0.2, 0.5)
    assert stats.N == 1000
    assert stats.moments() == pytest.approx({"mean_x": 0.1, "mean_y": -0.2, "corr_xy": 0.5})
    with pytest.raises(ValueError):
        from_moments("SG", 3, 0.5)


def test_dict_round_trip():
    stats = summarize(eprb_dataset([(1, -1), (-1, 1), (1, 1)]))
    assert SummaryStatistics.from_dict(stats.to_dict()) == stats
