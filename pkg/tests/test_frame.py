from itertools import combinations
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ria_ibc.frame import RoundRole, build_frame, cell, cellmate, round_role, total_slots


def test_rounds_and_served_sets(frame):
    assert frame.rounds == (4, 6, 4, 1)
    assert frame.served_sets[1] == ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
    assert frame.served_sets[2] == ((1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4))
    assert frame.served_sets[3] == ((1, 2, 3, 4),)


def test_unit_slots_phase1_sets():
    assert build_frame((1, 1, 1, 1)).served_sets[0] == ((1,), (2,), (3,), (4,))


@pytest.mark.parametrize("slots", [(0, 1, 1, 1), (1, 1, 1), (1, 1, 1, -2), (1.5, 1, 1, 1)])
def test_invalid_slots(slots):
    with pytest.raises(ValueError):
        build_frame(slots)


@pytest.mark.parametrize("slots, tau", [((3, 1, 1, 6), 28), ((1, 1, 1, 1), 15), ((9, 3, 2, 9), 71)])
def test_total_slots(slots, tau):
    assert total_slots(build_frame(slots)) == tau


def test_cells():
    assert [cell(u) for u in (1, 2, 3, 4)] == [1, 1, 2, 2]
    assert [cellmate(u) for u in (1, 2, 3, 4)] == [2, 1, 4, 3]
    with pytest.raises(ValueError):
        cell(5)


def test_round_role_examples(frame):
    assert round_role(frame, 3, 3, 1) is RoundRole.SERVING
    assert round_role(frame, 3, 1, 1) is RoundRole.MIXED
    assert round_role(frame, 2, 6, 1) is RoundRole.LISTENING


def test_phase3_role_census(frame):
    for u in (1, 2, 3, 4):
        roles = [round_role(frame, 3, r, u) for r in range(1, 5)]
        assert roles.count(RoundRole.MIXED) == 2
        assert roles.count(RoundRole.SERVING) == 1
        assert roles.count(RoundRole.LISTENING) == 1


def test_mixed_only_in_phase3(frame):
    for p, r, _ in frame.iter_all_rounds():
        if p != 3:
            assert all(round_role(frame, p, r, u) is not RoundRole.MIXED for u in (1, 2, 3, 4))


def test_membership_counts(frame):
    for p in range(1, 5):
        sets = frame.served_sets[p - 1]
        assert len(sets) == comb(4, p)
        assert list(sets) == list(combinations((1, 2, 3, 4), p))
        for u in (1, 2, 3, 4):
            assert sum(u in a for a in sets) == comb(3, p - 1)


def test_lookup_helpers(frame):
    assert frame.round_of(2, (4, 3)) == 6
    assert frame.listening_round(3, 1) == 4
    assert frame.listening_round(3, 4) == 1
    with pytest.raises(ValueError):
        frame.listening_round(2, 1)
    with pytest.raises(ValueError):
        frame.served(2, 7)


@given(st.tuples(*[st.integers(1, 50)] * 4))
def test_total_slots_linear(slots):
    assert total_slots(build_frame(slots)) == 4 * slots[0] + 6 * slots[1] + 4 * slots[2] + slots[3]
