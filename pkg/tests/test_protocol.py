from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from afrelay.errors import DomainError
from afrelay.protocol import (R1, R2, multiplexing_ratio, schedule, schedule_ratio,
                              schedule_table)


def test_three_symbol_frame():
    ev = schedule(3)
    assert [e.slot_index for e in ev] == [1, 2, 3, 4]
    assert [e.listening_relay for e in ev] == [R1, R2, R1, None]
    assert [e.forwarding_relay for e in ev] == [None, R1, R2, R1]
    assert [e.forwarded_symbol for e in ev] == [None, 1, 2, 3]
    assert [e.iri_active for e in ev] == [False, True, True, False]


def test_single_symbol_frame_has_no_iri():
    ev = schedule(1)
    assert len(ev) == 2 and not any(e.iri_active for e in ev)


@given(st.integers(1, 2000))
def test_schedule_invariants(t):
    ev = schedule(t)
    assert len(ev) == t + 1
    assert sum(e.iri_active for e in ev) == t - 1
    listeners = [e.listening_relay for e in ev[:-1]]
    assert listeners == [R1 if k % 2 == 0 else R2 for k in range(t)]
    for prev, cur in zip(ev, ev[1:]):
        # whoever listened forwards that symbol in the next slot
        assert cur.forwarding_relay == prev.listening_relay
        assert cur.forwarded_symbol == prev.source_symbol
        if cur.iri_active:
            assert cur.forwarding_relay != cur.listening_relay
    assert multiplexing_ratio(t) == schedule_ratio(ev)


def test_multiplexing_ratio_examples():
    assert multiplexing_ratio(1) == Fraction(1, 2)
    assert float(multiplexing_ratio(999)) == pytest.approx(0.999)
    assert multiplexing_ratio() == 1
    with pytest.raises(DomainError):
        multiplexing_ratio(0)
    with pytest.raises(DomainError):
        schedule(0)


def test_schedule_tables():
    csv_text = schedule_table(schedule(2), "csv")
    assert csv_text.splitlines() == [
        "slot_index,source_symbol,listening_relay,forwarding_relay,forwarded_symbol,iri_active",
        "1,1,R1,,,False",
        "2,2,R2,R1,1,True",
        "3,,,R2,2,False",
    ]
    text = schedule_table(schedule(2), "text")
    assert text.splitlines()[0].split() == csv_text.splitlines()[0].split(",")
    assert len(text.splitlines()) == 4
    with pytest.raises(DomainError):
        schedule_table(schedule(2), "html")
