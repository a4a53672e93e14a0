from datetime import timedelta

import pytest
from hypothesis import given, strategies as st

from tlp.proximity import (
    ONE_SECOND, POINTS, ProximityPoint, available_features, is_available, order_by_proximity, snapshot_instant,
)
from tlp.registry import FAMILIES, REGISTRY


def test_registry_shape():
    assert len(REGISTRY) == 71
    assert REGISTRY.family_counts() == {"C": 4, "D": 2, "E_T": 6, "I_T": 10, "I": 22, "T2T": 12, "JIT": 15}
    assert tuple(REGISTRY.family_counts()) == FAMILIES


def test_snapshot_instants(small_population):
    _, survivors, _, _ = small_population
    for lt in survivors:
        o = snapshot_instant(lt, ProximityPoint.OPEN)
        i = snapshot_instant(lt, ProximityPoint.IN_PROGRESS)
        c = snapshot_instant(lt, ProximityPoint.CLOSED)
        assert i.instant == lt.commits[0].authored_at - ONE_SECOND
        assert c.instant == lt.commits[-1].authored_at + ONE_SECOND
        if o.defined:
            assert o.instant == lt.ticket.assigned_at - ONE_SECOND
            assert o.instant <= i.instant
        assert i.instant < c.instant


def test_unassigned_ticket_has_no_open_snapshot(small_population):
    _, survivors, _, _ = small_population
    lt = survivors[0]
    from dataclasses import replace
    unassigned = replace(lt, ticket=replace(lt.ticket, assigned_at=None))
    snap = snapshot_instant(unassigned, ProximityPoint.OPEN)
    assert not snap.defined and snap.reason
    rows, excluded = order_by_proximity([unassigned], ProximityPoint.OPEN)
    assert not rows and excluded[0].ticket_id == lt.id


def test_ordering_is_by_instant(small_population):
    _, survivors, _, _ = small_population
    for p in POINTS:
        rows, _ = order_by_proximity(list(reversed(survivors)), p)
        keys = [(s.instant, lt.id) for lt, s in rows]
        assert keys == sorted(keys)


@given(st.sampled_from(REGISTRY.names), st.sampled_from(POINTS), st.sampled_from(POINTS))
def test_availability_is_monotone(name, a, b):
    if a <= b and is_available(name, a):
        assert is_available(name, b)


def test_available_counts():
    assert len(available_features(ProximityPoint.CLOSED)) == 71
    assert len(available_features(ProximityPoint.IN_PROGRESS)) == 56
    assert len(available_features(ProximityPoint.OPEN)) == 50


@pytest.mark.parametrize("text,point", [("Open", ProximityPoint.OPEN), ("in_progress", ProximityPoint.IN_PROGRESS),
                                        ("In-Progress", ProximityPoint.IN_PROGRESS), ("CLOSED", ProximityPoint.CLOSED)])
def test_parse(text, point):
    assert ProximityPoint.parse(text) is point


def test_parse_rejects_unknown():
    with pytest.raises(ValueError):
        ProximityPoint.parse("resolved")
