"""Measurement instants per proximity point, availability rules and dataset ordering."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from functools import total_ordering
from typing import Iterable

from .corpus import LinkedTicket
from .registry import REGISTRY, FeatureRegistry, Stage

ONE_SECOND = timedelta(seconds=1)


@total_ordering
class ProximityPoint(Enum):
    OPEN = "open"
    IN_PROGRESS = "inprogress"
    CLOSED = "closed"

    @property
    def rank(self) -> int:
        return _RANK[self]

    def __lt__(self, other):
        if not isinstance(other, ProximityPoint):
            return NotImplemented
        return self.rank < other.rank

    @property
    def label(self) -> str:
        return {"open": "Open", "inprogress": "InProgress", "closed": "Closed"}[self.value]

    @classmethod
    def parse(cls, text: str) -> "ProximityPoint":
        key = text.strip().lower().replace("_", "").replace("-", "").replace(" ", "")
        for p in cls:
            if p.value == key:
                return p
        raise ValueError(f"unknown proximity point {text!r}")


_RANK = {ProximityPoint.OPEN: 0, ProximityPoint.IN_PROGRESS: 1, ProximityPoint.CLOSED: 2}

POINTS = (ProximityPoint.OPEN, ProximityPoint.IN_PROGRESS, ProximityPoint.CLOSED)


@dataclass(frozen=True)
class ProximitySnapshot:
    ticket_id: str
    point: ProximityPoint
    instant: datetime | None
    defined: bool
    reason: str = ""


def snapshot_instant(ticket: LinkedTicket, point: ProximityPoint) -> ProximitySnapshot:
    if point is ProximityPoint.OPEN:
        assigned = ticket.ticket.assigned_at
        if assigned is None:
            return ProximitySnapshot(ticket.id, point, None, False, "no assigned_at")
        if assigned > ticket.commits[0].authored_at:
            # Open would fall after InProgress; treat as undefined.
            return ProximitySnapshot(ticket.id, point, None, False, "assigned_at after first commit")
        return ProximitySnapshot(ticket.id, point, assigned - ONE_SECOND, True)
    if point is ProximityPoint.IN_PROGRESS:
        return ProximitySnapshot(ticket.id, point, ticket.commits[0].authored_at - ONE_SECOND, True)
    return ProximitySnapshot(ticket.id, point, ticket.commits[-1].authored_at + ONE_SECOND, True)


_STAGE_FIRST_POINT = {
    Stage.OPEN: ProximityPoint.OPEN,
    Stage.ASSIGNED: ProximityPoint.IN_PROGRESS,
    Stage.CLOSED: ProximityPoint.CLOSED,
}


def is_available(feature_id: str, point: ProximityPoint, registry: FeatureRegistry = REGISTRY) -> bool:
    return point >= _STAGE_FIRST_POINT[registry[feature_id].stage]


def available_features(point: ProximityPoint, registry: FeatureRegistry = REGISTRY) -> list[str]:
    return [name for name in registry.names if is_available(name, point, registry)]


@dataclass(frozen=True)
class Exclusion:
    ticket_id: str
    point: ProximityPoint
    reason: str


def order_by_proximity(
    corpus: Iterable[LinkedTicket], point: ProximityPoint
) -> tuple[list[tuple[LinkedTicket, ProximitySnapshot]], list[Exclusion]]:
    """Sort tickets by their snapshot instant at ``point`` (ties by id).

    Tickets whose snapshot is undefined are left out and reported.
    """
    rows = []
    excluded = []
    for lt in corpus:
        snap = snapshot_instant(lt, point)
        if not snap.defined:
            excluded.append(Exclusion(lt.id, point, snap.reason))
            continue
        rows.append((lt, snap))
    rows.sort(key=lambda r: (r[1].instant, r[0].id))
    return rows, excluded
