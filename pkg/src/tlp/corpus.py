"""Ticket and commit ingestion, linking, labeling and anomaly filtering."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

SCHEMA_VERSION = 1

PRIORITIES = ("Trivial", "Minor", "Major", "Critical", "Blocker")

COMMIT_COLUMNS = (
    "hash", "author", "authored_at", "ticket_ids", "buggy",
    "ns", "nd", "nf", "entropy", "la", "ld", "ndev", "age", "nuc",
    "aexp", "arexp", "asexp", "fix",
)
JIT_METRICS = COMMIT_COLUMNS[5:]

FILTER_ORDER = (
    "ExclusiveBuggyCommitsOnly",
    "FirstCommitAfterOpeningDate",
    "ClearRepository",
    "NoSnoring",
    "CommitAfterOpeningDate",
)


class CorpusError(Exception):
    """Raised for unreadable inputs or corpus-level inconsistencies."""


class SchemaVersionError(CorpusError):
    pass


class DuplicateTicketError(CorpusError):
    pass


def parse_ts(value: str | None) -> datetime | None:
    if value is None or value == "":
        return None
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Comment:
    author: str
    timestamp: datetime
    text: str = ""


@dataclass(frozen=True)
class History:
    author: str
    timestamp: datetime


@dataclass(frozen=True)
class WorkItem:
    author: str
    timestamp: datetime
    seconds: float = 0.0


@dataclass(frozen=True)
class RawTicket:
    id: str
    project: str
    type: str
    priority: str
    created_at: datetime
    assigned_at: datetime | None = None
    components: tuple[str, ...] = ()
    reporter: str | None = None
    assignee: str | None = None
    creator: str | None = None
    title: str = ""
    description: str = ""
    comments: tuple[Comment, ...] = ()
    histories: tuple[History, ...] = ()
    work_items: tuple[WorkItem, ...] = ()


@dataclass(frozen=True)
class RawCommit:
    hash: str
    author: str
    authored_at: datetime
    ticket_ids: tuple[str, ...]
    buggy: bool
    ns: float = 0
    nd: float = 0
    nf: float = 0
    entropy: float = 0.0
    la: float = 0
    ld: float = 0
    ndev: float = 0
    age: float = 0.0
    nuc: float = 0
    aexp: float = 0
    arexp: float = 0.0
    asexp: float = 0
    fix: bool = False
    files: tuple[str, ...] = ()

    @property
    def churn(self) -> float:
        return self.la + self.ld


@dataclass(frozen=True)
class LinkedTicket:
    ticket: RawTicket
    commits: tuple[RawCommit, ...]
    label: bool = False

    @property
    def id(self) -> str:
        return self.ticket.id


@dataclass
class Rejection:
    line_no: int
    reason: str
    source: str = "tickets"


@dataclass
class FilterAudit:
    input_count: int
    removed: dict[str, list[str]] = field(default_factory=dict)
    errors: list[tuple[str, str, str]] = field(default_factory=list)
    survivors: int = 0

    @property
    def removed_count(self) -> int:
        return sum(len(ids) for ids in self.removed.values())

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "survivors": self.survivors,
            "removed": {name: list(ids) for name, ids in self.removed.items()},
            "removed_counts": {name: len(ids) for name, ids in self.removed.items()},
            "errors": [list(e) for e in self.errors],
        }


# --- parsing -----------------------------------------------------------------

def _ticket_from_obj(obj: dict) -> RawTicket:
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"ticket schema_version {version!r} != {SCHEMA_VERSION}")
    for key in ("id", "created_at"):
        if not obj.get(key):
            raise ValueError(f"missing {key}")
    created = parse_ts(obj["created_at"])
    assigned = parse_ts(obj.get("assigned_at"))
    if assigned is not None and assigned < created:
        raise ValueError("assigned_at precedes created_at")
    comments = tuple(
        Comment(c.get("author", ""), parse_ts(c["timestamp"]), c.get("text", ""))
        for c in obj.get("comments", [])
    )
    histories = tuple(History(h.get("author", ""), parse_ts(h["timestamp"])) for h in obj.get("histories", []))
    work_items = tuple(
        WorkItem(w.get("author", ""), parse_ts(w["timestamp"]), float(w.get("seconds", 0)))
        for w in obj.get("work_items", [])
    )
    for event in (*comments, *histories, *work_items):
        if event.timestamp < created:
            raise ValueError("activity timestamped before created_at")
    return RawTicket(
        id=str(obj["id"]),
        project=str(obj.get("project", "")),
        type=str(obj.get("type", "")),
        priority=str(obj.get("priority", "")),
        created_at=created,
        assigned_at=assigned,
        components=tuple(obj.get("components", []) or ()),
        reporter=obj.get("reporter"),
        assignee=obj.get("assignee"),
        creator=obj.get("creator"),
        title=obj.get("title", "") or "",
        description=obj.get("description", "") or "",
        comments=comments,
        histories=histories,
        work_items=work_items,
    )


def ticket_to_obj(t: RawTicket) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": t.id,
        "project": t.project,
        "type": t.type,
        "priority": t.priority,
        "components": list(t.components),
        "created_at": format_ts(t.created_at),
        "assigned_at": format_ts(t.assigned_at) if t.assigned_at else None,
        "reporter": t.reporter,
        "assignee": t.assignee,
        "creator": t.creator,
        "title": t.title,
        "description": t.description,
        "comments": [{"author": c.author, "timestamp": format_ts(c.timestamp), "text": c.text} for c in t.comments],
        "histories": [{"author": h.author, "timestamp": format_ts(h.timestamp)} for h in t.histories],
        "work_items": [
            {"author": w.author, "timestamp": format_ts(w.timestamp), "seconds": w.seconds} for w in t.work_items
        ],
    }


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes", "t"):
        return True
    if v in ("false", "0", "no", "f", ""):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _commit_from_row(row: dict) -> RawCommit:
    version = row.get("schema_version")
    if version not in (None, "") and int(version) != SCHEMA_VERSION:
        raise SchemaVersionError(f"commit schema_version {version!r} != {SCHEMA_VERSION}")
    if not row.get("hash"):
        raise ValueError("missing hash")
    authored = parse_ts(row.get("authored_at"))
    if authored is None:
        raise ValueError("missing authored_at")
    ids = tuple(i.strip() for i in (row.get("ticket_ids") or "").split(";") if i.strip())
    metrics = {}
    for name in ("ns", "nd", "nf", "entropy", "la", "ld", "ndev", "age", "nuc", "aexp", "arexp", "asexp"):
        value = float(row[name])
        if math.isnan(value):
            raise ValueError(f"{name} is NaN")
        metrics[name] = value
    for name in ("la", "ld", "ns", "nd", "nf", "ndev", "nuc", "entropy"):
        if metrics[name] < 0:
            raise ValueError(f"negative {name}")
    files = tuple(f for f in (row.get("files") or "").split(";") if f)
    return RawCommit(
        hash=row["hash"],
        author=row.get("author", ""),
        authored_at=authored,
        ticket_ids=ids,
        buggy=_parse_bool(row["buggy"]),
        fix=_parse_bool(row.get("fix", "false")),
        files=files,
        **metrics,
    )


def commit_to_row(c: RawCommit) -> dict:
    def num(v: float) -> str:
        return str(int(v)) if float(v).is_integer() else repr(float(v))

    row = {
        "hash": c.hash,
        "author": c.author,
        "authored_at": format_ts(c.authored_at),
        "ticket_ids": ";".join(c.ticket_ids),
        "buggy": "true" if c.buggy else "false",
    }
    for name in ("ns", "nd", "nf", "entropy", "la", "ld", "ndev", "age", "nuc", "aexp", "arexp", "asexp"):
        row[name] = num(getattr(c, name))
    row["fix"] = "true" if c.fix else "false"
    return row


def read_tickets(path: str | Path) -> tuple[list[RawTicket], list[Rejection]]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read tickets file {path}: {exc}") from exc
    tickets: list[RawTicket] = []
    rejections: list[Rejection] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            ticket = _ticket_from_obj(obj)
        except SchemaVersionError:
            raise
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            rejections.append(Rejection(line_no, f"{type(exc).__name__}: {exc}", "tickets"))
            continue
        if ticket.id in seen:
            raise DuplicateTicketError(f"duplicate ticket id {ticket.id} at line {line_no}")
        seen.add(ticket.id)
        tickets.append(ticket)
    return tickets, rejections


def read_commits(path: str | Path) -> tuple[list[RawCommit], list[Rejection]]:
    path = Path(path)
    try:
        handle = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise CorpusError(f"cannot read commits file {path}: {exc}") from exc
    commits: list[RawCommit] = []
    rejections: list[Rejection] = []
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return commits, rejections
        missing = [c for c in COMMIT_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise CorpusError(f"commits file {path} lacks columns: {', '.join(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                commits.append(_commit_from_row(row))
            except SchemaVersionError:
                raise
            except (ValueError, KeyError, TypeError) as exc:
                rejections.append(Rejection(line_no, f"{type(exc).__name__}: {exc}", "commits"))
    return commits, rejections


def load_corpus(tickets_path, commits_path):
    """Parse both inputs.

    Returns ``(tickets, commits, rejections)``; malformed records end up in
    ``rejections`` instead of being dropped silently.
    """
    tickets, rejected_tickets = read_tickets(tickets_path)
    commits, rejected_commits = read_commits(commits_path)
    return tickets, commits, rejected_tickets + rejected_commits


def write_tickets(tickets: Iterable[RawTicket], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for t in tickets:
            fh.write(json.dumps(ticket_to_obj(t), sort_keys=True) + "\n")


def write_commits(commits: Iterable[RawCommit], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(COMMIT_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for c in commits:
            writer.writerow(commit_to_row(c))


def write_rejections(rejections: Iterable[Rejection], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for r in rejections:
            fh.write(json.dumps({"source": r.source, "line_no": r.line_no, "reason": r.reason}) + "\n")


# --- linking and labeling ----------------------------------------------------

@dataclass
class LinkStats:
    linked_tickets: int
    unlinked_tickets: int
    unlinked_commits: int


def link_commits(tickets: Sequence[RawTicket], commits: Sequence[RawCommit]) -> list[LinkedTicket]:
    """Attach to every ticket the commits naming it; drop tickets with none."""
    linked, _ = link_commits_with_stats(tickets, commits)
    return linked


def link_commits_with_stats(tickets, commits) -> tuple[list[LinkedTicket], LinkStats]:
    by_ticket: dict[str, list[RawCommit]] = {t.id: [] for t in tickets}
    unlinked_commits = 0
    for commit in commits:
        hit = False
        for tid in dict.fromkeys(commit.ticket_ids):
            if tid in by_ticket:
                by_ticket[tid].append(commit)
                hit = True
        if not hit:
            unlinked_commits += 1
    linked = []
    for t in tickets:
        own = by_ticket[t.id]
        if not own:
            continue
        own.sort(key=lambda c: (c.authored_at, c.hash))
        linked.append(LinkedTicket(t, tuple(own)))
    stats = LinkStats(len(linked), len(tickets) - len(linked), unlinked_commits)
    return linked, stats


def label_tickets(linked: Iterable[LinkedTicket]) -> list[LinkedTicket]:
    return [LinkedTicket(lt.ticket, lt.commits, any(c.buggy for c in lt.commits)) for lt in linked]


# --- filters -----------------------------------------------------------------

@dataclass(frozen=True)
class FilterConfig:
    # project -> whether its main repository could be established
    clear_repository: dict = field(default_factory=dict)
    snoring_fraction: float = 0.2
    # "sanity": drop tickets whose first commit predates created_at.
    # "literal": drop tickets whose first commit is after created_at.
    opening_date_polarity: str = "sanity"
    snoring_key: Callable[[LinkedTicket], datetime] | None = None


def _exclusive_buggy(lt: LinkedTicket, cfg: FilterConfig) -> bool:
    buggy = [c for c in lt.commits if c.buggy]
    if not buggy:
        return True
    return not all(len(set(c.ticket_ids)) > 1 for c in buggy)


def _first_commit_after_opening(lt: LinkedTicket, cfg: FilterConfig) -> bool:
    first = lt.commits[0].authored_at
    if cfg.opening_date_polarity == "literal":
        return first <= lt.ticket.created_at
    if cfg.opening_date_polarity != "sanity":
        raise ValueError(f"unknown opening_date_polarity {cfg.opening_date_polarity!r}")
    return first >= lt.ticket.created_at


def _clear_repository(lt: LinkedTicket, cfg: FilterConfig) -> bool:
    return bool(cfg.clear_repository.get(lt.ticket.project, True))


def _commit_after_opening(lt: LinkedTicket, cfg: FilterConfig) -> bool:
    return lt.commits[0].authored_at >= lt.ticket.created_at


def closed_instant(lt: LinkedTicket) -> datetime:
    return lt.commits[-1].authored_at + timedelta(seconds=1)


_PER_TICKET = {
    "ExclusiveBuggyCommitsOnly": _exclusive_buggy,
    "FirstCommitAfterOpeningDate": _first_commit_after_opening,
    "ClearRepository": _clear_repository,
    "CommitAfterOpeningDate": _commit_after_opening,
}


def _no_snoring(population: list[LinkedTicket], cfg: FilterConfig) -> set[str]:
    key = cfg.snoring_key or closed_instant
    ordered = sorted(population, key=lambda lt: (key(lt), lt.id))
    n_drop = int(math.floor(cfg.snoring_fraction * len(ordered) + 1e-9))
    return {lt.id for lt in ordered[len(ordered) - n_drop:]} if n_drop else set()


def apply_filters(
    linked: Sequence[LinkedTicket],
    filters: Sequence[str] = FILTER_ORDER,
    config: FilterConfig | None = None,
) -> tuple[list[LinkedTicket], FilterAudit]:
    """Run the requested anomaly filters in their canonical order.

    Each removed ticket is attributed to the first filter that removed it. A
    ticket whose data cannot be evaluated by a filter is removed and logged
    in ``audit.errors``.
    """
    cfg = config or FilterConfig()
    unknown = [f for f in filters if f not in FILTER_ORDER]
    if unknown:
        raise ValueError(f"unknown filters: {unknown}")
    active = [f for f in FILTER_ORDER if f in filters]
    audit = FilterAudit(input_count=len(linked), removed={f: [] for f in active})
    population = list(linked)
    for name in active:
        if name == "NoSnoring":
            dropped = _no_snoring(population, cfg)
            audit.removed[name].extend(lt.id for lt in population if lt.id in dropped)
            population = [lt for lt in population if lt.id not in dropped]
            continue
        keep_fn = _PER_TICKET[name]
        kept = []
        for lt in population:
            try:
                keep = keep_fn(lt, cfg)
            except (AttributeError, TypeError, IndexError, KeyError) as exc:
                audit.errors.append((lt.id, name, f"{type(exc).__name__}: {exc}"))
                keep = False
            if keep:
                kept.append(lt)
            else:
                audit.removed[name].append(lt.id)
        population = kept
    audit.survivors = len(population)
    return population, audit


def ingest(tickets, commits, filters=FILTER_ORDER, config=None):
    """Link, label and filter; also returns the full labeled population."""
    linked, stats = link_commits_with_stats(tickets, commits)
    labeled = label_tickets(linked)
    survivors, audit = apply_filters(labeled, filters, config)
    return labeled, survivors, audit, stats
