"""Feature extraction for a (ticket, proximity point) pair.

Every value is computed from information timestamped at or before the
snapshot instant. History-dependent features read from per-project indexes
built once per corpus (:class:`FeatureContext`); labels of other tickets are
only visible once those tickets are closed.
"""

from __future__ import annotations

import bisect
import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from .corpus import LinkedTicket, RawCommit, RawTicket, closed_instant, format_ts, parse_ts
from .proximity import POINTS, ProximityPoint, is_available, snapshot_instant
from .registry import DA_COUNTERS, JIT_AGGREGATES, REGISTRY, FeatureRegistry
from .text import (
    LexiconSet,
    UndefinedScoreError,
    _tokens,
    default_lexicons,
    flesch_reading_ease,
    grammar_counts,
    lexicon_count,
    sentiment,
    tokenize,
)

MISSING = None
DAY = 86400.0

DA_LEXICONS = {
    "DA_CND": "conditionals",
    "DA_CNT": "continuances",
    "DA_IMP": "imperatives",
    "DA_INC": "incompletes",
    "DA_OPT": "options",
    "DA_SRC": "sources",
    "DA_WKP": "weak_phrases",
}


class FeatureError(Exception):
    pass


# --- repository metrics timeline -------------------------------------------------

TIMELINE_COLUMNS = ("timestamp", "total_LOCs", "number_of_files", "number_of_languages", "smells_count")


@dataclass(frozen=True)
class RepoMetricsRecord:
    timestamp: datetime
    total_LOCs: float
    number_of_files: float
    number_of_languages: float
    smells_count: float


class RepoMetricsTimeline:
    def __init__(self, records: Iterable[RepoMetricsRecord]):
        self.records = tuple(records)
        stamps = [r.timestamp for r in self.records]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise ValueError("timeline timestamps must be strictly increasing")
        self._epochs = [t.timestamp() for t in stamps]

    def __len__(self):
        return len(self.records)

    def lookup(self, t: datetime) -> RepoMetricsRecord | None:
        i = bisect.bisect_right(self._epochs, t.timestamp())
        return self.records[i - 1] if i else None

    @classmethod
    def read_csv(cls, path: str | Path) -> "RepoMetricsTimeline":
        with Path(path).open(encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            RepoMetricsRecord(parse_ts(r["timestamp"]), *(float(r[c]) for c in TIMELINE_COLUMNS[1:]))
            for r in rows
        )

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TIMELINE_COLUMNS)
            for r in self.records:
                writer.writerow([format_ts(r.timestamp), *(_fmt_num(getattr(r, c)) for c in TIMELINE_COLUMNS[1:])])


def _fmt_num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


# --- standalone definitions (also used as oracles by the indexed path) ------------

def compute_anfic(developer: str, history: Iterable[tuple[str | None, datetime, bool]], t: datetime) -> float:
    """Share of bug-inducing tickets among those assigned to ``developer`` and closed before ``t``.

    ``history`` yields ``(assignee, closed_instant, label)``.
    """
    total = buggy = 0
    for assignee, closed, label in history:
        if assignee == developer and closed < t:
            total += 1
            buggy += bool(label)
    return buggy / total if total else 0.0


def compute_temporal_locality(
    history: Iterable[tuple[datetime, bool]], t: datetime, window_days: float = 90.0, weighted: bool = False
) -> float:
    """Bug-inducing share among tickets closed within ``window_days`` before ``t``.

    The weighted variant weights each ticket by ``1 - age / window``.
    """
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    window = window_days * DAY
    num = den = 0.0
    for closed, label in history:
        age = (t - closed).total_seconds()
        if not (0 < age < window):
            continue
        w = 1.0 - age / window if weighted else 1.0
        den += w
        num += w * bool(label)
    return num / den if den > 0 else 0.0


def components_max_bugginess(
    components: Sequence[str], history: Iterable[tuple[Sequence[str], datetime, bool]], t: datetime
) -> float:
    totals: Counter = Counter()
    buggy: Counter = Counter()
    for comps, closed, label in history:
        if closed >= t:
            continue
        for c in set(comps):
            totals[c] += 1
            buggy[c] += bool(label)
    return max((buggy[c] / totals[c] if totals[c] else 0.0 for c in components), default=0.0)


def aggregate_jit(commits: Sequence[RawCommit]) -> dict[str, float]:
    if not commits:
        raise FeatureError("JIT aggregation needs at least one commit")
    out = {}
    for name, attr, agg in JIT_AGGREGATES:
        if agg == "COUNT":
            out[name] = len(commits)
        elif agg == "DURATION":
            stamps = [c.authored_at for c in commits]
            out[name] = (max(stamps) - min(stamps)).total_seconds()
        elif agg == "COUNT_TRUE":
            out[name] = sum(1 for c in commits if getattr(c, attr))
        else:
            values = [getattr(c, attr) for c in commits]
            out[name] = {"MAX": max, "MIN": min, "SUM": sum}[agg](values)
    return out


# --- indexes ----------------------------------------------------------------------

class _SortedCounter:
    """Events on a time axis with prefix sums, for window counts by bisection."""

    def __init__(self, epochs: Sequence[float], weights: Sequence[float] | None = None):
        order = np.argsort(np.asarray(epochs, dtype=float), kind="stable")
        self.epochs = np.asarray(epochs, dtype=float)[order]
        w = np.ones(len(order)) if weights is None else np.asarray(weights, dtype=float)[order]
        self.cum_w = np.concatenate([[0.0], np.cumsum(w)])
        self.cum_e = np.concatenate([[0.0], np.cumsum(self.epochs)])
        self.cum_we = np.concatenate([[0.0], np.cumsum(w * self.epochs)])

    def index_before(self, t: float, inclusive: bool = False) -> int:
        return int(np.searchsorted(self.epochs, t, side="right" if inclusive else "left"))

    def count(self, lo: int, hi: int) -> int:
        return hi - lo

    def weight(self, lo: int, hi: int) -> float:
        return float(self.cum_w[hi] - self.cum_w[lo])


class _LabeledSeries:
    """Closed instants with labels; answers 'before t' and 'within window' queries."""

    def __init__(self, closed: Sequence[float], labels: Sequence[bool]):
        labels = np.asarray(labels, dtype=float)
        self.all = _SortedCounter(closed)
        self.buggy = _SortedCounter(closed, labels)

    def before(self, t: float) -> tuple[int, float]:
        hi = self.all.index_before(t)
        return hi, self.buggy.weight(0, hi)

    def window(self, t: float, window: float, weighted: bool) -> float:
        hi = self.all.index_before(t)
        lo = int(np.searchsorted(self.all.epochs, t - window, side="right"))
        if hi <= lo:
            return 0.0
        if not weighted:
            return self.buggy.weight(lo, hi) / (hi - lo)
        # weights 1 - (t - c)/W summed through prefix sums of c and label*c
        n = hi - lo
        sum_c = self.all.cum_e[hi] - self.all.cum_e[lo]
        den = n - (n * t - sum_c) / window
        nb = self.buggy.weight(lo, hi)
        sum_bc = self.buggy.cum_we[hi] - self.buggy.cum_we[lo]
        num = nb - (nb * t - sum_bc) / window
        return float(num / den) if den > 1e-12 else 0.0


@dataclass
class _TextIndex:
    """Sparse term-count matrices of previously bug-inducing tickets, ordered by closed instant."""

    vocab: dict[str, int]
    closed: np.ndarray  # closed epochs of the buggy tickets, ascending
    counts: sparse.csr_matrix  # buggy docs x vocab
    binary: sparse.csr_matrix
    sq_norm: np.ndarray  # squared count norm per doc
    n_unique: np.ndarray
    created_sorted: np.ndarray  # creation epochs of all docs used for df
    df_checkpoints: np.ndarray  # df after each block of docs
    df_binary: sparse.csr_matrix  # all docs (creation order) x vocab
    block: int = 64

    def df_at(self, t: float) -> tuple[np.ndarray, int]:
        k = int(np.searchsorted(self.created_sorted, t, side="right"))
        b = k // self.block
        df = self.df_checkpoints[b].copy()
        if k > b * self.block:
            df += np.asarray(self.df_binary[b * self.block:k].sum(axis=0)).ravel()
        return df, k


def _build_text_index(docs_all: list[tuple[float, list[str]]], buggy_docs: list[tuple[float, list[str]]]) -> _TextIndex:
    vocab: dict[str, int] = {}
    for _, toks in docs_all + buggy_docs:
        for tok in toks:
            vocab.setdefault(tok, len(vocab))
    v = max(len(vocab), 1)

    def matrix(docs, binary=False):
        rows, cols, vals = [], [], []
        for i, (_, toks) in enumerate(docs):
            for tok, c in Counter(toks).items():
                rows.append(i)
                cols.append(vocab[tok])
                vals.append(1.0 if binary else float(c))
        return sparse.csr_matrix((vals, (rows, cols)), shape=(len(docs), v))

    buggy_docs = sorted(buggy_docs, key=lambda d: d[0])
    counts = matrix(buggy_docs)
    binary = matrix(buggy_docs, binary=True)
    docs_all = sorted(docs_all, key=lambda d: d[0])
    df_binary = matrix(docs_all, binary=True)
    block = 64
    n_blocks = len(docs_all) // block + 1
    checkpoints = np.zeros((n_blocks, v))
    for b in range(1, n_blocks):
        checkpoints[b] = checkpoints[b - 1] + np.asarray(df_binary[(b - 1) * block:b * block].sum(axis=0)).ravel()
    return _TextIndex(
        vocab=vocab,
        closed=np.array([d[0] for d in buggy_docs], dtype=float),
        counts=counts,
        binary=binary,
        sq_norm=np.asarray(counts.multiply(counts).sum(axis=1)).ravel(),
        n_unique=np.asarray(binary.sum(axis=1)).ravel(),
        created_sorted=np.array([d[0] for d in docs_all], dtype=float),
        df_checkpoints=checkpoints,
        df_binary=df_binary,
        block=block,
    )


def t2t_similarities(index: _TextIndex, query_tokens: list[str], t: float) -> dict[str, tuple[float, float]]:
    """(max, avg) per metric between the query and bug-inducing docs closed before ``t``."""
    k = int(np.searchsorted(index.closed, t, side="left"))
    if k == 0:
        return {m: (0.0, 0.0) for m in ("jaccard", "tfidf_cosine", "euclidean_distance")}
    q_counts = Counter(query_tokens)
    known = {index.vocab[w]: float(c) for w, c in q_counts.items() if w in index.vocab}
    cols = np.fromiter(known.keys(), dtype=int, count=len(known))
    qv = np.fromiter(known.values(), dtype=float, count=len(known))
    q_unique = len(q_counts)
    q_sq = float(sum(c * c for c in q_counts.values()))

    counts = index.counts[:k]
    binary = index.binary[:k]
    sub_c = counts[:, cols] if len(cols) else sparse.csr_matrix((k, 0))
    sub_b = binary[:, cols] if len(cols) else sparse.csr_matrix((k, 0))

    inter = np.asarray(sub_b.sum(axis=1)).ravel()
    union = index.n_unique[:k] + q_unique - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        jac = np.where(union > 0, inter / np.where(union > 0, union, 1), 1.0)

    dot = sub_c @ qv if len(cols) else np.zeros(k)
    d2 = np.maximum(index.sq_norm[:k] + q_sq - 2.0 * dot, 0.0)
    euc = 1.0 / (1.0 + np.sqrt(d2))

    df, n_docs = index.df_at(t)
    if n_docs == 0:
        cos = np.zeros(k)
    else:
        idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
        unseen_idf = math.log(1.0 + n_docs) + 1.0
        w2 = idf * idf
        doc_norm = np.sqrt(np.asarray(counts.multiply(counts) @ w2).ravel())
        q_norm_sq = float(np.sum(qv * qv * w2[cols])) if len(cols) else 0.0
        q_norm_sq += sum(c * c for w, c in q_counts.items() if w not in index.vocab) * unseen_idf**2
        q_norm = math.sqrt(q_norm_sq)
        wdot = sub_c @ (qv * w2[cols]) if len(cols) else np.zeros(k)
        denom = doc_norm * q_norm
        with np.errstate(divide="ignore", invalid="ignore"):
            cos = np.where(denom > 0, wdot / np.where(denom > 0, denom, 1), 0.0)
        cos = np.clip(cos, 0.0, 1.0)
    return {
        "jaccard": (float(jac.max()), float(jac.mean())),
        "tfidf_cosine": (float(cos.max()), float(cos.mean())),
        "euclidean_distance": (float(euc.max()), float(euc.mean())),
    }


class _ProjectHistory:
    def __init__(self, raw: list[RawTicket], labeled: list[LinkedTicket], commits: list[RawCommit]):
        self.created = np.sort(np.array([t.created_at.timestamp() for t in raw], dtype=float))
        self.assigned_by_dev: dict[str, np.ndarray] = {}
        tmp = defaultdict(list)
        for t in raw:
            if t.assignee and t.assigned_at is not None:
                tmp[t.assignee].append(t.assigned_at.timestamp())
        self.assigned_by_dev = {d: np.sort(np.array(v)) for d, v in tmp.items()}

        closed = [closed_instant(lt).timestamp() for lt in labeled]
        labels = [lt.label for lt in labeled]
        self.labeled = _LabeledSeries(closed, labels)
        by_dev = defaultdict(lambda: ([], []))
        by_comp = defaultdict(lambda: ([], []))
        for lt, c, y in zip(labeled, closed, labels):
            if lt.ticket.assignee:
                by_dev[lt.ticket.assignee][0].append(c)
                by_dev[lt.ticket.assignee][1].append(y)
            for comp in set(lt.ticket.components):
                by_comp[comp][0].append(c)
                by_comp[comp][1].append(y)
        self.by_dev = {d: _LabeledSeries(*v) for d, v in by_dev.items()}
        self.by_comp = {d: _LabeledSeries(*v) for d, v in by_comp.items()}

        commits = sorted(commits, key=lambda c: (c.authored_at, c.hash))
        self.commit_epochs = np.array([c.authored_at.timestamp() for c in commits], dtype=float)
        churn = np.array([c.churn for c in commits], dtype=float)
        self.cum_churn = np.concatenate([[0.0], np.cumsum(churn)])
        self.commits = commits

        def docs(field_name, items):
            return [(when, _tokens(getattr(lt.ticket if isinstance(lt, LinkedTicket) else lt, field_name))) for lt, when in items]

        all_docs = [(t, t.created_at.timestamp()) for t in raw]
        buggy = [(lt, c) for lt, c in zip(labeled, closed) if lt.label]
        self.text = {
            "title": _build_text_index(docs("title", all_docs), docs("title", buggy)),
            "text": _build_text_index(docs("description", all_docs), docs("description", buggy)),
        }


class FeatureContext:
    """Immutable corpus-wide state needed to compute history-dependent features.

    ``raw_tickets`` are all tickets of the corpus (for project-size denominators
    and document frequencies); ``labeled`` are the linked, labeled tickets whose
    labels become visible at their Closed instant; ``commits`` are all commits.
    """

    def __init__(
        self,
        raw_tickets: Sequence[RawTicket],
        labeled: Sequence[LinkedTicket],
        commits: Sequence[RawCommit],
        timelines: Mapping[str | None, RepoMetricsTimeline] | None = None,
        lexicons: LexiconSet | None = None,
        registry: FeatureRegistry = REGISTRY,
        temporal_window_days: float = 90.0,
    ):
        if temporal_window_days <= 0:
            raise ValueError("temporal_window_days must be positive")
        self.registry = registry
        self.lexicons = lexicons or default_lexicons()
        self.timelines = dict(timelines or {})
        self.window = temporal_window_days * DAY
        ticket_project = {t.id: t.project for t in raw_tickets}
        projects = sorted({t.project for t in raw_tickets})
        self._projects: dict[str, _ProjectHistory] = {}
        for p in projects:
            raw_p = [t for t in raw_tickets if t.project == p]
            lab_p = [lt for lt in labeled if lt.ticket.project == p]
            com_p = [
                c for c in commits
                if not any(tid in ticket_project for tid in c.ticket_ids)
                or any(ticket_project.get(tid) == p for tid in c.ticket_ids)
            ]
            self._projects[p] = _ProjectHistory(raw_p, lab_p, com_p)
        self._static_cache: dict[str, dict] = {}
        unknown = [n for n in registry.names if n not in REGISTRY]
        if unknown:
            raise FeatureError(f"registry/context mismatch, no extractor for: {unknown}")

    def project(self, name: str) -> _ProjectHistory:
        try:
            return self._projects[name]
        except KeyError:
            raise FeatureError(f"ticket project {name!r} is not part of the context") from None

    def timeline(self, project: str) -> RepoMetricsTimeline | None:
        return self.timelines.get(project) or self.timelines.get(None)

    def static_features(self, ticket: RawTicket) -> dict:
        cached = self._static_cache.get(ticket.id)
        if cached is None:
            cached = description_features(ticket.description, self.lexicons)
            pol, subj = sentiment(ticket.description, self.lexicons)
            cached["nlp4re_sentiment-IT_POL"] = pol
            cached["nlp4re_sentiment-IT_SUB"] = subj
            cached["_title_tokens"] = _tokens(ticket.title)
            cached["_text_tokens"] = _tokens(ticket.description)
            cached["_comment_polarity"] = [sentiment(c.text, self.lexicons)[0] for c in ticket.comments]
            self._static_cache[ticket.id] = cached
        return cached


def description_features(description: str, lexicons: LexiconSet) -> dict:
    stream = tokenize(description)
    grammar = grammar_counts(stream)
    counts = {"DA_ACT": grammar.actions}
    for code, lex in DA_LEXICONS.items():
        counts[code] = lexicon_count(description, lex, lexicons)
    out = {f"nlp4re_description-{c}": counts[c] for c in DA_COUNTERS}
    out["nlp4re_description-DA_RKL"] = sum(counts[c] for c in DA_COUNTERS)
    out["nlp4re_description-EX_SBJ"] = grammar.subjects
    out["nlp4re_description-EX_CNS"] = len(stream.tokens)
    out["nlp4re_description-EX_VRB"] = grammar.verbs
    out["nlp4re_description-EX_AMG"] = lexicon_count(description, "ambiguities", lexicons)
    out["nlp4re_description-EX_DIR"] = lexicon_count(description, "directives", lexicons)
    try:
        out["nlp4re_description-EX_RDS"] = flesch_reading_ease(stream)
    except UndefinedScoreError:
        out["nlp4re_description-EX_RDS"] = MISSING
    out["nlp4re_description-EX_ICP"] = grammar.complete_sentence_fraction
    out["nlp4re_description-EX_ACD"] = grammar.action_density
    out["nlp4re_description-EX_ENT"] = grammar.entities
    return out


@dataclass
class FeatureVector:
    ticket_id: str
    point: ProximityPoint
    values: dict
    label: bool
    instant: datetime | None = None

    def missing(self) -> set[str]:
        return {k for k, v in self.values.items() if v is MISSING}


def _own_commits_in(lt: LinkedTicket, lo: float, hi: float) -> tuple[int, float]:
    n, churn = 0, 0.0
    for c in lt.commits:
        e = c.authored_at.timestamp()
        if lo <= e <= hi:
            n += 1
            churn += c.churn
    return n, churn


def extract_features(lt: LinkedTicket, point: ProximityPoint, ctx: FeatureContext) -> FeatureVector:
    snap = snapshot_instant(lt, point)
    if not snap.defined:
        raise FeatureError(f"snapshot undefined for {lt.id} at {point.label}: {snap.reason}")
    t_dt = snap.instant
    t = t_dt.timestamp()
    ticket = lt.ticket
    hist = ctx.project(ticket.project)
    static = ctx.static_features(ticket)
    v: dict = {}

    # Code
    rec = ctx.timeline(ticket.project).lookup(t_dt) if ctx.timeline(ticket.project) else None
    v["code_quality-smells_count"] = rec.smells_count if rec else MISSING
    v["code_size-number_of_languages"] = rec.number_of_languages if rec else MISSING
    v["code_size-number_of_files"] = rec.number_of_files if rec else MISSING
    v["code_size-total_LOCs"] = rec.total_LOCs if rec else MISSING

    # Developer
    dev = ticket.assignee
    if dev and dev in hist.by_dev:
        n, nb = hist.by_dev[dev].before(t)
        v["assignee-ANFIC"] = nb / n if n else 0.0
    else:
        v["assignee-ANFIC"] = 0.0
    n_created = int(np.searchsorted(hist.created, t, side="left"))
    assigned = hist.assigned_by_dev.get(dev) if dev else None
    n_assigned = int(np.searchsorted(assigned, t, side="right")) if assigned is not None else 0
    v["assignee-familiarity"] = min(1.0, n_assigned / n_created) if n_created else 0.0

    # External temperature
    v["temporal_locality"] = hist.labeled.window(t, ctx.window, weighted=False)
    v["temporal_locality-weighted"] = hist.labeled.window(t, ctx.window, weighted=True)
    start = (ticket.assigned_at or ticket.created_at).timestamp()
    lo = int(np.searchsorted(hist.commit_epochs, start, side="left"))
    hi = int(np.searchsorted(hist.commit_epochs, t, side="right"))
    own_n, own_churn = _own_commits_in(lt, start, t)
    if hi > lo:
        v["commits_while_in_progress-count"] = (hi - lo) - own_n
        v["commits_while_in_progress-churn"] = float(hist.cum_churn[hi] - hist.cum_churn[lo]) - own_churn
    else:
        v["commits_while_in_progress-count"] = 0
        v["commits_while_in_progress-churn"] = 0.0
    cap = min(t, lt.commits[0].authored_at.timestamp() - 1.0)
    j = int(np.searchsorted(hist.commit_epochs, cap, side="right"))
    own = {c.hash for c in lt.commits}
    latest = None
    while j > 0:
        candidate = hist.commits[j - 1]
        if candidate.hash not in own:
            latest = candidate
            break
        j -= 1
    v["latest_commit-churn"] = latest.churn if latest else 0.0
    v["latest_commit-number_of_files"] = latest.nf if latest else 0.0

    # Internal temperature
    comments = [(c, p) for c, p in zip(ticket.comments, static["_comment_polarity"]) if c.timestamp <= t_dt]
    histories = [h for h in ticket.histories if h.timestamp <= t_dt]
    work_items = [w for w in ticket.work_items if w.timestamp <= t_dt]
    participants = {p for p in (ticket.reporter, ticket.creator) if p}
    if ticket.assignee and ticket.assigned_at is not None and ticket.assigned_at <= t_dt:
        participants.add(ticket.assignee)
    participants.update(h.author for h in histories if h.author)
    v["issue_participants-count"] = len(participants)
    v["activities-count"] = len(comments) + len(histories) + len(work_items)
    v["activities-comments_count"] = len(comments)
    v["activities-work_items_count"] = len(work_items)
    v["activities-histories_count"] = len(histories)
    v["nlp4re_sentiment-IT_POL"] = static["nlp4re_sentiment-IT_POL"]
    v["nlp4re_sentiment-IT_SUB"] = static["nlp4re_sentiment-IT_SUB"]
    negative = sum(1 for _, p in comments if p < 0)
    v["nlp4re_sentiment-CM_NNS"] = negative
    v["nlp4re_sentiment-CM_PNS"] = negative / len(comments) if comments else 0.0
    v["nlp4re_sentiment-CM_ONS"] = 1 if negative else 0

    # Intrinsic
    v["priority"] = ticket.priority
    v["components-count"] = len(set(ticket.components))
    best = 0.0
    for comp in set(ticket.components):
        series = hist.by_comp.get(comp)
        if series is None:
            continue
        n, nb = series.before(t)
        if n:
            best = max(best, nb / n)
    v["components-max_bugginess"] = best
    v["type"] = ticket.type
    for key, value in static.items():
        if key.startswith("nlp4re_description-"):
            v[key] = value

    # T2T
    for fld in ("title", "text"):
        sims = t2t_similarities(hist.text[fld], static[f"_{fld}_tokens"], t)
        for metric, (mx, avg) in sims.items():
            v[f"buggy_similarity-max_similarity_{metric}_{fld}"] = mx
            v[f"buggy_similarity-avg_similarity_{metric}_{fld}"] = avg

    # JIT
    v.update(aggregate_jit(lt.commits))

    values = {}
    for name in ctx.registry.names:
        if name not in v:
            raise FeatureError(f"registry/context mismatch: {name}")
        values[name] = v[name] if is_available(name, point, ctx.registry) else MISSING
    return FeatureVector(lt.id, point, values, lt.label, t_dt)


# --- feature matrices ----------------------------------------------------------------

META_COLUMNS = ("ticket_id", "proximity", "label")


@dataclass
class FeatureMatrix:
    point: ProximityPoint
    frame: pd.DataFrame  # index = ticket ids in proximity order; registry columns
    labels: np.ndarray
    instants: list[datetime] = field(default_factory=list)

    @property
    def ticket_ids(self) -> list[str]:
        return list(self.frame.index)

    def __len__(self):
        return len(self.frame)


def featurize(ordered: Sequence[LinkedTicket], point: ProximityPoint, ctx: FeatureContext) -> FeatureMatrix:
    vectors = [extract_features(lt, point, ctx) for lt in ordered]
    return matrix_from_vectors(vectors, point, ctx.registry)


def matrix_from_vectors(vectors: Sequence[FeatureVector], point: ProximityPoint, registry=REGISTRY) -> FeatureMatrix:
    names = registry.names
    frame = pd.DataFrame(
        [[fv.values[n] for n in names] for fv in vectors],
        columns=names,
        index=pd.Index([fv.ticket_id for fv in vectors], name="ticket_id"),
        dtype=object,
    )
    for name in names:
        if registry[name].kind == "numeric":
            frame[name] = pd.to_numeric(frame[name], errors="coerce").astype(float)
    labels = np.array([fv.label for fv in vectors], dtype=bool)
    return FeatureMatrix(point, frame, labels, [fv.instant for fv in vectors])


def write_feature_matrix(matrix: FeatureMatrix, path: str | Path, registry=REGISTRY) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*META_COLUMNS, *registry.names])
        for tid, label, (_, row) in zip(matrix.ticket_ids, matrix.labels, matrix.frame.iterrows()):
            cells = []
            for name in registry.names:
                value = row[name]
                if value is MISSING or (isinstance(value, float) and math.isnan(value)):
                    cells.append("")
                elif registry[name].kind == "categorical":
                    cells.append(str(value))
                else:
                    cells.append(_fmt_num(value))
            writer.writerow([tid, matrix.point.value, "1" if label else "0", *cells])


def read_feature_matrix(path: str | Path, registry=REGISTRY) -> FeatureMatrix:
    frame = pd.read_csv(path, dtype={"ticket_id": str, "proximity": str}, keep_default_na=False, na_values=[""])
    missing = [c for c in (*META_COLUMNS, *registry.names) if c not in frame.columns]
    if missing:
        raise FeatureError(f"feature matrix {path} lacks columns: {missing}")
    points = set(frame["proximity"])
    if len(points) > 1:
        raise FeatureError(f"feature matrix {path} mixes proximity points {sorted(points)}")
    point = ProximityPoint.parse(points.pop()) if points else ProximityPoint.CLOSED
    labels = frame["label"].astype(int).to_numpy().astype(bool)
    body = frame.set_index("ticket_id")[registry.names].astype(object)
    for name in registry.names:
        if registry[name].kind == "numeric":
            body[name] = pd.to_numeric(body[name], errors="coerce").astype(float)
        else:
            body[name] = body[name].where(body[name].notna(), None)
    return FeatureMatrix(point, body, labels)
