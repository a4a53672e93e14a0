"""Deterministic synthetic corpora with planted, stage-dependent label signals.

Labels come from a logistic model over three observable drivers:

* an Open-stage score from priority and type,
* the number of comments and history events logged between assignment and
  the first commit (visible from InProgress on),
* the summed lines added over the ticket's commits (visible only at Closed).

Ticket text is drawn independently of everything else.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .corpus import (
    FILTER_ORDER,
    PRIORITIES,
    Comment,
    History,
    RawCommit,
    RawTicket,
    WorkItem,
    closed_instant,
    link_commits,
    write_commits,
    write_tickets,
)
from .features import RepoMetricsRecord, RepoMetricsTimeline
from .text import default_lexicons

PRIORITY_EFFECT = {"Trivial": -1.0, "Minor": -0.5, "Major": 0.0, "Critical": 0.5, "Blocker": 1.0}
PRIORITY_WEIGHTS = (0.06, 0.24, 0.42, 0.19, 0.09)
TYPE_EFFECT = {"Bug": 0.6, "Improvement": -0.2, "New Feature": 0.4, "Sub-task": -0.4, "Test": -0.8, "Task": -0.2}
TYPE_WEIGHTS = (0.35, 0.25, 0.12, 0.13, 0.07, 0.08)

COMPONENTS = ("api", "core", "storage", "network", "ui", "build", "docs", "security", "query", "io", "metrics", "cli")

VOCABULARY = (
    "server table query cache index schema column partition client request response timeout "
    "thread lock memory disk file buffer stream parser config option flag handler session token "
    "replica region metadata snapshot compaction merge split scan filter join driver connection "
    "pool retry error exception failure crash log warning message value type field record row "
    "update insert delete create drop load store read write open close start stop build test"
).split()
VERBS = "add fix remove update support handle improve refactor return throw check allow use make".split()
ACRONYMS = ("HDFS", "API", "JDBC", "RPC", "SQL", "JVM", "ORC", "UDF")


@dataclass(frozen=True)
class GeneratorSpec:
    n_tickets: int = 2000
    prevalence: float = 0.4
    seed: int = 0
    open_signal: float = 2.75
    progress_signal: float = 3.0
    closed_signal: float = 6.5
    span_days: float = 900.0
    project: str = "SYN"
    n_developers: int = 30
    unassigned_fraction: float = 0.02
    start: str = "2018-01-01T00:00:00Z"
    plant_anomalies: bool = True

    def __post_init__(self):
        if not 0 < self.prevalence < 1:
            raise ValueError("prevalence must lie strictly between 0 and 1")
        if min(self.open_signal, self.progress_signal, self.closed_signal) < 0:
            raise ValueError("signal strengths must be non-negative")
        if self.n_tickets < 1:
            raise ValueError("n_tickets must be positive")
        if self.span_days <= 0:
            raise ValueError("span_days must be positive")


@dataclass
class SyntheticCorpus:
    tickets: list[RawTicket]
    commits: list[RawCommit]
    timeline: RepoMetricsTimeline
    manifest: dict = field(default_factory=dict)

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "tickets": out / "tickets.jsonl",
            "commits": out / "commits.csv",
            "repo_metrics": out / "repo_metrics.csv",
            "manifest": out / "manifest.json",
        }
        write_tickets(self.tickets, paths["tickets"])
        write_commits(self.commits, paths["commits"])
        self.timeline.write_csv(paths["repo_metrics"])
        paths["manifest"].write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return paths


def _ts(epoch: float) -> datetime:
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc)


def _standardize(x: np.ndarray) -> tuple[np.ndarray, float, float]:
    mu, sd = float(x.mean()), float(x.std())
    if sd == 0:
        return np.zeros_like(x), mu, 1.0
    return (x - mu) / sd, mu, sd


class _TextSampler:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        lex = default_lexicons().to_mapping()
        self.phrases = [p for name, items in lex.items() if name != "sentiment" for p in items]
        self.sentiment = sorted(lex.get("sentiment", {}))

    def _word(self) -> str:
        r = self.rng.random()
        if r < 0.06:
            return str(self.rng.choice(ACRONYMS))
        if r < 0.20:
            return str(self.rng.choice(VERBS))
        return str(self.rng.choice(VOCABULARY))

    def title(self) -> str:
        words = [self._word() for _ in range(int(self.rng.integers(3, 9)))]
        return " ".join(words).capitalize()

    def sentence(self, mood: bool = False) -> str:
        words = [self._word() for _ in range(int(self.rng.integers(5, 14)))]
        if self.rng.random() < 0.5:
            words.insert(int(self.rng.integers(0, len(words))), str(self.rng.choice(self.phrases)))
        if mood and self.sentiment and self.rng.random() < 0.6:
            words.insert(int(self.rng.integers(0, len(words))), str(self.rng.choice(self.sentiment)))
        words[0] = words[0].capitalize()
        return " ".join(words) + "."

    def description(self) -> str:
        if self.rng.random() < 0.03:
            return ""
        return " ".join(self.sentence() for _ in range(int(self.rng.integers(1, 6))))

    def comment(self) -> str:
        return " ".join(self.sentence(mood=True) for _ in range(int(self.rng.integers(1, 3))))


def _uniform_times(rng, n: int, lo: float, hi: float) -> list[float]:
    if n <= 0 or hi <= lo:
        return []
    return sorted(float(v) for v in rng.uniform(lo, hi, size=n))


def generate(spec: GeneratorSpec) -> SyntheticCorpus:
    """Build a corpus; identical specs give identical corpora."""
    rng = np.random.default_rng(spec.seed)
    text_rng = np.random.default_rng([spec.seed, 1])
    sampler = _TextSampler(text_rng)
    start = datetime.fromisoformat(spec.start.replace("Z", "+00:00")).timestamp()
    n = spec.n_tickets
    devs = [f"dev{k:02d}" for k in range(spec.n_developers)]
    day = 86400.0

    created = np.sort(rng.uniform(0, spec.span_days * day, size=n)).astype(int) + int(start)
    unassigned = rng.random(n) < spec.unassigned_fraction
    assign_delay = 60 + rng.exponential(1.0 * day, size=n)
    commit_delay = 600 + rng.exponential(3.0 * day, size=n)
    n_commits = 1 + np.minimum(rng.poisson(1.0, size=n), 5)
    priorities = rng.choice(PRIORITIES, size=n, p=PRIORITY_WEIGHTS)
    types = rng.choice(list(TYPE_EFFECT), size=n, p=TYPE_WEIGHTS)
    activity_latent = rng.normal(size=n)
    progress_count = rng.poisson(2.0 * np.exp(0.7 * activity_latent))

    tickets_raw = []
    commit_plan = []
    for i in range(n):
        c_at = float(created[i])
        a_at = None if unassigned[i] else c_at + assign_delay[i]
        anchor = a_at if a_at is not None else c_at
        first = anchor + commit_delay[i]
        gaps = rng.exponential(0.5 * day, size=int(n_commits[i]) - 1) + 60
        times = [first, *(first + np.cumsum(gaps))]
        assignee = str(rng.choice(devs))
        reporter = str(rng.choice(devs))
        comps = tuple(sorted(rng.choice(COMPONENTS, size=int(rng.integers(1, 4)), replace=False)))
        pre_c = _uniform_times(rng, int(rng.poisson(0.5)), c_at + 1, anchor - 1)
        pre_h = _uniform_times(rng, int(rng.poisson(0.5)), c_at + 1, anchor - 1)
        k = int(progress_count[i])
        k_comments = int(rng.binomial(k, 0.5))
        mid_c = _uniform_times(rng, k_comments, anchor + 1, first - 2)
        mid_h = _uniform_times(rng, k - k_comments, anchor + 1, first - 2)
        post_c = _uniform_times(rng, int(rng.poisson(1.0)), first, times[-1] + 2 * day)
        post_h = _uniform_times(rng, int(rng.poisson(1.0)), first, times[-1] + 2 * day)
        work = _uniform_times(rng, int(rng.poisson(0.5)), anchor, times[-1] + day)
        tickets_raw.append(dict(
            id=f"{spec.project}-{i + 1}", created=c_at, assigned=a_at, assignee=None if a_at is None else assignee,
            reporter=reporter, priority=str(priorities[i]), type=str(types[i]), components=comps,
            comment_times=sorted(pre_c + mid_c + post_c), history_times=sorted(pre_h + mid_h + post_h),
            work_times=work, observed_progress=len(mid_c) + len(mid_h),
        ))
        commit_plan.append(times)

    la = [rng.lognormal(3.5, 1.2, size=len(times)).round() + 1 for times in commit_plan]
    la_sum = np.array([float(v.sum()) for v in la])

    open_raw = np.array([PRIORITY_EFFECT[p] + TYPE_EFFECT[t] for p, t in zip(priorities, types)])
    open_z, open_mu, open_sd = _standardize(open_raw)
    prog_raw = np.log1p([t["observed_progress"] for t in tickets_raw])
    prog_z, prog_mu, prog_sd = _standardize(np.asarray(prog_raw, dtype=float))
    la_raw = np.log1p(la_sum)
    la_z, la_mu, la_sd = _standardize(la_raw)
    linear = spec.open_signal * open_z + spec.progress_signal * prog_z + spec.closed_signal * la_z

    def excess(b0: float) -> float:
        return float(np.mean(1.0 / (1.0 + np.exp(-(b0 + linear))))) - spec.prevalence

    intercept = float(brentq(excess, -50.0, 50.0, xtol=1e-12))
    prob = 1.0 / (1.0 + np.exp(-(intercept + linear)))
    labels = rng.random(n) < prob

    tickets: list[RawTicket] = []
    commits: list[RawCommit] = []
    for i, info in enumerate(tickets_raw):
        times = commit_plan[i]
        n_c = len(times)
        buggy = np.zeros(n_c, dtype=bool)
        if labels[i]:
            buggy[int(rng.integers(0, n_c))] = True
            buggy |= rng.random(n_c) < 0.2
        for j, at in enumerate(times):
            nf = int(rng.integers(1, 13))
            author = info["assignee"] if info["assignee"] and rng.random() < 0.8 else str(rng.choice(devs))
            aexp = float(rng.poisson(200))
            commits.append(RawCommit(
                hash=hashlib.sha1(f"{spec.seed}:{i}:{j}".encode()).hexdigest(),
                author=author,
                authored_at=_ts(at),
                ticket_ids=(info["id"],),
                buggy=bool(buggy[j]),
                ns=float(rng.integers(1, 4)),
                nd=float(rng.integers(1, 7)),
                nf=float(nf),
                entropy=round(float(rng.uniform(0, math.log2(nf))) if nf > 1 else 0.0, 6),
                la=float(la[i][j]),
                ld=float(round(rng.lognormal(2.5, 1.2))),
                ndev=float(rng.integers(1, 16)),
                age=round(float(rng.exponential(30.0)), 4),
                nuc=float(rng.integers(1, nf + 1)),
                aexp=aexp,
                arexp=round(aexp * float(rng.uniform(0.1, 1.0)), 4),
                asexp=float(rng.poisson(50)),
                fix=bool(rng.random() < 0.3),
            ))
        comments = tuple(
            Comment(str(rng.choice(devs)), _ts(t), sampler.comment()) for t in info["comment_times"]
        )
        histories = tuple(History(str(rng.choice(devs)), _ts(t)) for t in info["history_times"])
        work_items = tuple(
            WorkItem(info["assignee"] or str(rng.choice(devs)), _ts(t), float(rng.integers(1, 9) * 1800))
            for t in info["work_times"]
        )
        tickets.append(RawTicket(
            id=info["id"],
            project=spec.project,
            type=info["type"],
            priority=info["priority"],
            created_at=_ts(info["created"]),
            assigned_at=None if info["assigned"] is None else _ts(info["assigned"]),
            components=info["components"],
            reporter=info["reporter"],
            assignee=info["assignee"],
            creator=info["reporter"],
            title=sampler.title(),
            description=sampler.description(),
            comments=comments,
            histories=histories,
            work_items=work_items,
        ))

    # a few commits touch no known ticket
    for j in range(max(1, n // 50)):
        at = start + float(rng.uniform(0, spec.span_days * day))
        commits.append(RawCommit(
            hash=hashlib.sha1(f"{spec.seed}:orphan:{j}".encode()).hexdigest(),
            author=str(rng.choice(devs)), authored_at=_ts(at), ticket_ids=(), buggy=bool(rng.random() < 0.3),
            ns=1.0, nd=1.0, nf=1.0, la=float(rng.integers(1, 50)), ld=float(rng.integers(0, 20)),
            ndev=1.0, age=1.0, nuc=1.0, aexp=10.0, arexp=5.0, asexp=2.0,
        ))

    planted: dict[str, list[str]] = {}
    clear_repository: dict[str, bool] = {spec.project: True}
    if spec.plant_anomalies and n >= 20:
        tickets, commits, planted, clear_repository = _plant(spec, tickets, commits, rng)

    commits.sort(key=lambda c: (c.authored_at, c.hash))
    end = max(c.authored_at.timestamp() for c in commits)
    timeline = _timeline(rng, start - 30 * day, end + 30 * day)

    manifest = {
        "format": "tlp-synthetic/1",
        "spec": asdict(spec),
        "label_model": {
            "intercept": intercept,
            "coefficients": {
                "open_score": spec.open_signal,
                "progress_activity": spec.progress_signal,
                "jit_la_sum": spec.closed_signal,
            },
            "drivers": {
                "open_score": {"definition": "priority effect + type effect, standardized",
                               "priority_effect": PRIORITY_EFFECT, "type_effect": TYPE_EFFECT,
                               "mean": open_mu, "sd": open_sd},
                "progress_activity": {"definition": "log1p(comments + histories between assignment and "
                                                    "first commit), standardized", "mean": prog_mu, "sd": prog_sd},
                "jit_la_sum": {"definition": "log1p(sum of lines added over the ticket's commits), standardized",
                               "mean": la_mu, "sd": la_sd},
            },
        },
        "counts": {
            "tickets": len(tickets),
            "commits": len(commits),
            "bug_inducing": int(labels.sum()),
        },
        "planted": planted,
        "filter_config": {"clear_repository": clear_repository},
    }
    return SyntheticCorpus(tickets, commits, timeline, manifest)


def _plant(spec, tickets, commits, rng):
    """Plant one ticket per anomaly filter and report their ids."""
    by_id = {t.id: t for t in tickets}
    own: dict[str, list[int]] = {}
    for idx, c in enumerate(commits):
        for tid in c.ticket_ids:
            own.setdefault(tid, []).append(idx)
    candidates = [t.id for t in tickets[len(tickets) // 10: len(tickets) // 2] if t.assigned_at is not None]
    picks = [candidates[int(k)] for k in rng.choice(len(candidates), size=4, replace=False)]
    exclusive, early_a, early_b, other_repo = picks
    planted = {name: [] for name in FILTER_ORDER}

    # every buggy commit of this ticket also names a ticket outside the corpus
    idxs = own[exclusive]
    if not any(commits[i].buggy for i in idxs):
        commits[idxs[0]] = replace(commits[idxs[0]], buggy=True)
    for i in idxs:
        if commits[i].buggy:
            commits[i] = replace(commits[i], ticket_ids=(exclusive, f"{spec.project}-EXT-{exclusive.split('-')[-1]}"))
    planted["ExclusiveBuggyCommitsOnly"].append(exclusive)

    # first commit authored a day before the ticket was opened
    for tid in (early_a, early_b):
        first = min(own[tid], key=lambda i: commits[i].authored_at)
        commits[first] = replace(commits[first], authored_at=by_id[tid].created_at - timedelta(days=1))
    planted["FirstCommitAfterOpeningDate"].append(early_a)
    planted["CommitAfterOpeningDate"].append(early_b)

    # a ticket filed against a project whose repository is not established
    foreign = f"{spec.project}X"
    tickets = [replace(t, project=foreign) if t.id == other_repo else t for t in tickets]
    planted["ClearRepository"].append(other_repo)

    linked = link_commits(tickets, commits)
    latest = max(linked, key=lambda lt: (closed_instant(lt), lt.id))
    planted["NoSnoring"].append(latest.id)
    return tickets, commits, planted, {spec.project: True, foreign: False}


def _timeline(rng, lo: float, hi: float) -> RepoMetricsTimeline:
    records = []
    locs, files, smells = 250_000.0, 1_800.0, 900.0
    t = lo
    while t <= hi:
        records.append(RepoMetricsRecord(_ts(t), locs, files, 3.0 if t < (lo + hi) / 2 else 4.0, smells))
        locs += float(rng.integers(-500, 3000))
        files += float(rng.integers(-3, 15))
        smells = max(0.0, smells + float(rng.integers(-10, 14)))
        t += 7 * 86400.0
    return RepoMetricsTimeline(records)
