"""Acceptance checks, one ``criterion`` marker per requirement.

The terminal summary prints one PASS/FAIL line per criterion (see conftest).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import replace
from datetime import timedelta
from pathlib import Path

import numpy as np
import pytest

from conftest import run_pipeline
from tlp.corpus import Comment, History, RawCommit, RawTicket, FilterConfig, ingest
from tlp.evaluation import compute_auc, compute_metrics, metrics_from_counts, plan_windows
from tlp.features import FeatureContext, MISSING, RepoMetricsRecord, RepoMetricsTimeline, extract_features
from tlp.learners import smote_balance
from tlp.power import IGRRecord, family_aggregate, information_gain_ratio
from tlp.proximity import POINTS, ProximityPoint, is_available, order_by_proximity
from tlp.registry import REGISTRY, Stage
from tlp.stats import friedman_test

C1 = pytest.mark.criterion(1, "metric oracle suite")
C2 = pytest.mark.criterion(2, "AUC equals pairwise probability")
C3 = pytest.mark.criterion(3, "IGR equals entropy by counting")
C4 = pytest.mark.criterion(4, "Friedman/Kendall worked case")
C5 = pytest.mark.criterion(5, "window planner")
C6 = pytest.mark.criterion(6, "availability masking at Open")
C7 = pytest.mark.criterion(7, "AUC ordering across proximity points")
C8 = pytest.mark.criterion(8, "feature power ranking and interaction")
C9 = pytest.mark.criterion(9, "SMOTE parity and interpolation")
C10 = pytest.mark.criterion(10, "no leakage and deterministic reports")


# -- 1 ---------------------------------------------------------------------------

@C1
def test_hand_derived_confusion_matrix():
    t0 = time.perf_counter()
    # TP=4 FP=1 FN=2 TN=3
    y = [1, 1, 1, 1, 0, 1, 1, 0, 0, 0]
    s = [0.9, 0.8, 0.7, 0.6, 0.55, 0.2, 0.1, 0.3, 0.2, 0.1]
    m = compute_metrics(y, s)
    assert (m.TP, m.FP, m.FN, m.TN) == (4, 1, 2, 3)
    assert abs(m.precision - 0.8) <= 1e-9
    assert abs(m.recall - 2 / 3) <= 1e-9
    assert abs(m.specificity - 0.75) <= 1e-9
    assert abs(m.gmean - math.sqrt(0.5)) <= 1e-9
    assert abs(m.kappa - 0.4) <= 1e-9
    assert time.perf_counter() - t0 < 1.0


@C1
def test_gmean_squared_is_recall_times_specificity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    checked = 0
    for tp, fp, fn, tn in rng.integers(0, 500, size=(1000, 4)):
        m = metrics_from_counts(int(tp), int(fp), int(fn), int(tn))
        if math.isnan(m.gmean):
            assert tp + fn == 0 or tn + fp == 0
            continue
        assert abs(m.gmean ** 2 - m.recall * m.specificity) <= 1e-12
        checked += 1
    assert checked >= 990
    assert time.perf_counter() - t0 < 1.0


# -- 2 ---------------------------------------------------------------------------

def _pairwise_auc(y, s):
    pos, neg = s[y], s[~y]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (len(pos) * len(neg))


@C2
def test_auc_matches_pairwise_probability():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    for _ in range(500):
        n = int(rng.integers(2, 201))
        y = rng.random(n) < rng.uniform(0.05, 0.95)
        y[0], y[1] = True, False
        # coarse scores force ties
        s = rng.integers(0, int(rng.integers(2, 50)), size=n) / 7.0
        assert abs(compute_auc(y, s) - _pairwise_auc(y, s)) <= 1e-9
    assert time.perf_counter() - t0 < 5.0


# -- 3 ---------------------------------------------------------------------------

def _entropy_by_counting(column):
    counts = {}
    for v in column:
        counts[v] = counts.get(v, 0) + 1
    n = len(column)
    return -sum(c / n * math.log2(c / n) for c in counts.values())


def _igr_by_counting(x, y):
    hx = _entropy_by_counting(x)
    if hx == 0:
        return 0.0
    cond = 0.0
    for v in set(x):
        sub = [b for a, b in zip(x, y) if a == v]
        cond += len(sub) / len(x) * _entropy_by_counting(sub)
    return (_entropy_by_counting(list(y)) - cond) / hx


@C3
def test_igr_matches_counting():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(2, 51))
        x = rng.integers(0, int(rng.integers(1, 6)), size=n)
        y = rng.integers(0, 2, size=n)
        assert abs(information_gain_ratio(x, y) - _igr_by_counting(list(x), list(y))) <= 1e-9
    assert time.perf_counter() - t0 < 5.0


@C3
def test_igr_extremes():
    y = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    assert information_gain_ratio(y * 3 + 2, y) == pytest.approx(1.0, abs=1e-12)
    assert information_gain_ratio(np.full(len(y), 4), y) == 0.0


# -- 4 ---------------------------------------------------------------------------

@C4
def test_friedman_identical_orderings():
    res = friedman_test([[1.0, 2.0, 3.0]] * 10)
    assert abs(res.chi_square - 20.0) <= 1e-9
    assert res.kendalls_w == 1.0
    assert abs(res.p_value - 4.54e-5) <= 1e-6
    assert res.df == 2


# -- 5 ---------------------------------------------------------------------------

@C5
def test_windows_1000_and_1400():
    assert len(plan_windows(1000)) == 1
    assert len(plan_windows(1400)) == 3


@C5
def test_windows_1100_two_windows_final_test_100():
    plan = plan_windows(1100)
    assert len(plan) == 2
    last = plan.windows[-1]
    assert last.test_end - last.train_end == 100


@C5
def test_window_count_formula():
    for n in range(1000, 3001, 37):
        plan = plan_windows(n)
        assert len(plan) == (n - 1000) // 200 + 1
        assert plan.windows[-1].test_end == n


# -- 6 ---------------------------------------------------------------------------

ASSIGNED = [n for n in REGISTRY.names if REGISTRY[n].stage is Stage.ASSIGNED]
JIT = REGISTRY.by_family("JIT")


@C6
def test_missing_at_open_is_jit_plus_assigned(small_matrices):
    expected = set(JIT) | set(ASSIGNED)
    assert len(JIT) == 15
    assert {"assignee-ANFIC", "assignee-familiarity", "commits_while_in_progress-count",
            "commits_while_in_progress-churn", "latest_commit-churn", "latest_commit-number_of_files"} <= set(ASSIGNED)
    frame = small_matrices[ProximityPoint.OPEN].frame
    always_missing = {c for c in frame.columns if frame[c].isna().all()}
    assert always_missing == expected
    for name in REGISTRY.names:
        assert is_available(name, ProximityPoint.OPEN) == (name not in expected)


@C6
def test_registry_tags_eight_assigned_features():
    assert len(ASSIGNED) == 8


@C6
def test_family_aggregate_reports_zero_for_jit_at_open(small_matrices):
    from tlp.power import compute_igr_records

    m = small_matrices[ProximityPoint.OPEN]
    plan = plan_windows(len(m))
    stats = [s for s in family_aggregate(compute_igr_records(m, plan, REGISTRY), REGISTRY)
             if s.family == "JIT" and s.point == "Open"]
    assert stats
    assert all(s.mean_igr == 0.0 and s.max_igr == 0.0 for s in stats)


# -- 7 ---------------------------------------------------------------------------

def _read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _pooled(rows, metric):
    out = {}
    for r in rows:
        out.setdefault((r["classifier"], r["proximity"]), []).append(float(r[metric]))
    return {k: float(np.nanmean(v)) for k, v in out.items()}


@C7
def test_auc_ordering_per_classifier(full_run):
    root, _ = full_run
    auc = _pooled(_read_rows(root / "out/evaluation/results.csv"), "auc")
    for clf in ("RF", "LR", "NN"):
        o, i, c = auc[(clf, "Open")], auc[(clf, "InProgress")], auc[(clf, "Closed")]
        assert c > i >= o > 0.5, (clf, o, i, c)
        assert c >= 0.85, (clf, c)
        assert o >= 0.55, (clf, o)


@C7
def test_gains_positive_and_largest_at_closed(full_run):
    root, _ = full_run
    rows = _read_rows(root / "out/report/gains.csv")
    gains = {(r["proximity"], r["metric"]): r for r in rows}
    for clf in ("RF", "LR", "NN"):
        for metric in ("auc", "kappa"):
            vals = {p: float(gains[(p, metric)][clf]) for p in ("Open", "InProgress", "Closed")}
            assert all(v > 0 for v in vals.values()), (clf, metric, vals)
            assert vals["Closed"] == max(vals.values()), (clf, metric, vals)


@C7
def test_runtime_under_five_minutes(full_run):
    _, timings = full_run
    assert sum(timings.values()) < 300, timings


# -- 8 ---------------------------------------------------------------------------

@C8
def test_churn_top3_at_closed_priority_top10_at_open(full_run):
    root, _ = full_run
    rankings = json.loads((root / "out/power/rankings.json").read_text())
    closed = [r["feature"] for r in rankings["Closed"]]
    opened = [r["feature"] for r in rankings["Open"]]
    assert "jit-la-SUM" in closed[:3], closed[:5]
    assert "priority" in opened[:10], opened[:10]


@C8
def test_interaction_significant(full_run):
    root, _ = full_run
    tests = json.loads((root / "out/power/power_tests.json").read_text())
    assert tests["available"]
    assert tests["Proximity x FeatureFamily"]["p_value"] < 0.05


# -- 9 ---------------------------------------------------------------------------

def _check_smote(X, y, seed):
    Xb, yb, prov = smote_balance(X, y, seed=seed, return_provenance=True)
    counts = np.bincount(yb.astype(int), minlength=2)
    assert counts[0] == counts[1]
    n = len(X)
    assert Xb[:n].tobytes() == np.asarray(X, dtype=float).tobytes()
    assert np.array_equal(yb[:n], y)
    minority = np.argmin(np.bincount(y.astype(int), minlength=2))
    for row, (a, b) in zip(Xb[n:], prov):
        assert y[a] == minority and y[b] == minority
        lo, hi = np.minimum(X[a], X[b]), np.maximum(X[a], X[b])
        assert np.all(row >= lo - 1e-9) and np.all(row <= hi + 1e-9)


@C9
def test_smote_random_tables():
    rng = np.random.default_rng(9)
    for seed in range(50):
        n = int(rng.integers(10, 120))
        X = rng.normal(size=(n, int(rng.integers(1, 8)))) * rng.uniform(0.1, 100)
        y = (rng.random(n) < rng.uniform(0.1, 0.4)).astype(int)
        y[:2] = 1
        _check_smote(X, y, seed)


@C9
def test_smote_on_feature_matrix(small_matrices):
    m = small_matrices[ProximityPoint.CLOSED]
    cols = [c for c in m.frame.columns if REGISTRY[c].kind == "numeric"]
    X = m.frame[cols].fillna(0.0).to_numpy(dtype=float)
    _check_smote(X, m.labels.astype(int), 0)


# -- 10 --------------------------------------------------------------------------

def _augment(corpus, after):
    """Copy the corpus and add events dated after ``after``."""
    tickets, commits = [], list(corpus.commits)
    for k, t in enumerate(corpus.tickets):
        late = after + timedelta(hours=1 + k % 5)
        tickets.append(replace(
            t,
            comments=t.comments + (Comment("dev00", late, "late remark: this should be ignored entirely"),),
            histories=t.histories + (History("dev01", late),),
        ))
    for k in range(30):
        at = after + timedelta(days=1 + k)
        tid = f"{corpus.tickets[0].project}-LATE-{k}"
        tickets.append(RawTicket(id=tid, project=corpus.tickets[0].project, type="Bug", priority="Blocker",
                                 created_at=at, assigned_at=at + timedelta(minutes=5), components=("core",),
                                 reporter="dev02", assignee="dev03", title="late ticket",
                                 description="Fix the crash in core. It must not fail."))
        commits.append(RawCommit(f"late{k:04d}", "dev03", at + timedelta(hours=2), (tid,), k % 2 == 0,
                                 la=500, ld=80, nf=7, ns=1, nd=2))
    records = list(corpus.timeline.records)
    stamp = max(records[-1].timestamp, after) + timedelta(days=2)
    records.append(RepoMetricsRecord(stamp, 10 ** 7, 9999, 9, 9999))
    return tickets, commits, RepoMetricsTimeline(records)


@C10
def test_late_events_change_no_feature(small_corpus, small_population):
    labeled, survivors, _, ctx = small_population
    snaps = [order_by_proximity(survivors, p)[0] for p in POINTS]
    latest = max(s.instant for rows in snaps for _, s in rows)
    tickets, commits, timeline = _augment(small_corpus, latest)
    labeled2, _, _, _ = ingest(tickets, commits, config=FilterConfig(
        clear_repository=small_corpus.manifest["filter_config"]["clear_repository"]))
    ctx2 = FeatureContext(tickets, labeled2, commits, {None: timeline})
    by_id = {lt.id: lt for lt in labeled2}
    for point, rows in zip(POINTS, snaps):
        for lt, _ in rows:
            before = extract_features(lt, point, ctx).values
            after = extract_features(by_id[lt.id], point, ctx2).values
            for name in REGISTRY.names:
                a, b = before[name], after[name]
                same = a == b or (a is MISSING and b is MISSING) or (
                    isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))
                assert same, (lt.id, point, name, a, b)


@C10
def test_two_runs_give_identical_reports(tmp_path):
    for run in ("a", "b"):
        run_pipeline(tmp_path / run, n_tickets=1400, seed=3)
    a, b = tmp_path / "a/out/report", tmp_path / "b/out/report"
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert "summary.md" in names and "manifest.json" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
