"""Sliding-window evaluation, accuracy metrics and the random baseline."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .learners import LearnerSpec, predict_scores, select_features_cfs, smote_balance, train
from .proximity import ProximityPoint, is_available
from .registry import REGISTRY
from .stats import FriedmanResult, InsufficientDataError, average_ranks, friedman_test

log = logging.getLogger(__name__)

METRICS = ("precision", "recall", "f1", "auc", "kappa", "specificity", "gmean")
COUNTS = ("TP", "FP", "FN", "TN")
BALANCING = ("none", "smote")
SELECTION = ("none", "filter")
RESULT_COLUMNS = ("project", "proximity", "classifier", "balancing", "selection", "window", *COUNTS, *METRICS)

# ratio gains would divide by a chance-level kappa near zero; kappa gains are
# reported as a difference in percentage points instead
ABSOLUTE_GAIN_METRICS = frozenset({"kappa"})


# --- windows -----------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    index: int
    start: int
    train_end: int
    test_end: int

    @property
    def train(self) -> range:
        return range(self.start, self.train_end)

    @property
    def test(self) -> range:
        return range(self.train_end, self.test_end)


@dataclass(frozen=True)
class WindowPlan:
    windows: tuple[Window, ...]
    n: int
    init: int = 1000
    step: int = 200
    train_fraction: float = 0.8
    standard: bool = True

    def __len__(self):
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)


def plan_windows(n: int, init: int = 1000, step: int = 200, train_fraction: float = 0.8) -> WindowPlan:
    """Sliding windows of ``init`` rows advancing by ``step``.

    Leftover rows (fewer than ``step``) extend the last test range. Datasets
    shorter than ``init`` get one holdout window flagged as non-standard.
    """
    if n <= 0:
        raise ValueError("cannot plan windows over an empty dataset")
    if init <= 0 or step <= 0 or not 0 < train_fraction < 1:
        raise ValueError("invalid window parameters")
    if n < init:
        cut = max(1, min(n - 1, int(math.floor(train_fraction * n)))) if n > 1 else n
        return WindowPlan((Window(0, 0, cut, n),), n, init, step, train_fraction, standard=False)
    n_train = int(round(train_fraction * init))
    count = (n - init) // step + 1
    windows = []
    for i in range(count):
        start = i * step
        end = n if i == count - 1 else start + init
        windows.append(Window(i, start, start + n_train, end))
    return WindowPlan(tuple(windows), n, init, step, train_fraction)


# --- metrics -----------------------------------------------------------------

@dataclass
class MetricSet:
    TP: float
    FP: float
    FN: float
    TN: float
    precision: float
    recall: float
    f1: float
    auc: float
    kappa: float
    specificity: float
    gmean: float
    reasons: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in (*COUNTS, *METRICS)}


def _ratio(num: float, den: float, name: str, reasons: dict, why: str) -> float:
    if den == 0:
        reasons[name] = why
        return math.nan
    return num / den


def compute_auc(y_true, scores) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    y = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=float)
    if len(y) != len(s):
        raise ValueError("labels and scores differ in length")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = average_ranks(s)
    u = float(ranks[y].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def metrics_from_counts(tp: float, fp: float, fn: float, tn: float, auc: float = math.nan) -> MetricSet:
    reasons: dict[str, str] = {}
    precision = _ratio(tp, tp + fp, "precision", reasons, "no positive predictions (TP+FP = 0)")
    recall = _ratio(tp, tp + fn, "recall", reasons, "no positive labels (TP+FN = 0)")
    specificity = _ratio(tn, tn + fp, "specificity", reasons, "no negative labels (TN+FP = 0)")
    f1 = _ratio(2 * tp, 2 * tp + fp + fn, "f1", reasons, "no positive labels or predictions")
    n = tp + fp + fn + tn
    if n == 0:
        kappa = math.nan
        reasons["kappa"] = "empty test set"
    else:
        p_o = (tp + tn) / n
        p_e = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
        kappa = _ratio(p_o - p_e, 1 - p_e, "kappa", reasons, "chance agreement is 1")
    if math.isnan(recall) or math.isnan(specificity):
        gmean = math.nan
        reasons["gmean"] = "recall or specificity undefined"
    else:
        gmean = math.sqrt(recall * specificity)
    if math.isnan(auc):
        reasons.setdefault("auc", "single-class test set")
    return MetricSet(tp, fp, fn, tn, precision, recall, f1, auc, kappa, specificity, gmean, reasons)


def compute_metrics(y_true, scores, threshold: float = 0.5) -> MetricSet:
    y = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=float)
    if len(y) != len(s):
        raise ValueError("labels and scores differ in length")
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    return metrics_from_counts(tp, fp, fn, tn, compute_auc(y, s))


def random_baseline(y_true, seed: int = 0, trials: int = 1000) -> MetricSet:
    """Metrics of a coin-flip predictor, averaged over ``trials`` draws.

    Each draw scores every instance uniformly on [0, 1); thresholding at 0.5
    makes the hard predictions Bernoulli(0.5).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    y = np.asarray(y_true).astype(bool)
    rng = np.random.default_rng(seed)
    sums = {name: [] for name in (*COUNTS, *METRICS)}
    reasons: dict[str, str] = {}
    for _ in range(trials):
        m = compute_metrics(y, rng.random(len(y)))
        for name, value in m.as_dict().items():
            sums[name].append(value)
        reasons.update(m.reasons)
    means = {}
    for name, values in sums.items():
        arr = np.array(values, dtype=float)
        means[name] = float(arr[~np.isnan(arr)].mean()) if (~np.isnan(arr)).any() else math.nan
    return MetricSet(**means, reasons={k: v for k, v in reasons.items() if math.isnan(means[k])})


def gain_vs_random(model: MetricSet | Mapping, baseline: MetricSet | Mapping) -> dict[str, tuple[float, str]]:
    """Per-metric gain in percent as ``{metric: (value, reason)}``.

    Ratio gains are ``100 * (model - baseline) / baseline``; kappa is reported
    as ``100 * (model - baseline)``. Undefined gains are NaN with a reason.
    """
    mv = model.as_dict() if isinstance(model, MetricSet) else dict(model)
    bv = baseline.as_dict() if isinstance(baseline, MetricSet) else dict(baseline)
    out = {}
    for name in METRICS:
        a, b = mv.get(name, math.nan), bv.get(name, math.nan)
        if a is None or b is None or math.isnan(a) or math.isnan(b):
            out[name] = (math.nan, "metric undefined")
        elif name in ABSOLUTE_GAIN_METRICS:
            out[name] = (100.0 * (a - b), "")
        elif b == 0:
            out[name] = (math.nan, "baseline is zero")
        else:
            out[name] = (100.0 * (a - b) / b, "")
    return out


# --- experiment grid -----------------------------------------------------------

@dataclass(frozen=True)
class SetupConfig:
    classifier: str
    point: ProximityPoint
    balancing: str = "none"
    selection: str = "none"
    seed: int = 0

    def __post_init__(self):
        if self.balancing not in BALANCING:
            raise ValueError(f"balancing must be one of {BALANCING}")
        if self.selection not in SELECTION:
            raise ValueError(f"selection must be one of {SELECTION}")


@dataclass
class ResultRow:
    project: str
    proximity: str
    classifier: str
    balancing: str
    selection: str
    window: int
    metrics: MetricSet
    selected: tuple[str, ...] = ()
    error: str = ""

    def key(self) -> tuple:
        return (self.proximity, self.classifier, self.balancing, self.selection, self.window)

    def as_record(self) -> dict:
        rec = {
            "project": self.project,
            "proximity": self.proximity,
            "classifier": self.classifier,
            "balancing": self.balancing,
            "selection": self.selection,
            "window": self.window,
        }
        rec.update(self.metrics.as_dict())
        return rec


@dataclass(frozen=True)
class BaselineRow:
    project: str
    proximity: str
    window: int
    metrics: MetricSet


@dataclass
class ExperimentResults:
    rows: list[ResultRow]
    baselines: list[BaselineRow]
    plans: dict[str, WindowPlan] = field(default_factory=dict)

    def baseline_for(self, proximity: str, window: int) -> MetricSet:
        for b in self.baselines:
            if b.proximity == proximity and b.window == window:
                return b.metrics
        raise KeyError((proximity, window))


def usable_features(matrix, registry=REGISTRY) -> list[str]:
    """Registry features available at the matrix's proximity point."""
    return [n for n in registry.names if is_available(n, matrix.point, registry)]


def design_matrix(frame: pd.DataFrame, columns: Sequence[str], registry=REGISTRY) -> pd.DataFrame:
    """Restrict to ``columns`` and impute missing cells (0, or "" for categoricals)."""
    out = frame.loc[:, list(columns)].copy()
    for col in columns:
        if registry[col].kind == "categorical":
            out[col] = out[col].astype(object).where(out[col].notna(), "").astype(str)
        else:
            out[col] = out[col].astype(float).fillna(0.0)
    return out


def _smote_frame(train_x: pd.DataFrame, y: np.ndarray, seed: int, registry=REGISTRY):
    cat_cols = [c for c in train_x.columns if registry[c].kind == "categorical"]
    codes = {}
    numeric = train_x.copy()
    for c in cat_cols:
        cats = sorted(set(train_x[c]))
        codes[c] = cats
        lookup = {v: i for i, v in enumerate(cats)}
        numeric[c] = train_x[c].map(lookup).astype(float)
    arr, y_out = smote_balance(numeric.to_numpy(dtype=float), y, seed=seed)
    out = pd.DataFrame(arr, columns=train_x.columns)
    for c in cat_cols:
        idx = np.clip(np.rint(out[c].to_numpy()), 0, len(codes[c]) - 1).astype(int)
        out[c] = [codes[c][i] for i in idx]
    return out, y_out


def evaluate_cell(matrix, window: Window, setup: SetupConfig, columns: Sequence[str], registry=REGISTRY):
    """Train on one window's training rows and score its test rows.

    Returns ``(MetricSet, selected feature names)``.
    """
    X = design_matrix(matrix.frame, columns, registry)
    y = matrix.labels.astype(int)
    train_x = X.iloc[window.start:window.train_end].reset_index(drop=True)
    train_y = y[window.start:window.train_end]
    test_x = X.iloc[window.train_end:window.test_end].reset_index(drop=True)
    test_y = y[window.train_end:window.test_end]
    selected = list(columns)
    if setup.selection == "filter" and len(np.unique(train_y)) > 1:
        selected = select_features_cfs(train_x, train_y)
        train_x, test_x = train_x[selected], test_x[selected]
    if setup.balancing == "smote" and len(np.unique(train_y)) > 1:
        train_x, train_y = _smote_frame(train_x, train_y, setup.seed + window.index, registry)
    model = train(LearnerSpec(setup.classifier, seed=setup.seed), train_x, train_y)
    scores = predict_scores(model, test_x)
    return compute_metrics(test_y, scores), tuple(selected)


def _nan_metrics(reason: str) -> MetricSet:
    nan = math.nan
    m = MetricSet(nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan)
    m.reasons = {name: reason for name in METRICS}
    return m


def run_experiment_grid(
    datasets: Mapping[ProximityPoint, object],
    classifiers: Sequence[str] = ("RF", "LR", "NN"),
    balancing: Sequence[str] = BALANCING,
    selection: Sequence[str] = SELECTION,
    seed: int = 0,
    project: str = "",
    init: int = 1000,
    step: int = 200,
    train_fraction: float = 0.8,
    baseline_trials: int = 1000,
    registry=REGISTRY,
) -> ExperimentResults:
    """Evaluate every (point, classifier, balancing, selection) cell on every window.

    A failing cell is logged and recorded with NaN metrics; the rest of the
    grid still runs.
    """
    rows: list[ResultRow] = []
    baselines: list[BaselineRow] = []
    plans: dict[str, WindowPlan] = {}
    for point in sorted(datasets):
        matrix = datasets[point]
        if not len(matrix):
            log.warning("no rows at %s; skipped", point.label)
            continue
        plan = plan_windows(len(matrix), init, step, train_fraction)
        plans[point.label] = plan
        columns = usable_features(matrix, registry)
        for window in plan:
            test_y = matrix.labels[window.train_end:window.test_end]
            baselines.append(BaselineRow(project, point.label, window.index,
                                         random_baseline(test_y, seed + window.index, baseline_trials)))
        for clf, bal, sel in product(classifiers, balancing, selection):
            setup = SetupConfig(clf, point, bal, sel, seed)
            for window in plan:
                try:
                    metrics, chosen = evaluate_cell(matrix, window, setup, columns, registry)
                    rows.append(ResultRow(project, point.label, clf, bal, sel, window.index, metrics, chosen))
                except Exception as exc:  # noqa: BLE001 - one cell must not abort the grid
                    log.exception("cell %s/%s/%s/%s window %d failed", point.label, clf, bal, sel, window.index)
                    rows.append(ResultRow(project, point.label, clf, bal, sel, window.index,
                                          _nan_metrics(f"{type(exc).__name__}: {exc}"), error=str(exc)))
    return ExperimentResults(rows, baselines, plans)


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        return repr(round(value, 12))
    return str(value)


def write_results(rows: Iterable[ResultRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            rec = row.as_record()
            writer.writerow([_fmt(rec[c]) for c in RESULT_COLUMNS])


def read_results(path: str | Path) -> list[ResultRow]:
    out = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RESULT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"result table {path} lacks columns: {missing}")
        for rec in reader:
            values = {name: float(rec[name]) for name in (*COUNTS, *METRICS)}
            out.append(ResultRow(
                rec["project"], rec["proximity"], rec["classifier"], rec["balancing"], rec["selection"],
                int(rec["window"]), MetricSet(**values),
            ))
    return out


# --- summaries -----------------------------------------------------------------

def _nanmean(values) -> float:
    arr = np.asarray(list(values), dtype=float)
    arr = arr[~np.isnan(arr)]
    return float(arr.mean()) if len(arr) else math.nan


def mean_metrics(rows: Iterable[ResultRow]) -> dict[str, float]:
    rows = list(rows)
    return {name: _nanmean(getattr(r.metrics, name) for r in rows) for name in METRICS}


def gains_table(results: ExperimentResults) -> dict[str, dict[str, dict[str, float]]]:
    """Gains over random per proximity, metric and classifier.

    Each classifier's metrics are averaged over setups and windows first;
    the baseline is averaged over the same windows. The ``"mean"`` entry
    averages the gains across classifiers.
    """
    table: dict[str, dict[str, dict[str, float]]] = {}
    points = sorted({r.proximity for r in results.rows}, key=lambda p: ProximityPoint.parse(p))
    for point in points:
        base_rows = [b.metrics for b in results.baselines if b.proximity == point]
        base = {name: _nanmean(getattr(m, name) for m in base_rows) for name in METRICS}
        per_metric: dict[str, dict[str, float]] = {name: {} for name in METRICS}
        for clf in sorted({r.classifier for r in results.rows if r.proximity == point}):
            model = mean_metrics(r for r in results.rows if r.proximity == point and r.classifier == clf)
            for name, (value, _) in gain_vs_random(model, base).items():
                per_metric[name][clf] = value
        for name in METRICS:
            per_metric[name]["mean"] = _nanmean(per_metric[name].values())
        table[point] = per_metric
    return table


@dataclass(frozen=True)
class ProximityComparison:
    classifier: str
    metric: str
    result: FriedmanResult | None
    reason: str = ""


def proximity_friedman(results: ExperimentResults, metrics: Sequence[str] = METRICS) -> list[ProximityComparison]:
    """Friedman test across proximity points for each classifier and metric.

    Blocks are (balancing, selection, window) cells present at every point.
    """
    out = []
    points = sorted({r.proximity for r in results.rows}, key=lambda p: ProximityPoint.parse(p))
    for clf in sorted({r.classifier for r in results.rows}):
        index = {(r.proximity, r.balancing, r.selection, r.window): r.metrics
                 for r in results.rows if r.classifier == clf}
        cells = sorted({k[1:] for k in index})
        for metric in metrics:
            blocks = [[getattr(index[(p, *c)], metric) if (p, *c) in index else math.nan for p in points]
                      for c in cells]
            try:
                out.append(ProximityComparison(clf, metric, friedman_test(blocks)))
            except InsufficientDataError as exc:
                out.append(ProximityComparison(clf, metric, None, str(exc)))
    return out



BASELINE_COLUMNS = ("project", "proximity", "window", *COUNTS, *METRICS)


def write_baselines(rows: Iterable[BaselineRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BASELINE_COLUMNS)
        for b in rows:
            rec = {"project": b.project, "proximity": b.proximity, "window": b.window, **b.metrics.as_dict()}
            writer.writerow([_fmt(rec[c]) for c in BASELINE_COLUMNS])


def read_baselines(path: str | Path) -> list[BaselineRow]:
    out = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            values = {name: float(rec[name]) for name in (*COUNTS, *METRICS)}
            out.append(BaselineRow(rec["project"], rec["proximity"], int(rec["window"]), MetricSet(**values)))
    return out
