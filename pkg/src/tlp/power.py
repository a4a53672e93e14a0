"""Feature prediction power: information gain ratio, rankings and factor tests."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .stats import FriedmanResult, InsufficientDataError, average_ranks, f_sf, friedman_test

DEFAULT_BINS = 10


def discretize(values, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Integer codes for a column.

    Non-numeric columns are coded by category. Numeric columns with more
    than ``bins`` distinct values get equal-frequency bins whose cut points
    are data values, so any strictly increasing transform yields the same
    codes. Missing values form their own code (-1).
    """
    arr = np.asarray(values, dtype=object)
    if not len(arr):
        return np.zeros(0, dtype=int)
    try:
        x = arr.astype(float)
    except (TypeError, ValueError):
        labels = np.array(["\0missing" if v is None else str(v) for v in arr], dtype=object)
        _, codes = np.unique(labels, return_inverse=True)
        return codes.astype(int)
    codes = np.full(len(x), -1, dtype=int)
    ok = ~np.isnan(x)
    xs = x[ok]
    if not len(xs):
        return codes
    uniq = np.unique(xs)
    if len(uniq) <= bins:
        codes[ok] = np.searchsorted(uniq, xs)
        return codes
    ordered = np.sort(xs)
    n = len(ordered)
    edges = np.unique([ordered[(i * n) // bins] for i in range(1, bins)])
    codes[ok] = np.searchsorted(edges, xs, side="right")
    return codes


def entropy_bits(values) -> float:
    arr = np.asarray(values)
    if not len(arr):
        return 0.0
    if arr.ndim == 1:
        _, counts = np.unique(arr, return_counts=True)
    else:
        _, counts = np.unique(arr, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def information_gain_ratio(x, y, bins: int = DEFAULT_BINS) -> float:
    """(H(Y) - H(Y|X)) / H(X) in bits on the discretized column; 0 when H(X) = 0."""
    xd = discretize(x, bins)
    y = np.asarray(y)
    if len(xd) != len(y):
        raise ValueError("feature column and labels differ in length")
    hx = entropy_bits(xd)
    if hx <= 0:
        return 0.0
    gain = hx + entropy_bits(y) - entropy_bits(np.stack([xd, y.astype(int)], axis=1))
    return float(min(1.0, max(0.0, gain / hx)))


@dataclass(frozen=True)
class IGRRecord:
    window: int
    point: str
    feature: str
    family: str
    igr: float
    measurable: bool = True


def compute_igr_records(matrix, windows, registry, bins: int = DEFAULT_BINS) -> list[IGRRecord]:
    """IGR of every registry feature over each window's rows.

    Features not available at the matrix's proximity point get IGR 0 and are
    flagged as not measurable.
    """
    from .proximity import is_available

    records = []
    point = matrix.point
    for w in windows:
        lo, hi = w.start, w.test_end
        y = matrix.labels[lo:hi]
        for name in registry.names:
            family = registry.family(name)
            if not is_available(name, point, registry):
                records.append(IGRRecord(w.index, point.label, name, family, 0.0, False))
                continue
            col = matrix.frame[name].to_numpy()[lo:hi]
            records.append(IGRRecord(w.index, point.label, name, family, information_gain_ratio(col, y, bins)))
    return records


@dataclass(frozen=True)
class RankedFeature:
    feature: str
    family: str
    mean_igr: float
    rank: int


@dataclass
class Ranking:
    rows: list[RankedFeature]

    def top(self, k: int = 10) -> list[RankedFeature]:
        return self.rows[:k]

    def bottom(self, k: int = 10) -> list[RankedFeature]:
        return self.rows[-k:] if k else []

    def position(self, feature: str) -> int | None:
        for r in self.rows:
            if r.feature == feature:
                return r.rank
        return None


def rank_features(records: Iterable[IGRRecord]) -> Ranking:
    """Rank measurable features by mean IGR across the given records' windows.

    Descending by mean IGR, ties by code-name.
    """
    sums: dict[str, list] = {}
    for r in records:
        if not r.measurable:
            continue
        entry = sums.setdefault(r.feature, [r.family, 0.0, 0])
        entry[1] += r.igr
        entry[2] += 1
    means = [(name, fam, total / n) for name, (fam, total, n) in sums.items()]
    means.sort(key=lambda t: (-t[2], t[0]))
    return Ranking([RankedFeature(name, fam, m, i + 1) for i, (name, fam, m) in enumerate(means)])


def rankings_by_point(records: Iterable[IGRRecord]) -> dict[str, Ranking]:
    grouped = defaultdict(list)
    for r in records:
        grouped[r.point].append(r)
    return {p: rank_features(rs) for p, rs in grouped.items()}


@dataclass(frozen=True)
class FamilyStat:
    window: int
    point: str
    family: str
    mean_igr: float
    max_igr: float


def family_aggregate(records: Iterable[IGRRecord], registry=None) -> list[FamilyStat]:
    """Per (window, point, family) mean and max IGR.

    With a registry, each record's feature must belong to it and the family
    is taken from the registry.
    """
    grouped: dict[tuple, list[float]] = defaultdict(list)
    for r in records:
        family = registry.family(r.feature) if registry is not None else r.family
        grouped[(r.window, r.point, family)].append(r.igr if r.measurable else 0.0)
    return [
        FamilyStat(w, p, f, float(np.mean(v)), float(np.max(v)))
        for (w, p, f), v in sorted(grouped.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2]))
    ]


@dataclass(frozen=True)
class InteractionResult:
    f_statistic: float
    df_effect: int
    df_residual: int
    p_value: float


@dataclass(frozen=True)
class PowerTests:
    family: FriedmanResult
    proximity: FriedmanResult
    interaction: InteractionResult

    def p_values(self) -> dict[str, float]:
        return {
            "FeatureFamily": self.family.p_value,
            "Proximity": self.proximity.p_value,
            "Proximity x FeatureFamily": self.interaction.p_value,
        }


def _dummies(codes: np.ndarray, n_levels: int) -> np.ndarray:
    out = np.zeros((len(codes), max(n_levels - 1, 0)))
    for level in range(1, n_levels):
        out[:, level - 1] = codes == level
    return out


def _rss(design: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid), int(rank)


def aligned_rank_interaction(values: np.ndarray, window: np.ndarray, family: np.ndarray, point: np.ndarray) -> InteractionResult:
    """Interaction test of family x point on aligned ranks, with windows as blocks.

    Observations are aligned for the interaction (cell residual plus the
    estimated interaction effect), ranked jointly, and the interaction term
    is tested with a nested-model F test on the ranks.
    """
    y = np.asarray(values, dtype=float)
    cells = defaultdict(list)
    for i, key in enumerate(zip(window, family, point)):
        cells[key].append(i)
    cell_mean = np.empty(len(y))
    for idx in cells.values():
        cell_mean[idx] = y[idx].mean()

    def marginal(keys):
        groups = defaultdict(list)
        for i, key in enumerate(keys):
            groups[key].append(i)
        out = np.empty(len(y))
        for idx in groups.values():
            out[idx] = y[idx].mean()
        return out

    fp = marginal(list(zip(family, point)))
    f_m = marginal(list(family))
    p_m = marginal(list(point))
    aligned = (y - cell_mean) + (fp - f_m - p_m + y.mean())
    aligned = np.round(aligned, 12)
    ranks = average_ranks(aligned)

    w_codes = np.unique(window, return_inverse=True)[1]
    f_codes = np.unique(family, return_inverse=True)[1]
    p_codes = np.unique(point, return_inverse=True)[1]
    nw, nf, np_ = w_codes.max() + 1, f_codes.max() + 1, p_codes.max() + 1
    fp_codes = f_codes * np_ + p_codes
    base = np.column_stack([np.ones(len(y)), _dummies(w_codes, nw), _dummies(f_codes, nf), _dummies(p_codes, np_)])
    full = np.column_stack([base, _dummies(fp_codes, nf * np_)])
    rss_red, rank_red = _rss(base, ranks)
    rss_full, rank_full = _rss(full, ranks)
    df_eff = rank_full - rank_red
    df_res = len(y) - rank_full
    if df_eff <= 0 or df_res <= 0:
        return InteractionResult(0.0, max(df_eff, 0), max(df_res, 0), 1.0)
    num = max(rss_red - rss_full, 0.0) / df_eff
    if rss_full <= 1e-12 * max(1.0, rss_red):
        if num <= 1e-12:
            return InteractionResult(0.0, df_eff, df_res, 1.0)
        return InteractionResult(math.inf, df_eff, df_res, 0.0)
    f_stat = num / (rss_full / df_res)
    return InteractionResult(f_stat, df_eff, df_res, f_sf(f_stat, df_eff, df_res))


def two_way_power_analysis(records: Sequence[IGRRecord]) -> PowerTests:
    """Factor tests on IGR for FeatureFamily, Proximity and their interaction.

    Only windows present at every proximity point are used, so observations
    are paired by window.
    """
    records = list(records)
    points = sorted({r.point for r in records})
    families = sorted({r.family for r in records})
    if len(points) < 2 or len(families) < 2:
        raise InsufficientDataError("need at least 2 families and 2 proximity points")
    windows_per_point = [{r.window for r in records if r.point == p} for p in points]
    common = sorted(set.intersection(*windows_per_point))
    if not common:
        raise InsufficientDataError("no window is shared by all proximity points")
    records = [r for r in records if r.window in common]
    value = {(r.window, r.point, r.feature): (r.igr if r.measurable else 0.0) for r in records}
    features = sorted({r.feature for r in records})
    fam_of = {r.feature: r.family for r in records}

    fam_blocks = []
    for w in common:
        for p in points:
            row = []
            for f in families:
                vals = [value[(w, p, x)] for x in features if fam_of[x] == f and (w, p, x) in value]
                row.append(np.mean(vals) if vals else np.nan)
            fam_blocks.append(row)
    prox_blocks = [
        [value.get((w, p, x), np.nan) for p in points] for w in common for x in features
    ]
    fam_res = friedman_test(fam_blocks)
    prox_res = friedman_test(prox_blocks)

    obs = [(w, fam_of[x], p, value[(w, p, x)]) for (w, p, x) in sorted(value)]
    inter = aligned_rank_interaction(
        np.array([o[3] for o in obs]),
        np.array([o[0] for o in obs]),
        np.array([o[1] for o in obs]),
        np.array([o[2] for o in obs]),
    )
    return PowerTests(fam_res, prox_res, inter)
