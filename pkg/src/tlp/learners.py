"""Classifiers, SMOTE balancing and correlation-based filter feature selection."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import pandas as pd
from sklearn.ensemble import RandomForestClassifier
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.neural_network import MLPClassifier

from .power import discretize, entropy_bits

KINDS = ("RF", "LR", "NN")

DEFAULT_HYPERPARAMETERS = {
    "RF": {"n_estimators": 100, "max_features": "sqrt", "max_depth": None, "criterion": "gini"},
    "LR": {"C": 1.0, "tol": 1e-6, "max_iter": 1000},
    "NN": {"hidden_layer_sizes": [100], "activation": "relu", "solver": "adam", "max_iter": 200,
           "n_iter_no_change": 10, "tol": 1e-4},
}


class ColumnMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    seed: int = 0
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")

    def params(self) -> dict:
        merged = dict(DEFAULT_HYPERPARAMETERS[self.kind])
        merged.update(self.hyperparameters)
        return merged


@dataclass
class TrainedModel:
    kind: str
    features: list[str]
    categorical: dict[str, list]  # column -> categories seen in training
    estimator: Any = None
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    prior: float | None = None  # set for degenerate single-class models
    encoded_columns: list[str] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return self.prior is not None

    def to_json(self) -> str:
        """Audit dump; not a stable interchange format."""
        payload = {
            "format": "tlp-model/1",
            "kind": self.kind,
            "features": self.features,
            "categorical": self.categorical,
            "encoded_columns": self.encoded_columns,
            "prior": self.prior,
            "mean": None if self.mean is None else self.mean.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
        }
        est = self.estimator
        if isinstance(est, LogisticRegression):
            payload["coef"] = est.coef_.tolist()
            payload["intercept"] = est.intercept_.tolist()
        elif isinstance(est, MLPClassifier):
            payload["coefs"] = [c.tolist() for c in est.coefs_]
            payload["intercepts"] = [c.tolist() for c in est.intercepts_]
        elif isinstance(est, RandomForestClassifier):
            payload["n_trees"] = len(est.estimators_)
        return json.dumps(payload, sort_keys=True)


def _as_frame(X) -> pd.DataFrame:
    if isinstance(X, pd.DataFrame):
        return X
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be two-dimensional")
    return pd.DataFrame(X, columns=[f"x{i}" for i in range(X.shape[1])])


def _categorical_columns(frame: pd.DataFrame) -> list[str]:
    return [c for c in frame.columns if frame[c].dtype == object or isinstance(frame[c].dtype, pd.CategoricalDtype)]


def _encode(frame: pd.DataFrame, model: TrainedModel) -> np.ndarray:
    blocks = []
    for col in model.features:
        if col in model.categorical:
            cats = model.categorical[col]
            values = frame[col].astype(object).to_numpy()
            if model.kind == "RF":
                lookup = {c: i for i, c in enumerate(cats)}
                blocks.append(np.array([lookup.get(v, -1) for v in values], dtype=float)[:, None])
            else:
                blocks.append(np.stack([(values == c).astype(float) for c in cats], axis=1)
                              if cats else np.zeros((len(frame), 0)))
        else:
            blocks.append(frame[col].to_numpy(dtype=float)[:, None])
    if not blocks:
        return np.zeros((len(frame), 0))
    return np.concatenate(blocks, axis=1)


def _encoded_names(model: TrainedModel) -> list[str]:
    names = []
    for col in model.features:
        if col in model.categorical and model.kind != "RF":
            names += [f"{col}={c}" for c in model.categorical[col]]
        else:
            names.append(col)
    return names


def train(spec: LearnerSpec, X, y) -> TrainedModel:
    """Fit one classifier; a single-class ``y`` yields a constant-prior model."""
    frame = _as_frame(X)
    y = np.asarray(y).astype(int)
    if len(frame) != len(y):
        raise ValueError("X and y lengths differ")
    if frame.isna().to_numpy().any():
        raise ValueError("X contains missing cells; impute before training")
    cat_cols = _categorical_columns(frame)
    model = TrainedModel(
        kind=spec.kind,
        features=list(frame.columns),
        categorical={c: sorted({str(v) for v in frame[c]}) for c in cat_cols},
    )
    if len(np.unique(y)) < 2:
        model.prior = float(y.mean()) if len(y) else 0.5
        return model
    for c in cat_cols:
        frame = frame.assign(**{c: frame[c].astype(str)})
    Z = _encode(frame, model)
    model.encoded_columns = _encoded_names(model)
    params = spec.params()
    if spec.kind == "RF":
        est = RandomForestClassifier(random_state=spec.seed, n_jobs=1, **params)
        est.fit(Z, y)
    else:
        model.mean = Z.mean(axis=0)
        sd = Z.std(axis=0)
        model.scale = np.where(sd > 0, sd, 1.0)
        Zs = (Z - model.mean) / model.scale
        if spec.kind == "LR":
            est = LogisticRegression(random_state=spec.seed, **params)
        else:
            p = dict(params)
            p["hidden_layer_sizes"] = tuple(p["hidden_layer_sizes"])
            est = MLPClassifier(random_state=spec.seed, early_stopping=False, **p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            est.fit(Zs, y)
    model.estimator = est
    return model


def predict_scores(model: TrainedModel, X) -> np.ndarray:
    frame = _as_frame(X)
    if len(frame) == 0:
        return np.zeros(0)
    if set(frame.columns) != set(model.features):
        raise ColumnMismatchError(
            f"columns {sorted(set(frame.columns) ^ set(model.features))} do not match the trained feature list"
        )
    if model.degenerate:
        return np.full(len(frame), model.prior)
    frame = frame[model.features]
    for c in model.categorical:
        frame = frame.assign(**{c: frame[c].astype(str)})
    Z = _encode(frame, model)
    if model.kind == "RF":
        votes = np.zeros(len(frame))
        for tree in model.estimator.estimators_:
            votes += tree.predict(Z) == 1
        scores = votes / len(model.estimator.estimators_)
    else:
        Zs = (Z - model.mean) / model.scale
        scores = model.estimator.predict_proba(Zs)[:, 1]
    return np.clip(np.nan_to_num(scores, nan=0.5), 0.0, 1.0)


def smote_balance(X, y, k: int = 5, seed: int = 0, return_provenance: bool = False):
    """Oversample the minority class to parity.

    Synthetic rows are ``x + u * (neighbor - x)`` with ``u ~ U(0, 1)``; the
    neighbor is one of the ``k`` nearest minority rows (Euclidean). Original
    rows are returned unchanged and first, in their original order.

    With ``return_provenance`` a third item gives, per synthetic row, the
    input row indices of its two generating minority rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("SMOTE needs a non-empty minority class")
    if k < 1:
        raise ValueError("k must be >= 1")
    minority = classes[np.argmin(counts)]
    n_new = int(counts.max() - counts.min())
    minority_idx = np.flatnonzero(y == minority)
    if n_new == 0:
        empty = np.zeros((0, 2), dtype=int)
        return (X.copy(), y.copy(), empty) if return_provenance else (X.copy(), y.copy())
    minority_rows = X[minority_idx]
    m = len(minority_rows)
    rng = np.random.default_rng(seed)
    k_eff = min(k, m - 1)
    if k_eff < 1:
        synthetic = np.repeat(minority_rows, n_new, axis=0)
        base = pick = np.zeros(n_new, dtype=int)
    else:
        d2 = ((minority_rows[:, None, :] - minority_rows[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        base = rng.integers(0, m, size=n_new)
        pick = neighbors[base, rng.integers(0, k_eff, size=n_new)]
        u = rng.random(n_new)[:, None]
        synthetic = minority_rows[base] + u * (minority_rows[pick] - minority_rows[base])
    X_out = np.vstack([X, synthetic])
    y_out = np.concatenate([y, np.full(n_new, minority, dtype=y.dtype)])
    if return_provenance:
        return X_out, y_out, np.stack([minority_idx[base], minority_idx[pick]], axis=1)
    return X_out, y_out


def symmetric_uncertainty(a: np.ndarray, b: np.ndarray) -> float:
    ha, hb = entropy_bits(a), entropy_bits(b)
    if ha + hb == 0:
        return 0.0
    joint = entropy_bits(np.stack([a, b], axis=1))
    return 2.0 * (ha + hb - joint) / (ha + hb)


def cfs_merit(subset: Sequence[int], r_cf: np.ndarray, r_ff: np.ndarray) -> float:
    k = len(subset)
    if k == 0:
        return 0.0
    rcf = float(np.mean(r_cf[list(subset)]))
    if k == 1:
        rff = 0.0
    else:
        idx = list(subset)
        block = r_ff[np.ix_(idx, idx)]
        rff = float((block.sum() - np.trace(block)) / (k * (k - 1)))
    return k * rcf / np.sqrt(k + k * (k - 1) * rff)


def select_features_cfs(X, y, bins: int = 10) -> list[str]:
    """Greedy forward correlation-based feature subset selection.

    Correlations are symmetric uncertainties between equal-frequency
    discretized columns. The search stops when no candidate strictly improves
    the merit; at least one feature is always kept.
    """
    frame = _as_frame(X)
    names = list(frame.columns)
    if not names:
        raise ValueError("at least one feature is required")
    y = np.asarray(y)
    cols = [discretize(frame[c].to_numpy(), bins) for c in names]
    r_cf = np.array([symmetric_uncertainty(c, y) for c in cols])
    n = len(names)
    r_ff = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            r_ff[i, j] = r_ff[j, i] = symmetric_uncertainty(cols[i], cols[j])
    selected: list[int] = []
    best = -np.inf
    remaining = list(range(n))
    while remaining:
        scored = [(cfs_merit(selected + [j], r_cf, r_ff), -j) for j in remaining]
        merit, neg_j = max(scored)
        if selected and merit <= best + 1e-12:
            break
        selected.append(-neg_j)
        remaining.remove(-neg_j)
        best = merit
    return [names[i] for i in selected]
