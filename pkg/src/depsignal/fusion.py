"""User-level fusion of mean chunk confidence with feature families, and permutation importance."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from sklearn.calibration import CalibratedClassifierCV
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import SGDClassifier
from sklearn.model_selection import StratifiedKFold
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVC, LinearSVC

from .corpus import DP
from .errors import ConfigError, DataError
from .features import FEATURE_GROUPS, FeatureVector
from .metrics import THRESHOLD, MetricsReport, evaluate_scores
from .scorer import UserScore

SCORE = "XLNET_SCORE"
SCORE_COLUMN = "mean_confidence"
GROUP_ORDER = ("V", "D", "E", "P", "L", SCORE)
GROUP_COLUMNS: dict[str, tuple[str, ...]] = {**FEATURE_GROUPS, SCORE: (SCORE_COLUMN,)}
_GROUP_ALIASES = {"SCORE": SCORE}

SVM = "SVM"
LOGREG = "LOGREG"
RANDOM_FOREST = "RANDOM_FOREST"
ALGORITHMS = (SVM, LOGREG, RANDOM_FOREST)
_ALGO_ALIASES = {"svm": SVM, "logreg": LOGREG, "lr": LOGREG, "rf": RANDOM_FOREST, "random_forest": RANDOM_FOREST}


def parse_groups(groups: str | Iterable[str]) -> frozenset[str]:
    """Normalize a group selection such as ``"V,D,SCORE"``."""
    if isinstance(groups, str):
        groups = [g for g in groups.split(",") if g.strip()]
    out = set()
    for g in groups:
        name = g.strip().upper()
        name = _GROUP_ALIASES.get(name, name)
        if name not in GROUP_COLUMNS:
            raise ConfigError(f"unknown feature group {g!r}; expected one of {', '.join(GROUP_ORDER)} or SCORE")
        out.add(name)
    if not out:
        raise ConfigError("feature group selection is empty")
    return frozenset(out)


def parse_algorithm(name: str) -> str:
    algo = _ALGO_ALIASES.get(name.lower(), name.upper())
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown fusion algorithm {name!r}")
    return algo


@dataclass(frozen=True)
class FusionDataset:
    user_ids: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray  # 1 = DP
    column_names: tuple[str, ...]
    groups: Mapping[str, tuple[str, ...]]

    def __len__(self) -> int:
        return len(self.user_ids)

    def rows(self):
        for uid, x, y in zip(self.user_ids, self.X, self.y):
            yield uid, x, int(y)


def _feature_row(fv) -> Mapping[str, float | None]:
    if isinstance(fv, FeatureVector):
        return fv.as_row() if fv.complete else {}
    return fv


def build_fusion_dataset(
    user_scores: Iterable[UserScore] | Mapping[str, float],
    feature_vectors: Mapping[str, FeatureVector | Mapping[str, float]],
    labels: Mapping[str, str],
    groups: str | Iterable[str],
) -> FusionDataset:
    """Join scores, features and labels on user_id, keeping complete users only.

    Columns follow V, D, E, P, L, XLNET_SCORE order regardless of how the
    selection was written; rows are ordered by user_id.
    """
    selected = parse_groups(groups)
    order = [g for g in GROUP_ORDER if g in selected]
    columns = tuple(c for g in order for c in GROUP_COLUMNS[g])
    if isinstance(user_scores, Mapping):
        score_map = {k: float(v) for k, v in user_scores.items()}
    else:
        score_map = {s.user_id: s.mean_confidence for s in user_scores}
    needs_score = SCORE in selected
    needs_features = any(g != SCORE for g in selected)

    candidates = set(labels)
    if needs_score:
        candidates &= set(score_map)
    if needs_features:
        candidates &= set(feature_vectors)
    ids, X, y = [], [], []
    for uid in sorted(candidates):
        row = dict(_feature_row(feature_vectors[uid])) if needs_features else {}
        if needs_score:
            row[SCORE_COLUMN] = score_map[uid]
        vals = [row.get(c) for c in columns]
        if any(v is None or not np.isfinite(v) for v in vals):
            continue
        ids.append(uid)
        X.append(vals)
        y.append(1 if labels[uid] == DP else 0)
    if not ids:
        raise DataError("no user has a complete record for the selected feature groups")
    return FusionDataset(
        user_ids=tuple(ids),
        X=np.asarray(X, dtype=float),
        y=np.asarray(y, dtype=int),
        column_names=columns,
        groups={g: GROUP_COLUMNS[g] for g in order},
    )


@dataclass
class FusionModel:
    algorithm: str
    estimator: object
    scaler: StandardScaler
    column_names: tuple[str, ...]
    seed: int
    params: dict = field(default_factory=dict)

    def predict_proba(self, X) -> np.ndarray:
        """Confidence of the DP class for each row."""
        Z = self.scaler.transform(np.asarray(X, dtype=float))
        proba = self.estimator.predict_proba(Z)
        return proba[:, list(self.estimator.classes_).index(1)]

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= THRESHOLD).astype(int)


def _estimator(algorithm: str, seed: int, y: np.ndarray, kernel: str, n_jobs: int | None):
    if algorithm == LOGREG:
        return SGDClassifier(
            loss="log_loss", penalty="l2", alpha=1e-4, learning_rate="adaptive", eta0=0.1,
            max_iter=1000, tol=1e-6, random_state=seed,
        )
    if algorithm == RANDOM_FOREST:
        return RandomForestClassifier(
            n_estimators=100, max_features="sqrt", random_state=seed, n_jobs=n_jobs,
        )
    if kernel == "linear":
        base = LinearSVC(C=1.0, dual="auto", max_iter=20000, random_state=seed)
    elif kernel == "rbf":
        base = SVC(kernel="rbf", C=1.0, gamma="scale", random_state=seed)
    else:
        raise ConfigError(f"unknown SVM kernel {kernel!r}")
    # Platt scaling on held-out margins; folds limited by the smaller class
    n_splits = int(min(5, np.bincount(y).min()))
    if n_splits < 2:
        return base
    cv = StratifiedKFold(n_splits=n_splits, shuffle=True, random_state=seed)
    return CalibratedClassifierCV(base, method="sigmoid", cv=cv, ensemble=False)


class _MarginSigmoid:
    """Fallback for tiny classes: logistic of the raw margin."""

    def __init__(self, base):
        self.base = base

    def fit(self, X, y):
        self.base.fit(X, y)
        self.classes_ = self.base.classes_
        return self

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-self.base.decision_function(X)))
        return np.column_stack([1.0 - p, p])


def train_fusion(
    data: FusionDataset,
    algorithm: str = SVM,
    seed: int = 0,
    kernel: str = "linear",
    n_jobs: int | None = None,
) -> FusionModel:
    """Standardize on ``data`` and fit one classifier; deterministic per seed."""
    algorithm = parse_algorithm(algorithm)
    if len(np.unique(data.y)) < 2:
        raise DataError("fusion training data must contain both DP and ND users")
    scaler = StandardScaler().fit(data.X)
    est = _estimator(algorithm, seed, data.y, kernel, n_jobs)
    if algorithm == SVM and not isinstance(est, CalibratedClassifierCV):
        est = _MarginSigmoid(est)
    est.fit(scaler.transform(data.X), data.y)
    params = {"kernel": kernel} if algorithm == SVM else {}
    return FusionModel(algorithm, est, scaler, data.column_names, seed, params)


def _check_columns(model: FusionModel, data: FusionDataset) -> None:
    if tuple(model.column_names) != tuple(data.column_names):
        raise DataError(f"model columns {model.column_names} do not match data columns {data.column_names}")


def evaluate(model: FusionModel, data: FusionDataset) -> MetricsReport:
    _check_columns(model, data)
    return evaluate_scores(model.predict_proba(data.X), data.y)


@dataclass(frozen=True)
class Importance:
    column: str
    mean_importance: float
    sd: float


def _accuracy(model: FusionModel, X, y) -> float:
    return float(np.mean(model.predict(X) == y))


def permutation_importance(
    model: FusionModel, data: FusionDataset, repeats: int = 10, seed: int = 0,
) -> dict[str, Importance]:
    """Accuracy drop when one column is shuffled, averaged over ``repeats`` shuffles.

    Columns are visited in order and all shuffles draw from a single
    generator seeded with ``seed``; sd is the population standard deviation.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    _check_columns(model, data)
    rng = np.random.default_rng(seed)
    base = _accuracy(model, data.X, data.y)
    out = {}
    for j, name in enumerate(data.column_names):
        drops = np.empty(repeats)
        for r in range(repeats):
            Xp = data.X.copy()
            Xp[:, j] = Xp[rng.permutation(len(Xp)), j]
            drops[r] = base - _accuracy(model, Xp, data.y)
        out[name] = Importance(name, float(drops.mean()), float(drops.std()))
    return out


def ranked(importances: Mapping[str, Importance]) -> list[Importance]:
    """Descending by mean importance; ties keep column order."""
    return sorted(importances.values(), key=lambda i: -i.mean_importance)


def write_importance_csv(importances: Mapping[str, Importance], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "mean_importance", "sd"])
        for imp in importances.values():
            w.writerow([imp.column, repr(imp.mean_importance), repr(imp.sd)])


def read_importance_csv(path) -> dict[str, Importance]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {
            r["column"]: Importance(r["column"], float(r["mean_importance"]), float(r["sd"]))
            for r in csv.DictReader(fh)
        }


def write_metrics_json(report: MetricsReport, path, **metadata) -> None:
    obj = report.to_json()
    obj.update(metadata)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def split_dataset(data: FusionDataset, test_ids: Iterable[str]) -> tuple[FusionDataset, FusionDataset]:
    """Partition rows into (train, test) by user id."""
    test_ids = set(test_ids)
    mask = np.array([u in test_ids for u in data.user_ids])

    def take(m):
        return FusionDataset(
            tuple(u for u, k in zip(data.user_ids, m) if k), data.X[m], data.y[m],
            data.column_names, data.groups,
        )

    return take(~mask), take(mask)


def subset_columns(data: FusionDataset, groups: str | Iterable[str]) -> FusionDataset:
    """Restrict ``data`` to the columns of ``groups`` (which it must contain)."""
    selected = parse_groups(groups)
    missing = selected - set(data.groups)
    if missing:
        raise DataError(f"dataset lacks groups {sorted(missing)}")
    order = [g for g in GROUP_ORDER if g in selected]
    cols = tuple(c for g in order for c in GROUP_COLUMNS[g])
    idx = [data.column_names.index(c) for c in cols]
    return FusionDataset(data.user_ids, data.X[:, idx], data.y, cols, {g: GROUP_COLUMNS[g] for g in order})


__all__ = [
    "ALGORITHMS", "FusionDataset", "FusionModel", "Importance", "LOGREG", "RANDOM_FOREST", "SCORE",
    "SVM", "build_fusion_dataset", "evaluate", "parse_algorithm", "parse_groups", "permutation_importance",
    "ranked", "read_importance_csv", "split_dataset", "subset_columns", "train_fusion",
    "write_importance_csv", "write_metrics_json",
]
