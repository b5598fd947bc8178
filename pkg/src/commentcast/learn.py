"""Regression engines behind a single fit/predict interface.

Linear least squares is solved directly (centered normal equations with a
tiny ridge for rank deficiency). The random forest does its own bootstrap
and seeding per tree, delegating single-tree CART construction (variance
reduction, midpoint thresholds, min leaf 2, random feature subset per node)
to scikit-learn. SVR and the one-hidden-layer MLP are optional engines kept
behind the same interface.
"""

from __future__ import annotations

import pickle
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.exceptions import ConvergenceWarning
from sklearn.neural_network import MLPRegressor
from sklearn.svm import SVR
from sklearn.tree import DecisionTreeRegressor

MODEL_FILE_FORMAT = 1


class TrainingError(RuntimeError):
    pass


class Regressor(Protocol):
    def predict(self, X: np.ndarray) -> np.ndarray: ...

    @property
    def descriptor(self) -> str: ...


def _check_matrix(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise TrainingError("X must be 2-dimensional")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise TrainingError("empty design matrix")
    if X.shape[0] != y.shape[0]:
        raise TrainingError("X and y row counts differ")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise TrainingError("non-finite values in training data")
    return X, y


def _describe(name: str, params: Mapping[str, Any]) -> str:
    inner = ", ".join(f"{k}={params[k]}" for k in sorted(params))
    return f"{name}({inner})"


# ---------------------------------------------------------------------------
# Linear regression


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    ridge: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients + self.intercept

    @property
    def descriptor(self) -> str:
        return _describe("lr", {"ridge": self.ridge})


def fit_ols(X: np.ndarray, y: np.ndarray, ridge: float = 1e-8) -> LinearModel:
    """Least squares with a tiny ridge on the centered columns.

    Centering keeps the intercept exact and makes the ridge perturbation on
    a consistent system negligible (well below 1e-9 for sane scales).
    """
    X, y = _check_matrix(X, y)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    gram = Xc.T @ Xc + ridge * np.eye(X.shape[1])
    coef = np.linalg.solve(gram, Xc.T @ (y - y_mean))
    if not np.isfinite(coef).all():
        raise TrainingError("linear solve produced non-finite coefficients")
    return LinearModel(coefficients=coef, intercept=float(y_mean - x_mean @ coef), ridge=ridge)


# ---------------------------------------------------------------------------
# Random forest


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[DecisionTreeRegressor, ...]
    ntrees: int
    seed: int
    mtry: int
    min_leaf: int
    # Per-tree (min, max) of the bootstrap targets; leaf means stay inside.
    bootstrap_ranges: tuple[tuple[float, float], ...]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    @property
    def descriptor(self) -> str:
        return _describe("rf", {"ntrees": self.ntrees, "seed": self.seed})

    def tree_splits(self, index: int) -> list[tuple[int, float]]:
        """(column, threshold) pairs for the internal nodes of one tree."""
        inner = self.trees[index].tree_
        return [
            (int(inner.feature[i]), float(inner.threshold[i]))
            for i in range(inner.node_count)
            if inner.children_left[i] != -1
        ]

    def bootstrap_indices(self, index: int) -> np.ndarray:
        """Re-derive the bootstrap sample used for one tree."""
        n = self.trees[index].tree_.n_node_samples[0]
        rng, _ = _tree_rng(self.seed, index)
        return rng.integers(0, n, size=n)


def _tree_rng(seed: int, index: int) -> tuple[np.random.Generator, int]:
    child = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    rng = np.random.default_rng(child)
    tree_seed = int(rng.integers(0, 2**31 - 1))
    return rng, tree_seed


def _fit_one_tree(
    X: np.ndarray, y: np.ndarray, seed: int, index: int, mtry: int, min_leaf: int
) -> tuple[DecisionTreeRegressor, tuple[float, float]]:
    n = X.shape[0]
    rng, tree_seed = _tree_rng(seed, index)
    boot = rng.integers(0, n, size=n)
    yb = y[boot]
    tree = DecisionTreeRegressor(
        criterion="squared_error",
        min_samples_leaf=min_leaf,
        max_features=mtry,
        random_state=tree_seed,
    )
    tree.fit(X[boot], yb)
    return tree, (float(yb.min()), float(yb.max()))


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    ntrees: int = 100,
    seed: int = 0,
    min_leaf: int = 2,
    mtry: int | None = None,
    threads: int = 1,
) -> ForestModel:
    """Bagged regression trees; each tree's randomness derives from
    (seed, tree index), so serial and parallel fits agree exactly."""
    X, y = _check_matrix(X, y)
    if ntrees < 1:
        raise TrainingError("ntrees must be >= 1")
    p = X.shape[1]
    mtry = mtry if mtry is not None else max(1, p // 3)
    if threads == 1:
        fitted = [_fit_one_tree(X, y, seed, i, mtry, min_leaf) for i in range(ntrees)]
    else:
        fitted = Parallel(n_jobs=threads, prefer="threads")(
            delayed(_fit_one_tree)(X, y, seed, i, mtry, min_leaf) for i in range(ntrees)
        )
    trees, ranges = zip(*fitted)
    return ForestModel(
        trees=tuple(trees),
        ntrees=ntrees,
        seed=seed,
        mtry=mtry,
        min_leaf=min_leaf,
        bootstrap_ranges=tuple(ranges),
    )


# ---------------------------------------------------------------------------
# Optional engines: SVR and one-hidden-layer MLP


@dataclass(frozen=True)
class _Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "_Scaler":
        std = X.std(axis=0)
        std[std == 0.0] = 1.0
        return cls(mean=X.mean(axis=0), std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


@dataclass(frozen=True)
class SvrModel:
    inner: SVR
    scaler: _Scaler
    c: float
    epsilon: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.inner.predict(self.scaler.transform(X))

    @property
    def descriptor(self) -> str:
        return _describe("svr", {"C": self.c, "epsilon": self.epsilon})


def fit_svr(X: np.ndarray, y: np.ndarray, c: float = 1.0, epsilon: float = 0.1) -> SvrModel:
    """RBF-kernel support vector regression on standardized inputs."""
    X, y = _check_matrix(X, y)
    scaler = _Scaler.fit(X)
    inner = SVR(kernel="rbf", C=c, epsilon=epsilon)
    inner.fit(scaler.transform(X), y)
    return SvrModel(inner=inner, scaler=scaler, c=c, epsilon=epsilon)


@dataclass(frozen=True)
class MlpModel:
    inner: MLPRegressor
    scaler: _Scaler
    hsize: int
    lr: float
    seed: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.inner.predict(self.scaler.transform(X))

    @property
    def descriptor(self) -> str:
        return _describe("mlp", {"hsize": self.hsize, "lr": self.lr, "seed": self.seed})


def fit_mlp(
    X: np.ndarray,
    y: np.ndarray,
    hsize: int = 50,
    lr: float = 0.001,
    seed: int = 0,
    max_iter: int = 2000,
) -> MlpModel:
    """One hidden relu layer trained with adam on standardized inputs."""
    X, y = _check_matrix(X, y)
    scaler = _Scaler.fit(X)
    inner = MLPRegressor(
        hidden_layer_sizes=(hsize,),
        activation="relu",
        learning_rate_init=lr,
        random_state=seed,
        max_iter=max_iter,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        try:
            inner.fit(scaler.transform(X), y)
        except ConvergenceWarning as exc:
            raise TrainingError(
                f"MLP did not converge after {max_iter} iterations"
            ) from exc
    return MlpModel(inner=inner, scaler=scaler, hsize=hsize, lr=lr, seed=seed)


# ---------------------------------------------------------------------------
# Model specs and hyperparameter grids


@dataclass(frozen=True)
class ModelSpec:
    """Named model family plus hyperparameters; builds fresh fits per fold."""

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0, threads: int = 1) -> Regressor:
        p = dict(self.params)
        if self.name == "lr":
            return fit_ols(X, y, **p)
        if self.name == "rf":
            return fit_random_forest(X, y, seed=p.pop("seed", seed), threads=threads, **p)
        if self.name == "svr":
            return fit_svr(X, y, **p)
        if self.name == "mlp":
            return fit_mlp(X, y, seed=p.pop("seed", seed), **p)
        raise TrainingError(f"unknown model family '{self.name}'")

    @property
    def descriptor(self) -> str:
        return _describe(self.name, self.params)


MODEL_FAMILIES = ("lr", "rf", "svr", "mlp")


@dataclass(frozen=True)
class HyperGrid:
    """Hyperparameter value lists explored by grid search."""

    ntrees: tuple[int, ...] = (50, 100, 200, 300)
    c: tuple[float, ...] = (0.1, 0.5, 1, 5, 10)
    epsilon: tuple[float, ...] = (0.01, 0.05, 0.1, 0.5)
    hsize: tuple[int, ...] = (10, 20, 30, 50, 100, 200)
    lr: tuple[float, ...] = (0.001, 0.005, 0.01, 0.05, 0.1)

    def points(self, family: str) -> list[dict[str, Any]]:
        if family == "rf":
            return [{"ntrees": v} for v in self.ntrees]
        if family == "svr":
            return [{"c": c, "epsilon": e} for c in self.c for e in self.epsilon]
        if family == "mlp":
            return [{"hsize": h, "lr": lr} for h in self.hsize for lr in self.lr]
        if family == "lr":
            return [{}]
        raise TrainingError(f"unknown model family '{family}'")


@dataclass(frozen=True)
class GridSearchResult:
    best: ModelSpec
    best_score: float
    table: tuple[tuple[str, float], ...]  # (descriptor, mean CV r2) per point


def _row_folds(n: int, k: int, seed: int) -> np.ndarray:
    folds = np.empty(n, dtype=int)
    order = np.random.default_rng(seed).permutation(n)
    folds[order] = np.arange(n) % k
    return folds


def grid_search(
    family: str,
    X: np.ndarray,
    y: np.ndarray,
    grid: Sequence[Mapping[str, Any]] | None = None,
    k: int = 5,
    seed: int = 0,
    threads: int = 1,
) -> GridSearchResult:
    """Mean k-fold CV R-squared per grid point; ties keep the earlier point."""
    from .evaluation import r_squared

    X, y = _check_matrix(X, y)
    points = list(grid) if grid is not None else HyperGrid().points(family)
    if not points:
        raise TrainingError("empty hyperparameter grid")
    folds = _row_folds(X.shape[0], k, seed)
    best_spec = None
    best_score = -np.inf
    table: list[tuple[str, float]] = []
    for params in points:
        spec = ModelSpec(family, dict(params))
        scores = []
        for fold in range(k):
            test = folds == fold
            model = spec.fit(X[~test], y[~test], seed=seed, threads=threads)
            scores.append(r_squared(y[test], model.predict(X[test])))
        score = float(np.mean(scores))
        table.append((spec.descriptor, score))
        if score > best_score:
            best_score = score
            best_spec = spec
    return GridSearchResult(best=best_spec, best_score=best_score, table=tuple(table))


# ---------------------------------------------------------------------------
# Serialization


def save_model(model: Regressor, path: str | Path, metadata: Mapping[str, Any] | None = None) -> None:
    """Versioned model file; round-trips to identical predictions."""
    payload = {
        "format": MODEL_FILE_FORMAT,
        "descriptor": model.descriptor,
        "metadata": dict(metadata or {}),
        "model": model,
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh)


def load_model(path: str | Path) -> tuple[Regressor, dict[str, Any]]:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FILE_FORMAT:
        raise TrainingError(f"unsupported model file format in {path}")
    return payload["model"], payload["metadata"]
