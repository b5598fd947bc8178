"""Metrics, cross-validation, the ablation cube, and forward selection.

All experiment results land in FitReport rows that serialize to CSV/JSON.
The ablation suite covers feature sets {ALL, UC, ART, RATE, ALL-UC,
ALL-rate} for every requested model in the global setting and per outlet.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np

from .corpus import Corpus, OutletClocks, assign_folds
from .features import (
    SET_ALL,
    SET_ART,
    SET_RATE,
    SET_UC,
    DesignMatrix,
    all_minus,
    assemble_matrix,
    family_names,
)
from .text import TextProviders


class MetricError(ValueError):
    pass


def r_squared(actuals: Sequence[float], predictions: Sequence[float]) -> float:
    """1 - SSE/SST on the given pairs; negative when worse than the mean."""
    y = np.asarray(actuals, dtype=float)
    yhat = np.asarray(predictions, dtype=float)
    if y.shape != yhat.shape:
        raise MetricError("length mismatch")
    if y.size < 2:
        raise MetricError("need at least two observations")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise MetricError("zero variance in actuals")
    sse = float(np.sum((y - yhat) ** 2))
    return 1.0 - sse / sst


def mae(actuals: Sequence[float], predictions: Sequence[float]) -> float:
    y = np.asarray(actuals, dtype=float)
    yhat = np.asarray(predictions, dtype=float)
    if y.shape != yhat.shape:
        raise MetricError("length mismatch")
    if y.size < 1:
        raise MetricError("need at least one observation")
    return float(np.mean(np.abs(y - yhat)))


class SupportsFit(Protocol):
    descriptor: str

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0, threads: int = 1): ...


GLOBAL_SETTING = "GLOBAL"
LOCAL_SETTING = "LOCAL"


@dataclass(frozen=True)
class FitReport:
    r2: float
    mae: float
    per_fold_r2: tuple[float, ...]
    per_fold_mae: tuple[float, ...]
    feature_set: str
    model: str
    setting: str = GLOBAL_SETTING
    outlet: str = ""

    def as_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "setting": self.setting,
            "outlet": self.outlet,
            "feature_set": self.feature_set,
            "model": self.model,
            "r2": self.r2,
            "mae": self.mae,
        }
        for i, (r, m) in enumerate(zip(self.per_fold_r2, self.per_fold_mae), start=1):
            row[f"r2_fold_{i}"] = r
            row[f"mae_fold_{i}"] = m
        return row


def cross_validate(
    matrix: DesignMatrix,
    model: SupportsFit,
    k: int = 5,
    seed: int = 0,
    threads: int = 1,
    setting: str = GLOBAL_SETTING,
    outlet: str = "",
) -> FitReport:
    """k-fold CV keyed on article ids; test rows never seen in training."""
    folds = assign_folds(matrix.article_ids, k, seed)
    fold_of = np.array([folds[i] for i in matrix.article_ids])
    r2s: list[float] = []
    maes: list[float] = []
    for fold in range(k):
        test = fold_of == fold
        if not test.any() or test.all():
            raise MetricError(f"fold {fold} is degenerate (k too large for data)")
        fitted = model.fit(matrix.X[~test], matrix.y[~test], seed=seed, threads=threads)
        pred = fitted.predict(matrix.X[test])
        r2s.append(r_squared(matrix.y[test], pred))
        maes.append(mae(matrix.y[test], pred))
    return FitReport(
        r2=float(np.mean(r2s)),
        mae=float(np.mean(maes)),
        per_fold_r2=tuple(r2s),
        per_fold_mae=tuple(maes),
        feature_set=matrix.feature_set,
        model=model.descriptor,
        setting=setting,
        outlet=outlet,
    )


# Ablation feature sets, in report order.
ABLATION_SETS = (SET_ALL, SET_UC, SET_ART, SET_RATE, "ALL-UC", "ALL-rate")


def ablation_feature_names(label: str) -> list[str]:
    from .features import resolve_feature_set

    if label == "ALL-UC":
        return all_minus(family_names("COMMENT"))
    if label == "ALL-rate":
        return all_minus(["rate"])
    return resolve_feature_set(label)[1]


def ablation_suite(
    corpus: Corpus,
    alpha: int,
    models: Sequence[SupportsFit],
    seed: int = 0,
    k: int = 5,
    threads: int = 1,
    providers: TextProviders | None = None,
    clocks: OutletClocks | None = None,
    include_local: bool = True,
) -> list[FitReport]:
    """Feature-set x model x setting grid of cross-validated reports."""
    reports: list[FitReport] = []
    scopes: list[tuple[str, str, Corpus]] = [(GLOBAL_SETTING, "", corpus)]
    if include_local:
        scopes.extend((LOCAL_SETTING, o, corpus.by_outlet(o)) for o in corpus.outlets)
    for setting, outlet, scope in scopes:
        full = assemble_matrix(scope, alpha, SET_ALL, providers, clocks)
        for label in ABLATION_SETS:
            if label == SET_ALL:
                matrix = full
            else:
                matrix = full.restrict(ablation_feature_names(label), label=label)
            for model in models:
                reports.append(
                    cross_validate(
                        matrix, model, k=k, seed=seed, threads=threads,
                        setting=setting, outlet=outlet,
                    )
                )
    return reports


@dataclass(frozen=True)
class SelectionTrace:
    chosen: tuple[str, ...]
    r2_after: tuple[float, ...]
    stop_reason: str

    def as_rows(self) -> list[dict[str, Any]]:
        return [
            {"step": i + 1, "feature": f, "cv_r2": r}
            for i, (f, r) in enumerate(zip(self.chosen, self.r2_after))
        ]


REL_IMPROVEMENT = 0.01


def stepwise_forward_select(
    matrix: DesignMatrix,
    model: SupportsFit,
    k: int = 5,
    seed: int = 0,
    threads: int = 1,
    max_features: int | None = None,
) -> SelectionTrace:
    """Greedy forward selection by CV mean R-squared on fixed folds.

    Starts from the empty set; each round adds the candidate with the best
    CV R-squared (ties broken by schema order). Stops once the best
    candidate improves on the previous accepted R-squared by less than 1%
    relative. The first feature is always accepted.
    """
    candidates = list(matrix.feature_names)
    if len(candidates) < 2:
        raise MetricError("need at least two candidate features")
    chosen: list[str] = []
    scores: list[float] = []
    limit = max_features if max_features is not None else len(candidates)

    while candidates and len(chosen) < limit:
        best_name = None
        best_score = -np.inf
        for name in candidates:  # candidates stay in schema order
            sub = matrix.restrict(chosen + [name])
            report = cross_validate(sub, model, k=k, seed=seed, threads=threads)
            if report.r2 > best_score:
                best_score = report.r2
                best_name = name
        if chosen:
            previous = scores[-1]
            gain = best_score - previous
            if gain <= 0 or gain < REL_IMPROVEMENT * abs(previous):
                return SelectionTrace(
                    tuple(chosen), tuple(scores),
                    stop_reason="relative improvement below 1%",
                )
        chosen.append(best_name)
        scores.append(best_score)
        candidates.remove(best_name)

    reason = "feature limit reached" if candidates else "all features selected"
    return SelectionTrace(tuple(chosen), tuple(scores), stop_reason=reason)


# ---------------------------------------------------------------------------
# Report emission


def reports_to_csv(reports: Sequence[FitReport]) -> str:
    rows = [r.as_row() for r in reports]
    fieldnames: list[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def reports_to_json(reports: Sequence[FitReport]) -> str:
    return json.dumps([r.as_row() for r in reports], indent=2, sort_keys=True) + "\n"
