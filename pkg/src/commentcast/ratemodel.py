"""Log-log rate lines: fitting, confidence intervals, comparison, Q-Q.

A rate line is the least-squares fit of log10(weekly volume) on log10(rate
of the first alpha comments) over a group of articles. Slope and intercept
carry 95% confidence intervals from the exact t distribution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .corpus import Article, Corpus, eligible, first_alpha_comments, weekly_volume
from .features import rate as comment_rate

GROUP_OUTLET = "outlet"
GROUP_CATEGORY = "category"
GROUP_OUTLET_CATEGORY = "outletxcategory"
GROUPINGS = (GROUP_OUTLET, GROUP_CATEGORY, GROUP_OUTLET_CATEGORY)

PARALLEL_SLOPE_TOL = 0.02


class RateModelError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_ci: tuple[float, float]
    intercept_ci: tuple[float, float]
    n: int
    mopv: float
    residual_std: float

    def predict_log_volume(self, log_rate: float) -> float:
        return self.slope * log_rate + self.intercept


def fit_rate_line(points: Iterable[tuple[float, float]]) -> RateFit:
    """OLS of log10(volume) on log10(rate) with 95% t-intervals."""
    pairs = list(points)
    if len(pairs) < 3:
        raise RateModelError("need at least three points")
    arr = np.asarray(pairs, dtype=float)
    if np.any(arr <= 0.0):
        raise RateModelError("rates and volumes must be positive")
    x = np.log10(arr[:, 0])
    y = np.log10(arr[:, 1])
    return fit_log_line(x, y)


def fit_log_line(x: np.ndarray, y: np.ndarray) -> RateFit:
    """Simple regression on already-log-scaled pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise RateModelError("need at least three points")
    x_mean = float(x.mean())
    y_mean = float(y.mean())
    sxx = float(np.sum((x - x_mean) ** 2))
    if sxx == 0.0:
        raise RateModelError("degenerate x variance")
    sxy = float(np.sum((x - x_mean) * (y - y_mean)))
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    fitted = slope * x + intercept
    sse = float(np.sum((y - fitted) ** 2))
    residual_std = math.sqrt(max(sse, 0.0) / (n - 2))
    se_slope = residual_std / math.sqrt(sxx)
    se_intercept = residual_std * math.sqrt(1.0 / n + x_mean**2 / sxx)
    t_crit = float(stats.t.ppf(0.975, n - 2))
    return RateFit(
        slope=slope,
        intercept=intercept,
        slope_ci=(slope - t_crit * se_slope, slope + t_crit * se_slope),
        intercept_ci=(intercept - t_crit * se_intercept, intercept + t_crit * se_intercept),
        n=n,
        mopv=float(fitted.mean()),
        residual_std=residual_std,
    )


CROSSING = "CROSSING"
PARALLEL = "PARALLEL"


@dataclass(frozen=True)
class LineComparison:
    relation: str
    # Crossing point in log10-rate coordinates, and as a plain rate.
    crossing_log_rate: float | None = None
    crossing_rate: float | None = None
    dominant_above: str | None = None
    dominant_below: str | None = None
    # For parallel lines: the uniformly higher one (larger intercept).
    higher: str | None = None


def compare_lines(
    a: RateFit,
    b: RateFit,
    slope_tol: float = PARALLEL_SLOPE_TOL,
    label_a: str = "a",
    label_b: str = "b",
) -> LineComparison:
    """Classify two rate lines as crossing or parallel.

    Crossing lines split the rate axis at their intersection; the steeper
    line predicts higher volume above it. Parallel lines keep a fixed
    offset, so the larger intercept is uniformly higher.
    """
    delta = a.slope - b.slope
    if abs(delta) <= slope_tol:
        higher = label_a if a.intercept >= b.intercept else label_b
        return LineComparison(relation=PARALLEL, higher=higher)
    x_star = (b.intercept - a.intercept) / delta
    above = label_a if delta > 0 else label_b
    below = label_b if delta > 0 else label_a
    return LineComparison(
        relation=CROSSING,
        crossing_log_rate=x_star,
        crossing_rate=10.0**x_star,
        dominant_above=above,
        dominant_below=below,
    )


def qq_normal(values: Sequence[float]) -> tuple[list[tuple[float, float]], float]:
    """Standard-normal Q-Q pairs and their Pearson correlation.

    Values are standardized, sorted, and matched against normal quantiles
    at plotting positions (i - 0.5)/n.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 20:
        raise RateModelError("need at least 20 values")
    std = v.std(ddof=1)
    if std == 0.0:
        raise RateModelError("zero variance")
    sample = np.sort((v - v.mean()) / std)
    theoretical = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    corr = float(np.corrcoef(theoretical, sample)[0, 1])
    return list(zip(theoretical.tolist(), sample.tolist())), corr


# ---------------------------------------------------------------------------
# Grouped analysis over a corpus


def article_rate_volume(article: Article, alpha: int) -> tuple[float, float]:
    timestamps = [c.timestamp for c in first_alpha_comments(article, alpha)]
    return comment_rate(timestamps, alpha), float(weekly_volume(article))


def _group_keys(article: Article, grouping: str) -> list[str]:
    if grouping == GROUP_OUTLET:
        return [article.outlet]
    if grouping == GROUP_CATEGORY:
        return sorted(article.categories)
    if grouping == GROUP_OUTLET_CATEGORY:
        return [f"{article.outlet}/{c}" for c in sorted(article.categories)]
    raise RateModelError(f"unknown grouping '{grouping}'")


@dataclass(frozen=True)
class RateAnalysis:
    grouping: str
    alpha: int
    fits: Mapping[str, RateFit]
    skipped: Mapping[str, int]  # group -> article count below min_n


def rate_analysis(
    corpus: Corpus,
    alpha: int,
    grouping: str = GROUP_OUTLET,
    min_n: int = 3,
) -> RateAnalysis:
    """Per-group rate-line fits; groups under min_n are reported as skipped.

    An article lands in every group it belongs to, so per-category counts
    may sum to more than the corpus size.
    """
    if grouping not in GROUPINGS:
        raise RateModelError(f"unknown grouping '{grouping}'")
    min_n = max(min_n, 3)
    points: dict[str, list[tuple[float, float]]] = {}
    for article in corpus.articles:
        if not eligible(article, alpha):
            continue
        pair = article_rate_volume(article, alpha)
        for key in _group_keys(article, grouping):
            points.setdefault(key, []).append(pair)
    fits: dict[str, RateFit] = {}
    skipped: dict[str, int] = {}
    for key in sorted(points):
        group_points = points[key]
        if len(group_points) < min_n:
            skipped[key] = len(group_points)
        else:
            fits[key] = fit_rate_line(group_points)
    return RateAnalysis(grouping=grouping, alpha=alpha, fits=fits, skipped=skipped)


def rate_analysis_sweep(
    corpus: Corpus,
    alphas: Sequence[int],
    grouping: str = GROUP_OUTLET,
    min_n: int = 3,
) -> list[RateAnalysis]:
    """One analysis per alpha, e.g. over the sweep {5, 10, 15, 20, 50}."""
    return [rate_analysis(corpus, a, grouping, min_n) for a in alphas]


def analyses_to_csv(analyses: Sequence[RateAnalysis]) -> str:
    """Flatten analyses to CSV, one row per (group, alpha)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "group", "alpha", "status", "n",
            "slope", "slope_lo", "slope_hi",
            "intercept", "intercept_lo", "intercept_hi",
            "mopv", "residual_std",
        ]
    )
    for analysis in analyses:
        for key, fit in analysis.fits.items():
            writer.writerow(
                [
                    key, analysis.alpha, "fitted", fit.n,
                    repr(fit.slope), repr(fit.slope_ci[0]), repr(fit.slope_ci[1]),
                    repr(fit.intercept), repr(fit.intercept_ci[0]), repr(fit.intercept_ci[1]),
                    repr(fit.mopv), repr(fit.residual_std),
                ]
            )
        for key, count in analysis.skipped.items():
            writer.writerow([key, analysis.alpha, "skipped", count] + [""] * 8)
    return buf.getvalue()


def qq_pairs_to_csv(pairs: Sequence[tuple[float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theoretical_quantile", "sample_quantile"])
    for theo, samp in pairs:
        writer.writerow([repr(theo), repr(samp)])
    return buf.getvalue()
