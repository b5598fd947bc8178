"""Feature extraction from an article and its first alpha comments.

Features fall into five families: TOPIC, ARTICLE, COMMENT, NEWS_FACTOR and
MISC. Extraction is pure: fixed inputs and providers give a fixed vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping, Sequence

import numpy as np

from .corpus import (
    Article,
    Corpus,
    OutletClocks,
    ReplyTree,
    build_reply_tree,
    compute_target,
    eligible_articles,
    first_alpha_comments,
)
from .text import TextProviders, contains_url, default_providers, tokenize

MISSING_CONTINUITY = -1.0

FAMILIES = ("TOPIC", "ARTICLE", "COMMENT", "NEWS_FACTOR", "MISC")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    family: str
    categorical: bool = False


# Canonical schema; order here fixes design-matrix column order.
SCHEMA: tuple[FeatureSpec, ...] = (
    FeatureSpec("topic", "TOPIC", categorical=True),
    FeatureSpec("month", "ARTICLE"),
    FeatureSpec("day", "ARTICLE"),
    FeatureSpec("hour", "ARTICLE"),
    FeatureSpec("wom", "ARTICLE"),
    FeatureSpec("dow", "ARTICLE"),
    FeatureSpec("author", "ARTICLE", categorical=True),
    FeatureSpec("art_length", "ARTICLE"),
    FeatureSpec("art_question", "ARTICLE"),
    FeatureSpec("art_exclaim", "ARTICLE"),
    FeatureSpec("art_num_ne_loc", "ARTICLE"),
    FeatureSpec("art_num_ne_per", "ARTICLE"),
    FeatureSpec("art_num_ne_org", "ARTICLE"),
    FeatureSpec("art_num_ne_misc", "ARTICLE"),
    FeatureSpec("art_senti_score", "ARTICLE"),
    FeatureSpec("rate", "COMMENT"),
    FeatureSpec("fc_mid", "COMMENT"),
    FeatureSpec("uniq_com", "COMMENT"),
    FeatureSpec("num_reply", "COMMENT"),
    FeatureSpec("num_thread", "COMMENT"),
    FeatureSpec("num_question", "COMMENT"),
    FeatureSpec("num_exclaim", "COMMENT"),
    FeatureSpec("num_words", "COMMENT"),
    FeatureSpec("complexity", "COMMENT"),
    FeatureSpec("has_url", "COMMENT"),
    FeatureSpec("num_ne_com", "COMMENT"),
    FeatureSpec("depth", "COMMENT"),
    FeatureSpec("width", "COMMENT"),
    FeatureSpec("avg_senti_score", "COMMENT"),
    FeatureSpec("num_likes", "COMMENT"),
    FeatureSpec("num_dislikes", "COMMENT"),
    FeatureSpec("continuity", "NEWS_FACTOR"),
    FeatureSpec("aggression", "NEWS_FACTOR"),
    FeatureSpec("pub_resp", "MISC"),
    FeatureSpec("inter_art", "MISC"),
    FeatureSpec("inter_com", "MISC"),
)

SCHEMA_BY_NAME: dict[str, FeatureSpec] = {s.name: s for s in SCHEMA}
CATEGORICAL_FEATURES = tuple(s.name for s in SCHEMA if s.categorical)

# Named feature sets used throughout the experiments.
SET_ALL = "ALL"
SET_UC = "UC"
SET_ART = "ART"
SET_RATE = "RATE"
NAMED_SETS = (SET_ALL, SET_UC, SET_ART, SET_RATE)

ONE_HOT_MAX_LEVELS = 50
OTHER_LEVEL = "OTHER"


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    """Numeric feature values plus raw labels for categorical features."""

    values: Mapping[str, float]
    labels: Mapping[str, str]

    def __post_init__(self):
        for name, value in self.values.items():
            if name not in SCHEMA_BY_NAME:
                raise FeatureError(f"unknown feature '{name}'")
            if math.isnan(value):
                raise FeatureError(f"feature '{name}' is NaN")
        for name in self.labels:
            if name not in CATEGORICAL_FEATURES:
                raise FeatureError(f"'{name}' is not a categorical feature")


def resolve_feature_set(feature_set: str | Sequence[str]) -> tuple[str, list[str]]:
    """Map a named set or explicit name list to (label, schema-ordered names)."""
    if isinstance(feature_set, str):
        key = feature_set.upper()
        if key == SET_ALL:
            return SET_ALL, [s.name for s in SCHEMA]
        if key == SET_UC:
            return SET_UC, [s.name for s in SCHEMA if s.family == "COMMENT"]
        if key == SET_ART:
            return SET_ART, [s.name for s in SCHEMA if s.family == "ARTICLE"]
        if key == SET_RATE:
            return SET_RATE, ["rate"]
        raise FeatureError(f"unknown feature set '{feature_set}'")
    names = list(feature_set)
    unknown = [n for n in names if n not in SCHEMA_BY_NAME]
    if unknown:
        raise FeatureError(f"unknown feature name(s): {unknown}")
    ordered = [s.name for s in SCHEMA if s.name in set(names)]
    return "custom", ordered


def all_minus(excluded: Sequence[str]) -> list[str]:
    """The full schema minus the given feature names (for ablation sets)."""
    out = set(excluded)
    unknown = [n for n in out if n not in SCHEMA_BY_NAME]
    if unknown:
        raise FeatureError(f"unknown feature name(s): {sorted(unknown)}")
    return [s.name for s in SCHEMA if s.name not in out]


def family_names(family: str) -> list[str]:
    return [s.name for s in SCHEMA if s.family == family]


# ---------------------------------------------------------------------------
# Formula features


def rate(timestamps: Sequence[int], alpha: int) -> float:
    """Comments per minute over the first alpha comments.

    Elapsed time is clamped below at one second so burst arrivals stay
    finite (ten simultaneous comments give rate 600).
    """
    if len(timestamps) < alpha:
        raise FeatureError(f"need {alpha} timestamps, got {len(timestamps)}")
    window = timestamps[:alpha]
    if any(b < a for a, b in zip(window, window[1:])):
        raise FeatureError("timestamps must be non-decreasing")
    elapsed_minutes = (window[alpha - 1] - window[0]) / 60.0
    return alpha / max(elapsed_minutes, 1.0 / 60.0)


def complexity(texts: Sequence[str]) -> float:
    """Per-unique-term average of tf * (ln|T| - ln tf) over pooled tokens.

    Applied verbatim; a term whose frequency exceeds the unique-term count
    contributes negatively (e.g. the two-token stream "a a" gives -2 ln 2).
    """
    tokens = [t for text in texts for t in tokenize(text)]
    if not tokens:
        raise FeatureError("complexity needs at least one token")
    tf: dict[str, int] = {}
    for t in tokens:
        tf[t] = tf.get(t, 0) + 1
    n_unique = len(tf)
    log_unique = math.log(n_unique)
    total = sum(count * (log_unique - math.log(count)) for count in tf.values())
    return total / n_unique


def tree_depth_width(tree: ReplyTree) -> tuple[int, int]:
    """Depth = number of comment levels; width = max total nodes on a level."""
    counts = tree.level_counts()
    if not counts:
        return 0, 0
    return max(counts), max(counts.values())


# ---------------------------------------------------------------------------
# Extractors


def _local_dt(clocks: OutletClocks, outlet: str, timestamp: int) -> datetime:
    return datetime.fromtimestamp(clocks.local_seconds(outlet, timestamp), tz=timezone.utc)


def extract_comment_features(
    article: Article,
    alpha: int,
    providers: TextProviders,
    clocks: OutletClocks,
) -> dict[str, float]:
    window = first_alpha_comments(article, alpha)
    texts = [c.text for c in window]
    timestamps = [c.timestamp for c in window]
    tree = build_reply_tree(article, alpha)
    depth, width = tree_depth_width(tree)
    num_reply = sum(1 for c in window if c.parent_id is not None)
    local_first = clocks.local_seconds(article.outlet, timestamps[0])
    return {
        "rate": rate(timestamps, alpha),
        "fc_mid": (local_first % 86_400) / 60.0,
        "uniq_com": float(len({c.author for c in window})),
        "num_reply": float(num_reply),
        "num_thread": float(alpha - num_reply),
        "num_question": float(sum(t.count("?") for t in texts)),
        "num_exclaim": float(sum(t.count("!") for t in texts)),
        "num_words": float(sum(len(tokenize(t)) for t in texts)),
        "complexity": complexity(texts),
        "has_url": 1.0 if any(contains_url(t) for t in texts) else 0.0,
        "num_ne_com": float(sum(len(providers.ner.entities(t)) for t in texts)),
        "depth": float(depth),
        "width": float(width),
        "avg_senti_score": sum(providers.sentiment.score(t) for t in texts) / alpha,
        "num_likes": float(sum(c.likes for c in window)),
        "num_dislikes": float(sum(c.dislikes for c in window)),
    }


def extract_article_features(
    article: Article,
    providers: TextProviders,
    clocks: OutletClocks,
) -> tuple[dict[str, float], dict[str, str]]:
    dt = _local_dt(clocks, article.outlet, article.published_at)
    ne_counts = {cls: 0 for cls in ("LOC", "PER", "ORG", "MISC")}
    for _, cls in providers.ner.entities(article.body):
        ne_counts[cls] += 1
    values = {
        "month": float(dt.month),
        "day": float(dt.day),
        "hour": float(dt.hour),
        "wom": float((dt.day - 1) // 7 + 1),
        "dow": float(dt.isoweekday()),
        "art_length": float(len(tokenize(article.body))),
        "art_question": 1.0 if "?" in article.title else 0.0,
        "art_exclaim": 1.0 if "!" in article.title else 0.0,
        "art_num_ne_loc": float(ne_counts["LOC"]),
        "art_num_ne_per": float(ne_counts["PER"]),
        "art_num_ne_org": float(ne_counts["ORG"]),
        "art_num_ne_misc": float(ne_counts["MISC"]),
        "art_senti_score": providers.sentiment.score(article.body),
    }
    return values, {"author": article.author}


def extract_news_factor_features(
    article: Article,
    alpha: int,
    providers: TextProviders,
) -> dict[str, float]:
    if article.topic_first_seen_at is None:
        continuity = MISSING_CONTINUITY
    else:
        continuity = (article.published_at - article.topic_first_seen_at) / 60.0
    window = first_alpha_comments(article, alpha)
    tokens = tokenize(article.body)
    for c in window:
        tokens.extend(tokenize(c.text))
    if tokens:
        aggression = providers.aggression.count_hits(tokens) / len(tokens)
    else:
        aggression = 0.0
    return {"continuity": continuity, "aggression": aggression}


def extract_misc_features(
    article: Article,
    alpha: int,
    providers: TextProviders,
) -> dict[str, float]:
    window = first_alpha_comments(article, alpha)
    ne_art = {s.lower() for s, _ in providers.ner.entities(article.body)}
    ne_com = {s.lower() for c in window for s, _ in providers.ner.entities(c.text)}
    overlap = len(ne_art & ne_com)
    return {
        "pub_resp": (window[0].timestamp - article.published_at) / 60.0,
        "inter_art": overlap / len(ne_art) if ne_art else 0.0,
        "inter_com": overlap / len(ne_com) if ne_com else 0.0,
    }


def extract_features(
    article: Article,
    alpha: int,
    providers: TextProviders | None = None,
    clocks: OutletClocks | None = None,
) -> FeatureVector:
    """Full feature vector over an eligible article's first alpha comments."""
    providers = providers or default_providers()
    clocks = clocks or OutletClocks()
    art_values, labels = extract_article_features(article, providers, clocks)
    values: dict[str, float] = {}
    values.update(art_values)
    values.update(extract_comment_features(article, alpha, providers, clocks))
    values.update(extract_news_factor_features(article, alpha, providers))
    values.update(extract_misc_features(article, alpha, providers))
    labels = dict(labels)
    labels["topic"] = article.topic
    return FeatureVector(values=values, labels=labels)


# ---------------------------------------------------------------------------
# Design matrix


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    article_ids: tuple[str, ...]
    feature_set: str
    feature_names: tuple[str, ...]
    alpha: int

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def restrict(self, names: Sequence[str], label: str | None = None) -> "DesignMatrix":
        """Column-subset view over features already present in this matrix."""
        wanted = set(names)
        missing = sorted(wanted - set(self.feature_names))
        if missing:
            raise FeatureError(f"features not in matrix: {missing}")
        ordered = [n for n in self.feature_names if n in wanted]
        keep = [
            i
            for i, col in enumerate(self.columns)
            if _column_feature(col) in wanted
        ]
        return DesignMatrix(
            X=self.X[:, keep],
            y=self.y,
            columns=tuple(self.columns[i] for i in keep),
            article_ids=self.article_ids,
            feature_set=label if label is not None else "custom",
            feature_names=tuple(ordered),
            alpha=self.alpha,
        )


def _column_feature(column: str) -> str:
    return column.split("=", 1)[0]


def _one_hot_levels(labels: Sequence[str]) -> list[str]:
    counts: dict[str, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    ranked = sorted(counts, key=lambda lv: (-counts[lv], lv))
    return sorted(ranked[:ONE_HOT_MAX_LEVELS])


def assemble_matrix(
    corpus: Corpus,
    alpha: int,
    feature_set: str | Sequence[str] = SET_ALL,
    providers: TextProviders | None = None,
    clocks: OutletClocks | None = None,
) -> DesignMatrix:
    """Numeric design matrix plus log-volume targets for eligible articles.

    Categorical features expand into one-hot blocks over the 50 most
    frequent levels (ties broken lexicographically) plus a trailing OTHER
    column. Row order follows corpus order; column order follows the schema.
    """
    label, names = resolve_feature_set(feature_set)
    articles = eligible_articles(corpus, alpha)
    if not articles:
        raise FeatureError(f"no eligible articles at alpha={alpha}")
    vectors = [extract_features(a, alpha, providers, clocks) for a in articles]

    columns: list[str] = []
    blocks: list[np.ndarray] = []
    n = len(articles)
    for name in names:
        spec = SCHEMA_BY_NAME[name]
        if spec.categorical:
            labels = [v.labels[name] for v in vectors]
            levels = _one_hot_levels(labels)
            level_index = {lv: i for i, lv in enumerate(levels)}
            block = np.zeros((n, len(levels) + 1))
            for row, value in enumerate(labels):
                col = level_index.get(value, len(levels))
                block[row, col] = 1.0
            columns.extend(f"{name}={lv}" for lv in levels)
            columns.append(f"{name}={OTHER_LEVEL}")
            blocks.append(block)
        else:
            blocks.append(np.array([[v.values[name]] for v in vectors]))
            columns.append(name)

    X = np.hstack(blocks)
    y = np.array([compute_target(a) for a in articles])
    return DesignMatrix(
        X=X,
        y=y,
        columns=tuple(columns),
        article_ids=tuple(a.id for a in articles),
        feature_set=label,
        feature_names=tuple(names),
        alpha=alpha,
    )


def schema_manifest() -> str:
    """Text manifest of the canonical feature schema (name, family, type)."""
    lines = ["name\tfamily\ttype"]
    for spec in SCHEMA:
        kind = "categorical" if spec.categorical else "numeric"
        lines.append(f"{spec.name}\t{spec.family}\t{kind}")
    return "\n".join(lines) + "\n"
