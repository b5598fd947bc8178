"""Calibrated synthetic corpus generator.

Per article the generator draws a log rate from Normal((mu - a)/b,
sqrt(sigma^2 - noise^2)/|b|), quantizes it to the integer-second emission
grid, and sets log volume = b * log_rate + a + eps. This makes the rate
recomputed from emitted timestamps equal the drawn rate exactly, and keeps
the marginal log-volume distribution at the configured (mu, sigma).

Draws are recorded per article as provenance; calibration tests run on the
provenance pairs, while the emitted corpus additionally applies the
volume floor at alpha (so every article is eligible) and records how often
that floor bites.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Article, Comment, Corpus, WEEK_SECONDS
from .taxonomy import CATEGORY_LABELS

PUBLISH_WINDOW = (1_443_657_600, 1_485_907_200)  # Oct 2015 .. Feb 2017
TAIL_HALF_LIFE_SECONDS = 12 * 3600
TAIL_MARGIN_SECONDS = 60
MAX_PUB_RESP_SECONDS = 86_400


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class OutletParams:
    name: str
    n_articles: int
    log_vol_mean: float
    log_vol_std: float
    slope: float
    intercept: float
    noise_std: float
    per_alpha: Mapping[int, tuple[float, float]] = field(default_factory=dict)

    def line_for(self, alpha: int) -> tuple[float, float]:
        if alpha in self.per_alpha:
            return self.per_alpha[alpha]
        return self.slope, self.intercept

    def validate(self) -> None:
        if self.n_articles < 1:
            raise SynthError(f"{self.name}: n_articles must be >= 1")
        if self.log_vol_std <= 0:
            raise SynthError(f"{self.name}: log_vol_std must be > 0")
        if self.slope == 0:
            raise SynthError(f"{self.name}: slope must be nonzero")
        if not (0 <= self.noise_std < self.log_vol_std):
            raise SynthError(f"{self.name}: need 0 <= noise_std < log_vol_std")
        for a, (b, _) in self.per_alpha.items():
            if a < 2 or b == 0:
                raise SynthError(f"{self.name}: bad per-alpha entry for alpha={a}")


@dataclass(frozen=True)
class SynthConfig:
    outlets: tuple[OutletParams, ...]
    seed: int = 0
    alpha: int = 10
    topics: int = 24
    article_authors: int = 30
    commenters: int = 5000
    reply_fraction: float = 0.1

    def validate(self) -> None:
        if not self.outlets:
            raise SynthError("config has no outlets")
        if self.alpha < 2:
            raise SynthError("alpha must be >= 2")
        if not (0 <= self.reply_fraction < 1):
            raise SynthError("reply_fraction must be in [0, 1)")
        names = [o.name for o in self.outlets]
        if len(set(names)) != len(names):
            raise SynthError("duplicate outlet names")
        for o in self.outlets:
            o.validate()

    def scaled(self, fraction: float, min_articles: int = 10) -> "SynthConfig":
        """Shrink per-outlet article counts for desk-scale runs."""
        outlets = tuple(
            replace(o, n_articles=max(min_articles, int(round(o.n_articles * fraction))))
            for o in self.outlets
        )
        return replace(self, outlets=outlets)


@dataclass(frozen=True)
class Provenance:
    """Per-article generator draws, retained for oracle tests."""

    article_id: str
    outlet: str
    log_rate: float  # after quantization to the emission grid
    log_volume: float  # b * log_rate + a + noise
    noise: float
    n_comments: int  # emitted count, after the volume floor
    clamped: bool  # True when the floor at alpha raised the count


# ---------------------------------------------------------------------------
# Core per-article draw (shared by corpus and provenance-only paths)


@dataclass(frozen=True)
class _ArticleDraw:
    published_at: int
    pub_resp_seconds: int
    elapsed_seconds: int
    log_rate: float
    noise: float
    log_volume: float
    n_comments: int
    clamped: bool


def _article_rng(config: SynthConfig, outlet_index: int, article_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=config.seed, spawn_key=(outlet_index, article_index))
    return np.random.default_rng(seq)


def _draw_article(
    rng: np.random.Generator, params: OutletParams, alpha: int
) -> _ArticleDraw:
    b, a = params.line_for(alpha)
    mean_log_rate = (params.log_vol_mean - a) / b
    sd_log_rate = math.sqrt(params.log_vol_std**2 - params.noise_std**2) / abs(b)

    published_at = int(rng.integers(PUBLISH_WINDOW[0], PUBLISH_WINDOW[1]))
    pub_resp = int(min(round(60.0 * rng.lognormal(math.log(5.0), 1.0)), MAX_PUB_RESP_SECONDS))
    log_rate_drawn = rng.normal(mean_log_rate, sd_log_rate)
    noise = rng.normal(0.0, params.noise_std) if params.noise_std > 0 else 0.0

    # Quantize the drawn rate to what integer-second timestamps can encode,
    # then derive the volume from the quantized rate so the line is exact.
    max_elapsed = WEEK_SECONDS - pub_resp - TAIL_MARGIN_SECONDS
    target = 60.0 * alpha / (10.0**log_rate_drawn)
    elapsed = int(min(max(round(target), 1), max_elapsed))
    log_rate = math.log10(60.0 * alpha / elapsed)

    log_volume = b * log_rate + a + noise
    n_raw = int(math.floor(10.0**log_volume + 0.5))
    n_comments = max(alpha, n_raw)
    return _ArticleDraw(
        published_at=published_at,
        pub_resp_seconds=pub_resp,
        elapsed_seconds=elapsed,
        log_rate=log_rate,
        noise=noise,
        log_volume=log_volume,
        n_comments=n_comments,
        clamped=n_raw < alpha,
    )


def generate_provenance(config: SynthConfig) -> list[Provenance]:
    """The generator's draws only, without materializing comment streams."""
    config.validate()
    records: list[Provenance] = []
    for oi, params in enumerate(config.outlets):
        for ai in range(params.n_articles):
            rng = _article_rng(config, oi, ai)
            draw = _draw_article(rng, params, config.alpha)
            records.append(
                Provenance(
                    article_id=_article_id(params.name, ai),
                    outlet=params.name,
                    log_rate=draw.log_rate,
                    log_volume=draw.log_volume,
                    noise=draw.noise,
                    n_comments=draw.n_comments,
                    clamped=draw.clamped,
                )
            )
    return records


# ---------------------------------------------------------------------------
# Corpus emission

_WORDS = (
    "the a of to and in on for with at from about into over after under "
    "news report story update today vote city nation people crowd group "
    "market money plan deal law court case ruling debate speech rally "
    "game match season team player coach score win loss goal record "
    "study research data result finding test health doctor patient care "
    "tech device app launch review science space energy climate water "
    "good great bad terrible happy angry fear hope strong weak fair "
    "question answer reason claim fact source quote detail point view"
).split()


def _article_id(outlet: str, index: int) -> str:
    return f"{outlet}-{index:06d}"


def _make_texts(rng: np.random.Generator, count: int, lo: int, hi: int) -> list[str]:
    lengths = rng.integers(lo, hi + 1, size=count)
    flat = rng.integers(0, len(_WORDS), size=int(lengths.sum()))
    marks = rng.random(count)
    texts = []
    pos = 0
    for i, ln in enumerate(lengths):
        words = [_WORDS[j] for j in flat[pos : pos + ln]]
        pos += ln
        text = " ".join(words)
        if marks[i] < 0.06:
            text += "?"
        elif marks[i] < 0.12:
            text += "!"
        elif marks[i] < 0.15:
            text += " http://example.com/story"
        texts.append(text)
    return texts


def _tail_offsets(rng: np.random.Generator, count: int, horizon: int) -> np.ndarray:
    """Arrival offsets with exponentially decaying intensity (12 h half-life)."""
    lam = math.log(2.0) / TAIL_HALF_LIFE_SECONDS
    u = rng.random(count)
    scale = 1.0 - math.exp(-lam * horizon)
    offsets = -np.log1p(-u * scale) / lam
    return np.sort(np.minimum(np.round(offsets), horizon)).astype(np.int64)


def _emit_article(
    rng: np.random.Generator,
    params: OutletParams,
    config: SynthConfig,
    index: int,
    draw: _ArticleDraw,
) -> Article:
    alpha = config.alpha
    article_id = _article_id(params.name, index)
    n = draw.n_comments

    t_first = draw.published_at + draw.pub_resp_seconds
    head = t_first + np.round(
        np.arange(alpha) * (draw.elapsed_seconds / (alpha - 1))
    ).astype(np.int64)
    head[-1] = t_first + draw.elapsed_seconds
    t_alpha = int(head[-1])
    horizon = draw.published_at + WEEK_SECONDS - t_alpha
    tail = t_alpha + _tail_offsets(rng, n - alpha, horizon)
    timestamps = np.concatenate([head, tail])

    authors = rng.integers(0, config.commenters, size=n)
    texts = _make_texts(rng, n, 4, 10)
    likes = rng.poisson(2.0, size=n)
    dislikes = rng.poisson(0.5, size=n)
    is_reply = rng.random(n) < config.reply_fraction
    parent_pick = rng.random(n)

    comments = []
    for j in range(n):
        parent_id = None
        if j > 0 and is_reply[j]:
            parent_id = f"{article_id}-c{int(parent_pick[j] * j):06d}"
        comments.append(
            Comment(
                id=f"{article_id}-c{j:06d}",
                timestamp=int(timestamps[j]),
                author=f"user-{authors[j]}",
                text=texts[j],
                parent_id=parent_id,
                likes=int(likes[j]),
                dislikes=int(dislikes[j]),
            )
        )

    topic_idx = int(rng.integers(0, config.topics))
    topic = f"topic-{topic_idx:03d}"
    categories = _topic_categories(rng, topic_idx)
    if rng.random() < 0.15:
        first_seen = None
    else:
        first_seen = draw.published_at - int(rng.integers(0, 7 * 86_400))
    title_words = _make_texts(rng, 1, 4, 8)[0]
    body = " ".join(_make_texts(rng, 1, 30, 60))
    return Article(
        id=article_id,
        outlet=params.name,
        published_at=draw.published_at,
        title=title_words,
        body=body,
        author=f"writer-{int(rng.integers(0, config.article_authors))}",
        topic=topic,
        categories=tuple(categories),
        topic_first_seen_at=first_seen,
        comments=tuple(comments),
    )


def _topic_categories(rng: np.random.Generator, topic_idx: int) -> list[str]:
    """Explicit labels: usually the topic's home category, sometimes a second."""
    primary = CATEGORY_LABELS[topic_idx % len(CATEGORY_LABELS)]
    secondary = CATEGORY_LABELS[(topic_idx + 3) % len(CATEGORY_LABELS)]
    u = rng.random()
    if u < 0.55:
        return [primary]
    if u < 0.75:
        return sorted({primary, secondary})
    return []


def generate_corpus(config: SynthConfig) -> tuple[Corpus, list[Provenance]]:
    """Emit the full corpus plus the per-article provenance records.

    The provenance values are identical to generate_provenance(config):
    both paths consume the same leading draws of each article's stream.
    """
    config.validate()
    articles: list[Article] = []
    records: list[Provenance] = []
    for oi, params in enumerate(config.outlets):
        for ai in range(params.n_articles):
            rng = _article_rng(config, oi, ai)
            draw = _draw_article(rng, params, config.alpha)
            articles.append(_emit_article(rng, params, config, ai, draw))
            records.append(
                Provenance(
                    article_id=_article_id(params.name, ai),
                    outlet=params.name,
                    log_rate=draw.log_rate,
                    log_volume=draw.log_volume,
                    noise=draw.noise,
                    n_comments=draw.n_comments,
                    clamped=draw.clamped,
                )
            )
    return Corpus(tuple(articles)), records


def clamp_fraction(records: Sequence[Provenance]) -> float:
    if not records:
        return 0.0
    return sum(1 for r in records if r.clamped) / len(records)


def provenance_to_csv(records: Sequence[Provenance]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["article_id", "outlet", "log_rate", "log_volume", "noise", "n_comments", "clamped"]
    )
    for r in records:
        writer.writerow(
            [
                r.article_id, r.outlet,
                repr(r.log_rate), repr(r.log_volume), repr(r.noise),
                r.n_comments, int(r.clamped),
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Published calibration values


def _noise_from_rate_r2(log_vol_std: float, rate_r2: float) -> float:
    # Implied residual std so that a rate-only model's ceiling R^2 equals
    # 1 - noise^2 / sigma^2 = rate_r2.
    return log_vol_std * math.sqrt(1.0 - rate_r2)


# (name, articles, mean log vol, std log vol, slope, intercept, rate-only R^2)
_OUTLET_ROWS = (
    ("WSP", 6470, 1.88, 0.76, 0.758, 2.740, 0.471),
    ("DM", 6046, 1.99, 0.62, 0.703, 2.606, 0.477),
    ("WSJ", 2516, 1.74, 0.70, 0.841, 2.885, 0.651),
    ("FN", 1739, 2.47, 0.94, 0.963, 3.201, 0.378),
    ("Gd", 1697, 2.46, 0.45, 0.656, 2.728, 0.416),
    ("NYT", 965, 2.38, 0.60, 0.707, 2.935, 0.484),
)

_OVERALL_ROW = ("Overall", 19433, 2.02, 0.74, 0.777, 2.767, 0.470)

_PER_ALPHA = {
    "WSP": {5: (0.788, 2.692), 10: (0.758, 2.740), 15: (0.728, 2.741), 20: (0.700, 2.735), 50: (0.574, 2.725)},
    "DM": {5: (0.702, 2.553), 10: (0.703, 2.606), 15: (0.707, 2.595), 20: (0.684, 2.589), 50: (0.595, 2.575)},
    "WSJ": {5: (0.869, 2.812), 10: (0.841, 2.885), 15: (0.809, 2.886), 20: (0.779, 2.876), 50: (0.665, 2.856)},
    "FN": {5: (0.993, 3.217), 10: (0.963, 3.201), 15: (0.915, 3.149), 20: (0.893, 3.113), 50: (0.736, 2.973)},
    "Gd": {5: (0.609, 2.722), 10: (0.656, 2.728), 15: (0.657, 2.713), 20: (0.651, 2.693), 50: (0.566, 2.668)},
    "NYT": {5: (0.699, 2.933), 10: (0.707, 2.935), 15: (0.701, 2.910), 20: (0.684, 2.895), 50: (0.603, 2.815)},
    "Overall": {5: (0.805, 2.744), 10: (0.777, 2.767), 15: (0.739, 2.749), 20: (0.713, 2.738), 50: (0.594, 2.698)},
}

ALPHA_SWEEP = (5, 10, 15, 20, 50)


def _row_to_params(row: tuple) -> OutletParams:
    name, n, mean, std, slope, intercept, rate_r2 = row
    return OutletParams(
        name=name,
        n_articles=n,
        log_vol_mean=mean,
        log_vol_std=std,
        slope=slope,
        intercept=intercept,
        noise_std=_noise_from_rate_r2(std, rate_r2),
        per_alpha=dict(_PER_ALPHA[name]),
    )


def default_paper_config(seed: int = 0, alpha: int = 10) -> SynthConfig:
    """Six-outlet configuration with the published calibration values."""
    return SynthConfig(
        outlets=tuple(_row_to_params(r) for r in _OUTLET_ROWS),
        seed=seed,
        alpha=alpha,
    )


def overall_paper_config(seed: int = 0, alpha: int = 10) -> SynthConfig:
    """Single pseudo-outlet matching the pooled-corpus calibration row."""
    return SynthConfig(outlets=(_row_to_params(_OVERALL_ROW),), seed=seed, alpha=alpha)


def outlet_params(name: str) -> OutletParams:
    for row in _OUTLET_ROWS + (_OVERALL_ROW,):
        if row[0] == name:
            return _row_to_params(row)
    raise SynthError(f"unknown outlet '{name}'")


# ---------------------------------------------------------------------------
# Config (de)serialization


def config_to_json(config: SynthConfig) -> str:
    obj = {
        "seed": config.seed,
        "alpha": config.alpha,
        "topics": config.topics,
        "article_authors": config.article_authors,
        "commenters": config.commenters,
        "reply_fraction": config.reply_fraction,
        "outlets": [
            {
                "name": o.name,
                "n_articles": o.n_articles,
                "log_vol_mean": o.log_vol_mean,
                "log_vol_std": o.log_vol_std,
                "slope": o.slope,
                "intercept": o.intercept,
                "noise_std": o.noise_std,
                "per_alpha": {str(a): list(ba) for a, ba in sorted(o.per_alpha.items())},
            }
            for o in config.outlets
        ],
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def config_from_json(text: str) -> SynthConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SynthError(f"invalid config JSON: {exc.msg}") from exc
    try:
        outlets = tuple(
            OutletParams(
                name=o["name"],
                n_articles=int(o["n_articles"]),
                log_vol_mean=float(o["log_vol_mean"]),
                log_vol_std=float(o["log_vol_std"]),
                slope=float(o["slope"]),
                intercept=float(o["intercept"]),
                noise_std=float(o["noise_std"]),
                per_alpha={
                    int(a): (float(ba[0]), float(ba[1]))
                    for a, ba in o.get("per_alpha", {}).items()
                },
            )
            for o in obj["outlets"]
        )
        config = SynthConfig(
            outlets=outlets,
            seed=int(obj.get("seed", 0)),
            alpha=int(obj.get("alpha", 10)),
            topics=int(obj.get("topics", 24)),
            article_authors=int(obj.get("article_authors", 30)),
            commenters=int(obj.get("commenters", 5000)),
            reply_fraction=float(obj.get("reply_fraction", 0.1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SynthError(f"invalid config: {exc}") from exc
    config.validate()
    return config


def load_config(path: str | Path) -> SynthConfig:
    return config_from_json(Path(path).read_text(encoding="utf-8"))
