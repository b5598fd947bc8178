"""Article/comment data model, JSONL ingestion, targets, reply trees, folds.

The on-disk corpus format is JSON Lines: one article object per line with
its comments embedded as an array. Timestamps are UTC epoch seconds stored
as integers. Unknown fields are ignored on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

WEEK_SECONDS = 604_800


class CorpusError(ValueError):
    """Raised for malformed corpus files or invariant violations."""


@dataclass(frozen=True, slots=True)
class Comment:
    id: str
    timestamp: int
    author: str
    text: str
    parent_id: Optional[str] = None
    likes: int = 0
    dislikes: int = 0


@dataclass(frozen=True, slots=True)
class Article:
    id: str
    outlet: str
    published_at: int
    title: str
    body: str
    author: str
    topic: str
    categories: tuple[str, ...] = ()
    topic_first_seen_at: Optional[int] = None
    comments: tuple[Comment, ...] = ()

    def comments_within_week(self) -> tuple[Comment, ...]:
        cutoff = self.published_at + WEEK_SECONDS
        return tuple(c for c in self.comments if c.timestamp <= cutoff)


@dataclass(frozen=True)
class Corpus:
    articles: tuple[Article, ...]

    @property
    def outlets(self) -> tuple[str, ...]:
        return tuple(sorted({a.outlet for a in self.articles}))

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(sorted({c for a in self.articles for c in a.categories}))

    def __len__(self) -> int:
        return len(self.articles)

    def by_outlet(self, outlet: str) -> "Corpus":
        return Corpus(tuple(a for a in self.articles if a.outlet == outlet))


@dataclass(frozen=True, slots=True)
class ReplyTreeNode:
    comment_id: str
    level: int
    children: tuple["ReplyTreeNode", ...]


@dataclass(frozen=True)
class ReplyTree:
    """Reply structure over an article's first alpha comments.

    The article itself is the (implicit) root at level 0; comments occupy
    levels 1..depth. Comments whose parent is absent or outside the first
    alpha attach directly to the root.
    """

    article_id: str
    roots: tuple[ReplyTreeNode, ...]

    def node_count(self) -> int:
        return sum(_subtree_size(r) for r in self.roots)

    def level_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        stack = list(self.roots)
        while stack:
            node = stack.pop()
            counts[node.level] = counts.get(node.level, 0) + 1
            stack.extend(node.children)
        return counts


def _subtree_size(node: ReplyTreeNode) -> int:
    return 1 + sum(_subtree_size(c) for c in node.children)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: Mapping[str, int]

    def fold_ids(self, fold: int) -> tuple[str, ...]:
        return tuple(sorted(i for i, f in self.assignment.items() if f == fold))


# ---------------------------------------------------------------------------
# JSONL ingestion


_COMMENT_FIELDS = {
    "id": str,
    "timestamp": int,
    "author": str,
    "text": str,
    "likes": int,
    "dislikes": int,
}

_ARTICLE_FIELDS = {
    "id": str,
    "outlet": str,
    "published_at": int,
    "title": str,
    "body": str,
    "author": str,
    "topic": str,
}


def _require(obj: dict, name: str, kind, lineno: int):
    if name not in obj:
        raise CorpusError(f"line {lineno}: missing field '{name}'")
    value = obj[name]
    if kind is int and isinstance(value, bool):
        raise CorpusError(f"line {lineno}: field '{name}': expected {kind.__name__}")
    if not isinstance(value, kind):
        raise CorpusError(f"line {lineno}: field '{name}': expected {kind.__name__}")
    return value


def _parse_comment(obj: dict, lineno: int) -> Comment:
    values = {name: _require(obj, name, kind, lineno) for name, kind in _COMMENT_FIELDS.items()}
    parent = obj.get("parent_id")
    if parent is not None and not isinstance(parent, str):
        raise CorpusError(f"line {lineno}: field 'parent_id': expected str or null")
    if values["likes"] < 0 or values["dislikes"] < 0:
        raise CorpusError(f"line {lineno}: field 'likes'/'dislikes': must be >= 0")
    return Comment(parent_id=parent, **values)


def _parse_article(obj: dict, lineno: int) -> Article:
    values = {name: _require(obj, name, kind, lineno) for name, kind in _ARTICLE_FIELDS.items()}
    cats = obj.get("categories", [])
    if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
        raise CorpusError(f"line {lineno}: field 'categories': expected list of str")
    seen = obj.get("topic_first_seen_at")
    if seen is not None and not isinstance(seen, int):
        raise CorpusError(f"line {lineno}: field 'topic_first_seen_at': expected int or null")
    raw_comments = obj.get("comments", [])
    if not isinstance(raw_comments, list):
        raise CorpusError(f"line {lineno}: field 'comments': expected list")
    comments = sorted(
        (_parse_comment(c, lineno) for c in raw_comments), key=lambda c: c.timestamp
    )
    article = Article(
        categories=tuple(cats),
        topic_first_seen_at=seen,
        comments=tuple(comments),
        **values,
    )
    _validate_article(article, lineno)
    return article


def _validate_article(article: Article, lineno: int) -> None:
    ids = set()
    for c in article.comments:
        if c.id in ids:
            raise CorpusError(f"line {lineno}: duplicate comment id '{c.id}'")
        ids.add(c.id)
        if c.timestamp < article.published_at:
            raise CorpusError(
                f"line {lineno}: comment '{c.id}' timestamp precedes published_at"
            )
    by_id = {c.id: c for c in article.comments}
    for c in article.comments:
        if c.parent_id is None:
            continue
        parent = by_id.get(c.parent_id)
        if parent is None:
            raise CorpusError(
                f"line {lineno}: comment '{c.id}' references unknown parent '{c.parent_id}'"
            )
        if parent.timestamp > c.timestamp:
            raise CorpusError(
                f"line {lineno}: comment '{c.id}' precedes its parent '{c.parent_id}'"
            )


def load_corpus(path: str | Path) -> Corpus:
    """Parse a JSONL corpus file, validating invariants per article."""
    articles: list[Article] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            article = _parse_article(obj, lineno)
            if article.id in seen_ids:
                raise CorpusError(f"line {lineno}: duplicate article id '{article.id}'")
            seen_ids.add(article.id)
            articles.append(article)
    return Corpus(tuple(articles))


def _comment_to_obj(c: Comment) -> dict:
    obj = {
        "id": c.id,
        "timestamp": c.timestamp,
        "author": c.author,
        "text": c.text,
        "likes": c.likes,
        "dislikes": c.dislikes,
    }
    if c.parent_id is not None:
        obj["parent_id"] = c.parent_id
    return obj


def _article_to_obj(a: Article) -> dict:
    obj = {
        "id": a.id,
        "outlet": a.outlet,
        "published_at": a.published_at,
        "title": a.title,
        "body": a.body,
        "author": a.author,
        "topic": a.topic,
        "categories": list(a.categories),
        "comments": [_comment_to_obj(c) for c in a.comments],
    }
    if a.topic_first_seen_at is not None:
        obj["topic_first_seen_at"] = a.topic_first_seen_at
    return obj


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus in the JSONL format accepted by load_corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for a in corpus.articles:
            fh.write(json.dumps(_article_to_obj(a), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Targets, eligibility, trees, folds


def weekly_volume(article: Article) -> int:
    """Number of comments (including replies) within 7 days of publication."""
    return len(article.comments_within_week())


def compute_target(article: Article) -> float:
    """log10 of the comment count accumulated in the first week."""
    n = weekly_volume(article)
    if n == 0:
        raise CorpusError(f"article '{article.id}': no target (zero comments in window)")
    return math.log10(n)


def eligible(article: Article, alpha: int) -> bool:
    """True iff the article has at least alpha comments in the week window."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    return weekly_volume(article) >= alpha


def eligible_articles(corpus: Corpus, alpha: int) -> tuple[Article, ...]:
    return tuple(a for a in corpus.articles if eligible(a, alpha))


def first_alpha_comments(article: Article, alpha: int) -> tuple[Comment, ...]:
    if not eligible(article, alpha):
        raise CorpusError(f"article '{article.id}': fewer than {alpha} comments in window")
    return article.comments[:alpha]


def build_reply_tree(article: Article, alpha: int) -> ReplyTree:
    """Reply tree over the first alpha comments.

    Comments replying to anything outside the first alpha (or to nothing)
    become children of the article root, so the node count is always alpha.
    """
    window = first_alpha_comments(article, alpha)
    in_window = {c.id for c in window}
    children: dict[Optional[str], list[str]] = {}
    for c in window:
        parent = c.parent_id if c.parent_id in in_window else None
        if parent == c.id:
            raise CorpusError(f"article '{article.id}': comment '{c.id}' is its own parent")
        children.setdefault(parent, []).append(c.id)

    built: set[str] = set()

    def build(comment_id: str, level: int) -> ReplyTreeNode:
        if comment_id in built:
            raise CorpusError(f"article '{article.id}': cycle at comment '{comment_id}'")
        built.add(comment_id)
        kids = tuple(build(k, level + 1) for k in children.get(comment_id, ()))
        return ReplyTreeNode(comment_id, level, kids)

    roots = tuple(build(cid, 1) for cid in children.get(None, ()))
    tree = ReplyTree(article.id, roots)
    if tree.node_count() != alpha:
        raise CorpusError(f"article '{article.id}': cycle detected in reply structure")
    return tree


def assign_folds(ids: Sequence[str], k: int, seed: int) -> dict[str, int]:
    """Deterministic near-equal partition of ids into k folds."""
    order = np.random.default_rng(seed).permutation(sorted(ids))
    return {str(ident): i % k for i, ident in enumerate(order)}


def split_folds(corpus: Corpus, k: int, seed: int, alpha: int = 10) -> FoldPlan:
    """Randomly partition the eligible articles into k near-equal folds."""
    if k < 2:
        raise ValueError("k must be >= 2")
    ids = [a.id for a in eligible_articles(corpus, alpha)]
    if len(ids) < k:
        raise CorpusError(f"too few eligible articles ({len(ids)}) for {k} folds")
    return FoldPlan(k=k, assignment=assign_folds(ids, k, seed))


# ---------------------------------------------------------------------------
# Outlet clock sidecar


@dataclass(frozen=True)
class OutletClocks:
    """Per-outlet UTC offsets in minutes, used only by calendar features."""

    offsets: Mapping[str, int] = field(default_factory=dict)
    default_offset: int = 0

    def offset_minutes(self, outlet: str) -> int:
        return self.offsets.get(outlet, self.default_offset)

    def local_seconds(self, outlet: str, timestamp: int) -> int:
        return timestamp + 60 * self.offset_minutes(outlet)


def load_outlet_clocks(path: str | Path) -> OutletClocks:
    """Parse an 'outlet = minutes' key-value sidecar file."""
    offsets: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise CorpusError(f"line {lineno}: expected 'outlet = minutes'")
            key, _, value = text.partition("=")
            try:
                offsets[key.strip()] = int(value.strip())
            except ValueError as exc:
                raise CorpusError(f"line {lineno}: offset must be an integer") from exc
    return OutletClocks(offsets=offsets)


def with_categories(article: Article, categories: Iterable[str]) -> Article:
    return replace(article, categories=tuple(categories))
