"""Shared fixtures: compact builders for articles, comments, and corpora."""

from __future__ import annotations

import pytest

from commentcast.corpus import Article, Comment, Corpus

BASE_TS = 1_452_585_600  # 2016-01-12 08:00:00 UTC


def make_comment(
    i: int,
    timestamp: int,
    parent_id: str | None = None,
    author: str | None = None,
    text: str = "plain comment text",
    likes: int = 0,
    dislikes: int = 0,
    prefix: str = "c",
) -> Comment:
    return Comment(
        id=f"{prefix}{i}",
        timestamp=timestamp,
        author=author if author is not None else f"user{i}",
        text=text,
        parent_id=parent_id,
        likes=likes,
        dislikes=dislikes,
    )


def make_article(
    article_id: str = "a1",
    outlet: str = "FN",
    published_at: int = BASE_TS,
    comments: tuple[Comment, ...] | list[Comment] = (),
    topic: str = "topic-a",
    categories: tuple[str, ...] = (),
    title: str = "a headline",
    body: str = "article body text",
    author: str = "writer-1",
    topic_first_seen_at: int | None = None,
) -> Article:
    ordered = tuple(sorted(comments, key=lambda c: c.timestamp))
    return Article(
        id=article_id,
        outlet=outlet,
        published_at=published_at,
        title=title,
        body=body,
        author=author,
        topic=topic,
        categories=categories,
        topic_first_seen_at=topic_first_seen_at,
        comments=ordered,
    )


def article_with_n_comments(
    article_id: str,
    n: int,
    outlet: str = "FN",
    published_at: int = BASE_TS,
    spacing_s: int = 60,
    first_offset_s: int = 120,
) -> Article:
    comments = [
        make_comment(i, published_at + first_offset_s + i * spacing_s, prefix=f"{article_id}-c")
        for i in range(n)
    ]
    return make_article(article_id, outlet=outlet, published_at=published_at, comments=comments)


@pytest.fixture
def small_corpus() -> Corpus:
    articles = [
        article_with_n_comments(f"a{i}", 12 + i, outlet="FN" if i % 2 else "Gd")
        for i in range(10)
    ]
    return Corpus(tuple(articles))
