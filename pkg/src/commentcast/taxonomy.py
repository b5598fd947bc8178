"""Topic categorization and label propagation.

Topics inherit up to three category labels, scored by how many explicitly
labeled articles on that topic carry each label. Articles then take the
union of their explicit labels and their topic's labels.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping

from .corpus import Article, Corpus, with_categories

CATEGORY_LABELS = (
    "Politics",
    "US",
    "World",
    "Sports",
    "Entertainment",
    "Technology",
    "Business",
    "Science",
    "Health",
)

TOP_CATEGORIES = 3


@dataclass(frozen=True)
class TopicAssignment:
    topic: str
    categories: tuple[str, ...]  # descending count, ties lexicographic; <= 3
    counts: tuple[int, ...]

    @property
    def unassigned(self) -> bool:
        return not self.categories


def category_counts(topic: str, corpus: Corpus) -> dict[str, int]:
    """Labeled-article count per canonical category for one topic."""
    counts = {label: 0 for label in CATEGORY_LABELS}
    for article in corpus.articles:
        if article.topic != topic:
            continue
        for label in article.categories:
            if label in counts:
                counts[label] += 1
    return counts


def categorize_topic(topic: str, corpus: Corpus) -> TopicAssignment:
    """Top-3 categories by labeled-article count (ties lexicographic).

    Topics without any labeled article come back as an empty (flagged)
    assignment rather than an error.
    """
    counts = category_counts(topic, corpus)
    ranked = sorted(
        (label for label, c in counts.items() if c > 0),
        key=lambda label: (-counts[label], label),
    )[:TOP_CATEGORIES]
    return TopicAssignment(
        topic=topic,
        categories=tuple(ranked),
        counts=tuple(counts[label] for label in ranked),
    )


def categorize_topics(corpus: Corpus) -> dict[str, TopicAssignment]:
    topics = sorted({a.topic for a in corpus.articles})
    return {t: categorize_topic(t, corpus) for t in topics}


def propagate_categories(
    corpus: Corpus, assignments: Mapping[str, TopicAssignment]
) -> Corpus:
    """Union each article's explicit labels with its topic's categories.

    Idempotent: a second application with the same assignments is a no-op.
    """
    articles: list[Article] = []
    for article in corpus.articles:
        assignment = assignments.get(article.topic)
        if assignment is None or assignment.unassigned:
            articles.append(article)
            continue
        merged = sorted(set(article.categories) | set(assignment.categories))
        articles.append(with_categories(article, merged))
    return Corpus(tuple(articles))


def assignments_to_csv(assignments: Mapping[str, TopicAssignment]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["topic", "cat1", "cat2", "cat3", "count1", "count2", "count3"])
    for topic in sorted(assignments):
        a = assignments[topic]
        cats = list(a.categories) + [""] * (TOP_CATEGORIES - len(a.categories))
        counts = [str(c) for c in a.counts] + [""] * (TOP_CATEGORIES - len(a.counts))
        writer.writerow([topic, *cats, *counts])
    return buf.getvalue()
