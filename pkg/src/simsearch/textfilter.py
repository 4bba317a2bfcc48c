"""Title tokenization, keyword predicates, and tf-idf title similarity.

Tokenizer: Unicode-lowercase, split on runs of non-alphanumeric characters.
Hyphenated runs additionally emit the joined form, so "e-cigarette" yields
"e", "cigarette" and "ecigarette" and a predicate on "ecigarette" matches
realistic titles.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_HYPHEN_RUN_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)+", re.UNICODE)


@dataclass(frozen=True)
class TokenizedTitle:
    tokens: tuple[str, ...]
    tf: dict[str, int] = field(compare=False)

    @property
    def token_set(self) -> frozenset[str]:
        return frozenset(self.tokens)


def tokenize(text: str) -> TokenizedTitle:
    lowered = text.lower()
    tokens = _TOKEN_RE.findall(lowered)
    for run in _HYPHEN_RUN_RE.findall(lowered):
        tokens.append(run.replace("-", ""))
    return TokenizedTitle(tokens=tuple(tokens), tf=dict(Counter(tokens)))


@dataclass(frozen=True)
class TextPredicate:
    """OR over clauses; within a clause every term must appear."""

    clauses: tuple[frozenset[str], ...]

    @classmethod
    def of(cls, *clauses: list[str] | tuple[str, ...]) -> "TextPredicate":
        return cls(tuple(frozenset(t.lower() for t in clause) for clause in clauses))

    @classmethod
    def from_json(cls, obj: dict) -> "TextPredicate":
        clauses = obj.get("any_of", [])
        return cls(tuple(frozenset(t.lower() for t in c.get("all_of", [])) for c in clauses))

    def to_json(self) -> dict:
        return {"any_of": [{"all_of": sorted(c)} for c in self.clauses]}

    @property
    def empty(self) -> bool:
        return len(self.clauses) == 0


EMPTY_PREDICATE = TextPredicate(())


def matches(p: TextPredicate, t: TokenizedTitle) -> bool:
    """True iff some clause is fully contained in the token set; empty matches all."""
    if p.empty:
        return True
    toks = t.token_set
    return any(clause <= toks for clause in p.clauses)


def prefilter(p: TextPredicate, titles: dict[str, TokenizedTitle]) -> set[str]:
    """Ids whose titles match p; shrinks the image candidate space before search."""
    if p.empty:
        return set(titles)
    return {item_id for item_id, t in titles.items() if matches(p, t)}


class TextIndex:
    """Inverted tf-idf index over titles for top-N similar-title retrieval."""

    def __init__(self, titles: dict[str, TokenizedTitle]):
        self._titles = dict(titles)
        self._df: Counter[str] = Counter()
        self._postings: dict[str, list[tuple[str, int]]] = {}
        for item_id, t in self._titles.items():
            for term, count in t.tf.items():
                self._df[term] += 1
                self._postings.setdefault(term, []).append((item_id, count))
        n = len(self._titles)
        self._idf = {term: math.log(1.0 + n / df) for term, df in self._df.items()}
        self._norms = {
            item_id: math.sqrt(
                sum((c * self._idf[term]) ** 2 for term, c in t.tf.items())
            )
            for item_id, t in self._titles.items()
        }

    def __len__(self) -> int:
        return len(self._titles)

    def top_n(self, query_title: str, n: int, exclude: str | None = None) -> list[tuple[str, float]]:
        """Top-n (id, score) by tf-idf cosine, score desc then id asc."""
        if n <= 0:
            return []
        qt = tokenize(query_title)
        qweights = {
            term: c * self._idf[term] for term, c in qt.tf.items() if term in self._idf
        }
        qnorm = math.sqrt(sum(w * w for w in qweights.values()))
        if qnorm == 0.0:
            return []
        scores: dict[str, float] = {}
        for term, qw in qweights.items():
            idf = self._idf[term]
            for item_id, count in self._postings[term]:
                scores[item_id] = scores.get(item_id, 0.0) + qw * count * idf
        ranked = []
        for item_id, dot in scores.items():
            if item_id == exclude:
                continue
            dnorm = self._norms[item_id]
            if dnorm > 0.0:
                ranked.append((item_id, dot / (qnorm * dnorm)))
        ranked.sort(key=lambda pair: (-pair[1], pair[0]))
        return ranked[:n]


def text_candidates(
    query_title: str,
    corpus: dict[str, TokenizedTitle] | TextIndex,
    n: int,
    exclude: str | None = None,
) -> list[tuple[str, float]]:
    """Top-n ids by tf-idf cosine similarity of titles (idf = ln(1 + |corpus|/df))."""
    index = corpus if isinstance(corpus, TextIndex) else TextIndex(corpus)
    return index.top_n(query_title, n, exclude=exclude)
