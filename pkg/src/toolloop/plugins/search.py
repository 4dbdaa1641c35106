"""Lexical document search over a small fixed corpus.

Ranking is BM25 with the non-negative idf variant:

    idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
    score(d, q) = sum over query tokens t of
                  idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d)/avgdl))

Repeated query tokens contribute once per occurrence. Ties (including the
all-zero case for queries with no corpus terms) break by doc_id ascending.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..server.envstore import EnvState
from .base import ToolPlugin, ToolResult, extract_tag

_WORD = re.compile(r"\w+")


class EmptyIndex(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return [w.lower() for w in _WORD.findall(text)]


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str


class SearchIndex:
    def __init__(self, documents: list[Document], k1: float = 1.2, b: float = 0.75):
        self.documents = sorted(documents, key=lambda d: d.doc_id)
        self.k1 = k1
        self.b = b
        self._doc_terms: list[Counter[str]] = []
        self._doc_len: list[int] = []
        self._df: Counter[str] = Counter()
        for doc in self.documents:
            terms = Counter(tokenize(doc.title) + tokenize(doc.body))
            self._doc_terms.append(terms)
            self._doc_len.append(sum(terms.values()))
            self._df.update(terms.keys())
        self._avgdl = (sum(self._doc_len) / len(self._doc_len)) if self.documents else 0.0

    def __len__(self) -> int:
        return len(self.documents)

    def idf(self, term: str) -> float:
        n, df = len(self.documents), self._df.get(term, 0)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score(self, query: str, doc_index: int) -> float:
        terms = self._doc_terms[doc_index]
        dl = self._doc_len[doc_index]
        denom_scale = 1.0 - self.b + self.b * (dl / self._avgdl) if self._avgdl else 1.0
        total = 0.0
        for term in tokenize(query):
            tf = terms.get(term, 0)
            if tf == 0:
                continue
            total += self.idf(term) * tf * (self.k1 + 1.0) / (tf + self.k1 * denom_scale)
        return total

    def top_k(self, query: str, k: int) -> list[tuple[Document, float]]:
        """Best k documents; zero-score documents fill out the list."""
        if not self.documents:
            raise EmptyIndex("search index holds no documents")
        if k < 1:
            raise ValueError("k must be at least 1")
        scored = [(self.score(query, i), doc) for i, doc in enumerate(self.documents)]
        scored.sort(key=lambda pair: (-pair[0], pair[1].doc_id))
        return [(doc, s) for s, doc in scored[:k]]


def load_corpus(path: Path) -> list[Document]:
    """Line-delimited JSON objects {doc_id, title, body}."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                docs.append(Document(str(raw["doc_id"]), raw["title"], raw["body"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: bad corpus line: {exc}") from None
    return docs


def format_results(results: list[tuple[Document, float]], snippet_chars: int) -> str:
    lines = [
        f'Doc {i}(Title: "{doc.title}") {doc.body[:snippet_chars]}'
        for i, (doc, _score) in enumerate(results, start=1)
    ]
    return "<result>\n" + "\n".join(lines) + "\n</result>"


class SearchTool(ToolPlugin):
    tool_id = "search"
    stop_strings = ("</search>",)

    def __init__(self, index: SearchIndex, *, k: int = 3, snippet_chars: int = 200):
        self.index = index
        self.k = k
        self.snippet_chars = snippet_chars

    def parse_action(self, action_text: str) -> str | None:
        return extract_tag(action_text, "search")

    def conduct_action(self, env: "EnvState", tool_input: str) -> ToolResult:
        try:
            results = self.index.top_k(tool_input, self.k)
        except EmptyIndex as exc:
            return ToolResult(f"Error: {exc}", valid=False)
        return ToolResult(format_results(results, self.snippet_chars))
