"""
Retrieval structures: inverted indexes over type or entity documents and ranked type lists.
"""

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from django.db import models
from scipy import sparse

from smartype.core.exceptions import FusionError


class IndexKind(models.TextChoices):
    TYPE = "type"
    ENTITY = "entity"


@dataclass(frozen=True)
class RankedTypeList:
    """(type label, score) pairs ordered by descending score, ties by ascending label."""
    entries: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        labels = [label for label, _ in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError("Ranked type lists cannot repeat a label")
        keys = [(-score, label) for label, score in self.entries]
        if keys != sorted(keys):
            raise ValueError("Ranked type list entries are not in (score desc, label asc) order")

    @classmethod
    def from_scores(cls, scores: Mapping[str, float] | Iterable[tuple[str, float]], k: int | None = None) -> "RankedTypeList":
        items = scores.items() if isinstance(scores, Mapping) else scores
        ordered = sorted(((label, float(score)) for label, score in items), key=lambda item: (-item[1], item[0]))
        if k is not None:
            ordered = ordered[:k]
        return cls(tuple(ordered))

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "RankedTypeList":
        """Rank a plain label list by position (first label scores highest)."""
        labels = list(dict.fromkeys(labels))
        return cls(tuple((label, float(len(labels) - position)) for position, label in enumerate(labels)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.entries)

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.entries]

    def top(self, k: int) -> "RankedTypeList":
        return RankedTypeList(self.entries[:k])


@dataclass(frozen=True, eq=False)
class InvertedIndex:
    """
    BM25 index. `postings` is a terms × documents CSR matrix of term frequencies,
    so the postings of a term are sorted by document id.
    """
    kind: IndexKind
    terms: tuple[str, ...]
    postings: sparse.csr_matrix
    doc_lengths: np.ndarray
    labels: tuple[str, ...]
    doc_types: tuple[tuple[str, ...], ...] | None = None
    k1: float = 1.2
    b: float = 0.75
    skipped: int = 0
    _term_ids: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.labels:
            raise FusionError("An inverted index needs at least one document")
        if self.postings.shape != (len(self.terms), len(self.labels)):
            raise FusionError("Postings shape does not match terms × documents")
        if len(self.doc_lengths) != len(self.labels):
            raise FusionError("Every document needs a length")
        if self.kind == IndexKind.ENTITY and (self.doc_types is None or len(self.doc_types) != len(self.labels)):
            raise FusionError("Entity indexes keep the types of every entity")
        object.__setattr__(self, "_term_ids", MappingProxyType({term: i for i, term in enumerate(self.terms)}))

    @property
    def n_docs(self) -> int:
        return len(self.labels)

    @property
    def avg_doc_length(self) -> float:
        return float(np.mean(self.doc_lengths))

    def term_id(self, term: str) -> int | None:
        return self._term_ids.get(term)

    def posting(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        """(doc ids, term frequencies) of one term; empty arrays for unknown terms."""
        term_id = self._term_ids.get(term)
        if term_id is None:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
        start, end = self.postings.indptr[term_id], self.postings.indptr[term_id + 1]
        return self.postings.indices[start:end], self.postings.data[start:end]

    def document_frequency(self, term: str) -> int:
        return len(self.posting(term)[0])
