"""
Text features: the fitted vocabulary and sparse TF-IDF vectors.
"""

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer, TfidfTransformer

from smartype.core.exceptions import TextProcessingError

# maximal runs of two or more letters or digits
TOKEN_PATTERN = re.compile(r"[^\W_]{2,}")


def tokenize(text: str | None) -> list[str]:
    if not text:
        return []
    return TOKEN_PATTERN.findall(text.lower())


def incidence_matrix(df: np.ndarray, n_docs: int) -> sparse.csr_matrix:
    """Binary documents × terms matrix whose column j is set in its first df[j] rows."""
    df = np.asarray(df, dtype=np.int64)
    rows = np.arange(df.sum()) - np.repeat(np.cumsum(df) - df, df)
    cols = np.repeat(np.arange(df.size), df)
    return sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_docs, df.size))


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """
    Term → term-id map with document frequencies.
    Term ids are dense in [0, size) and follow first occurrence in the training corpus.
    Counting and weighting go through a fixed-vocabulary CountVectorizer and a
    TfidfTransformer (smoothed idf, l2 norm) fitted on the stored document frequencies.
    """
    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int
    _ids: Mapping[str, int] = field(init=False, repr=False)
    _counter: CountVectorizer = field(init=False, repr=False)
    _tfidf: TfidfTransformer = field(init=False, repr=False)

    def __post_init__(self):
        if not self.terms:
            raise TextProcessingError("A vocabulary needs at least one term")
        if len(self.terms) != len(self.df):
            raise TextProcessingError("Vocabulary terms and document frequencies differ in length")
        ids = {term: term_id for term_id, term in enumerate(self.terms)}
        if len(ids) != len(self.terms):
            raise TextProcessingError("Vocabulary contains duplicate terms")
        df = np.asarray(self.df, dtype=np.int64)
        if df.min() < 1 or df.max() > self.n_docs:
            raise TextProcessingError("Document frequencies must lie in [1, n_docs]")
        counter = CountVectorizer(vocabulary=dict(ids), tokenizer=tokenize, lowercase=False, token_pattern=None)
        tfidf = TfidfTransformer(norm="l2", use_idf=True, smooth_idf=True)
        tfidf.fit(incidence_matrix(df, self.n_docs))
        object.__setattr__(self, "_ids", MappingProxyType(ids))
        object.__setattr__(self, "_counter", counter)
        object.__setattr__(self, "_tfidf", tfidf)

    def counts(self, texts: Iterable[str | None]) -> sparse.csr_matrix:
        return sparse.csr_matrix(self._counter.transform([text or "" for text in texts]))

    def transform(self, texts: Iterable[str | None]) -> sparse.csr_matrix:
        """Unit-length TF-IDF rows; out-of-vocabulary terms are dropped."""
        matrix = sparse.csr_matrix(self._tfidf.transform(self.counts(texts)), dtype=np.float64)
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return matrix

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self._ids

    def term_id(self, term: str) -> int | None:
        return self._ids.get(term)

    def document_frequency(self, term: str) -> int:
        term_id = self._ids.get(term)
        return 0 if term_id is None else self.df[term_id]

    @property
    def idf(self) -> np.ndarray:
        return self._tfidf.idf_

    def to_dict(self) -> dict:
        return {
            "n_docs": self.n_docs,
            "terms": [[term, term_id, self.df[term_id]] for term_id, term in enumerate(self.terms)],
        }


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sorted (term-id, weight) pairs; term ids strictly increasing, no zero weights."""
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if indices.shape != values.shape or indices.ndim != 1:
            raise TextProcessingError("Sparse vector indices and values must be 1-d and equally long")
        if indices.size > 1 and np.any(np.diff(indices) <= 0):
            raise TextProcessingError("Sparse vector term ids must be strictly increasing")
        if np.any(values == 0.0):
            raise TextProcessingError("Sparse vectors cannot store zero weights")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @classmethod
    def empty(cls) -> "SparseVector":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))

    @classmethod
    def from_dict(cls, weights: Mapping[int, float]) -> "SparseVector":
        items = sorted((term_id, weight) for term_id, weight in weights.items() if weight != 0.0)
        if not items:
            return cls.empty()
        indices, values = zip(*items)
        return cls(np.array(indices, dtype=np.int64), np.array(values, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(self.values, other.values)

    __hash__ = None

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def normalized(self) -> "SparseVector":
        norm = self.norm()
        if norm == 0.0:
            return self
        return SparseVector(self.indices, self.values / norm)

    def max_index(self) -> int:
        return int(self.indices[-1]) if self.indices.size else -1

    def dot(self, dense: np.ndarray) -> np.ndarray:
        """Dot product with a dense vector, or with every row of a dense matrix."""
        if self.indices.size == 0:
            return np.zeros(dense.shape[:-1]) if dense.ndim > 1 else np.float64(0.0)
        return dense[..., self.indices] @ self.values

    def to_dict(self) -> dict[int, float]:
        return {int(term_id): float(weight) for term_id, weight in zip(self.indices, self.values)}
