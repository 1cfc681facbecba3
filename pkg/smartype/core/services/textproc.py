"""
Tokenization, vocabulary fitting and TF-IDF vectorization.

The vocabulary and the idf values are fitted on training texts only.
Weights are tf · (ln((1 + N) / (1 + df)) + 1), L2-normalized per text.
"""

import hashlib
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer

from smartype.core.exceptions import TextProcessingError
from smartype.core.models.text_models import SparseVector, Vocabulary, tokenize

logger = logging.getLogger(__name__)

VOCABULARY_FORMAT = "smartype.vocabulary"
VOCABULARY_VERSION = 1


def fit_vocabulary(train_texts: Sequence[str]) -> Vocabulary:
    """Terms in order of first occurrence; df counts documents, not occurrences."""
    if not train_texts:
        raise TextProcessingError("Cannot fit a vocabulary on an empty corpus")
    terms = dict.fromkeys(term for text in train_texts for term in tokenize(text))
    if not terms:
        raise TextProcessingError("The training corpus contains no tokens")
    presence = CountVectorizer(
        vocabulary={term: term_id for term_id, term in enumerate(terms)},
        tokenizer=tokenize,
        lowercase=False,
        token_pattern=None,
        binary=True,
    ).transform([text or "" for text in train_texts])
    df = np.asarray(presence.sum(axis=0)).ravel()
    logger.info("Fitted vocabulary of %d terms on %d documents", len(terms), len(train_texts))
    return Vocabulary(terms=tuple(terms), df=tuple(int(count) for count in df), n_docs=len(train_texts))


def vectorize(vocab: Vocabulary, text: str | None) -> SparseVector:
    return row_vector(vocab.transform([text]), 0)


def to_matrix(vectors: Sequence[SparseVector], dim: int) -> sparse.csr_matrix:
    """Stack sparse vectors as the rows of a CSR matrix with `dim` columns."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for row, vector in enumerate(vectors):
        indptr[row + 1] = indptr[row] + len(vector)
    indices = np.concatenate([vector.indices for vector in vectors]) if vectors else np.empty(0, dtype=np.int64)
    data = np.concatenate([vector.values for vector in vectors]) if vectors else np.empty(0)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def vectorize_many(vocab: Vocabulary, texts: Iterable[str | None]) -> sparse.csr_matrix:
    return vocab.transform(texts)


def row_vector(matrix: sparse.csr_matrix, row: int) -> SparseVector:
    start, end = matrix.indptr[row], matrix.indptr[row + 1]
    return SparseVector(matrix.indices[start:end], matrix.data[start:end])


def vocabulary_payload(vocab: Vocabulary) -> dict:
    return {"format": VOCABULARY_FORMAT, "version": VOCABULARY_VERSION, **vocab.to_dict()}


def vocabulary_hash(vocab: Vocabulary) -> str:
    canonical = json.dumps(vocabulary_payload(vocab), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(vocabulary_payload(vocab), ensure_ascii=False), encoding="utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != VOCABULARY_FORMAT or payload.get("version") != VOCABULARY_VERSION:
        raise TextProcessingError(f"'{path}' is not a version {VOCABULARY_VERSION} vocabulary file")
    rows = sorted(payload["terms"], key=lambda row: row[1])
    if [row[1] for row in rows] != list(range(len(rows))):
        raise TextProcessingError(f"'{path}': term ids are not dense")
    return Vocabulary(
        terms=tuple(row[0] for row in rows),
        df=tuple(int(row[2]) for row in rows),
        n_docs=int(payload["n_docs"]),
    )
