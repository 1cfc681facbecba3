"""
Unsupervised type ranking with BM25.

Type-centric (early fusion): one pseudo-document per type, the concatenated
abstracts of the entities bearing it. Entity-centric (late fusion): rank
entities, then aggregate the scores of the top-k entities onto their types.
"""

import json
import logging
from collections import Counter, defaultdict
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from smartype.core.exceptions import FusionError
from smartype.core.models.ranking_models import IndexKind, InvertedIndex, RankedTypeList
from smartype.core.services.textproc import tokenize

logger = logging.getLogger(__name__)

INDEX_FORMAT = "smartype.bm25-index"
INDEX_VERSION = 1
DEFAULT_EC_K = 20
AGGREGATIONS = ("sum", "max")


@dataclass(frozen=True)
class EntityRecord:
    entity_id: str
    abstract: str
    types: tuple[str, ...]


def read_entities(path: str | Path) -> Iterator[EntityRecord]:
    """Stream `entity-id<TAB>abstract<TAB>type1,type2,...` lines."""
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise FusionError(f"Cannot read entities '{path}': {exc}") from exc
    with handle:
        try:
            for number, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise FusionError(f"{path}:{number}: expected 3 tab-separated fields, got {len(fields)}")
                entity_id, abstract, types = fields
                yield EntityRecord(
                    entity_id=entity_id,
                    abstract=abstract,
                    types=tuple(label.strip() for label in types.split(",") if label.strip()),
                )
        except UnicodeDecodeError as exc:
            raise FusionError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc


def _build_index(
    kind: IndexKind,
    documents: Sequence[tuple[str, list[str]]],
    doc_types: tuple[tuple[str, ...], ...] | None,
    k1: float,
    b: float,
    skipped: int,
) -> InvertedIndex:
    term_ids: dict[str, int] = {}
    rows, cols, data = [], [], []
    lengths = np.zeros(len(documents), dtype=np.int64)
    for doc_id, (_, tokens) in enumerate(documents):
        lengths[doc_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            rows.append(term_ids.setdefault(term, len(term_ids)))
            cols.append(doc_id)
            data.append(tf)
    postings = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(term_ids), len(documents)),
    )
    postings.sort_indices()
    return InvertedIndex(
        kind=kind,
        terms=tuple(term_ids),
        postings=postings,
        doc_lengths=lengths,
        labels=tuple(label for label, _ in documents),
        doc_types=doc_types,
        k1=k1,
        b=b,
        skipped=skipped,
    )


def build_type_index(entities: Iterable[EntityRecord], k1: float = 1.2, b: float = 0.75) -> InvertedIndex:
    """One document per type: the concatenated abstracts of every entity bearing it."""
    type_tokens: dict[str, list[str]] = defaultdict(list)
    skipped = 0
    for entity in entities:
        if not entity.types:
            skipped += 1
            continue
        tokens = tokenize(entity.abstract)
        for label in dict.fromkeys(entity.types):
            type_tokens[label].extend(tokens)
    if not type_tokens:
        raise FusionError("No typed entities to build a type index from")
    if skipped:
        logger.warning("Skipped %d entities without types", skipped)
    documents = [(label, type_tokens[label]) for label in sorted(type_tokens)]
    logger.info("Built type index over %d types", len(documents))
    return _build_index(IndexKind.TYPE, documents, None, k1, b, skipped)


def build_entity_index(entities: Iterable[EntityRecord], k1: float = 1.2, b: float = 0.75) -> InvertedIndex:
    """One document per entity (its abstract); the entity's types are kept for late fusion."""
    documents: list[tuple[str, list[str]]] = []
    doc_types: list[tuple[str, ...]] = []
    seen: set[str] = set()
    skipped = 0
    for entity in entities:
        if entity.entity_id in seen:
            raise FusionError(f"Duplicate entity id '{entity.entity_id}'")
        seen.add(entity.entity_id)
        if not entity.types:
            skipped += 1
            continue
        documents.append((entity.entity_id, tokenize(entity.abstract)))
        doc_types.append(tuple(dict.fromkeys(entity.types)))
    if not documents:
        raise FusionError("No typed entities to build an entity index from")
    if skipped:
        logger.warning("Skipped %d entities without types", skipped)
    logger.info("Built entity index over %d entities", len(documents))
    return _build_index(IndexKind.ENTITY, documents, tuple(doc_types), k1, b, skipped)


def bm25_idf(n_docs: int, df: int) -> float:
    """ln(1 + (N - df + 0.5) / (df + 0.5)), floored at 0."""
    return max(0.0, float(np.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))))


def _bm25_scores(index: InvertedIndex, query_tokens: Iterable[str]) -> dict[int, float]:
    scores = np.zeros(index.n_docs)
    matched = np.zeros(index.n_docs, dtype=bool)
    avg_length = index.avg_doc_length or 1.0
    norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths / avg_length)
    for term in dict.fromkeys(query_tokens):
        docs, tf = index.posting(term)
        if docs.size == 0:
            continue
        idf = bm25_idf(index.n_docs, docs.size)
        scores[docs] += idf * tf * (index.k1 + 1.0) / (tf + norm[docs])
        matched[docs] = True
    return {int(doc_id): float(scores[doc_id]) for doc_id in np.flatnonzero(matched)}


def bm25_rank(index: InvertedIndex, query_tokens: Iterable[str], cutoff: int | None = None) -> list[tuple[str, float]]:
    """
    BM25 over the documents containing at least one query term, each distinct
    query term counted once. Ordered by score desc, label asc; top `cutoff` kept.
    """
    if cutoff is not None and cutoff < 1:
        raise FusionError("The cutoff must be at least 1")
    scores = _bm25_scores(index, query_tokens)
    ranked = sorted(((index.labels[doc_id], score) for doc_id, score in scores.items()), key=lambda item: (-item[1], item[0]))
    return ranked if cutoff is None else ranked[:cutoff]


def rank_types_tc(question_text: str, type_index: InvertedIndex, cutoff: int | None = None) -> RankedTypeList:
    if type_index.kind != IndexKind.TYPE:
        raise FusionError("Type-centric ranking needs a type index")
    return RankedTypeList.from_scores(bm25_rank(type_index, tokenize(question_text), cutoff))


def rank_types_ec(
    question_text: str,
    entity_index: InvertedIndex,
    k: int = DEFAULT_EC_K,
    aggregation: str = "sum",
    cutoff: int | None = None,
) -> RankedTypeList:
    """Score each type by the sum (or max) of the BM25 scores of the top-k entities bearing it."""
    if entity_index.kind != IndexKind.ENTITY:
        raise FusionError("Entity-centric ranking needs an entity index")
    if k < 1:
        raise FusionError("k must be at least 1")
    if aggregation not in AGGREGATIONS:
        raise FusionError(f"Unknown aggregation '{aggregation}', expected one of {AGGREGATIONS}")
    scores = _bm25_scores(entity_index, tokenize(question_text))
    top = sorted(scores.items(), key=lambda item: (-item[1], entity_index.labels[item[0]]))[:k]
    type_scores: dict[str, float] = {}
    for doc_id, score in top:
        for label in entity_index.doc_types[doc_id]:
            if aggregation == "sum":
                type_scores[label] = type_scores.get(label, 0.0) + score
            else:
                type_scores[label] = max(type_scores.get(label, 0.0), score)
    return RankedTypeList.from_scores(type_scores, k=cutoff)


def save_index(index: InvertedIndex, path: str | Path) -> None:
    meta = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "kind": str(index.kind),
        "params": {"k1": index.k1, "b": index.b},
        "skipped": index.skipped,
        "doc_types": [list(types) for types in index.doc_types] if index.doc_types is not None else None,
    }
    with open(path, "wb") as handle:
        np.savez_compressed(
            handle,
            indptr=index.postings.indptr,
            indices=index.postings.indices,
            data=index.postings.data,
            terms=np.array(index.terms, dtype=str),
            labels=np.array(index.labels, dtype=str),
            doc_lengths=index.doc_lengths,
            meta=np.array(json.dumps(meta)),
        )


def load_index(path: str | Path) -> InvertedIndex:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        if meta.get("format") != INDEX_FORMAT or meta.get("version") != INDEX_VERSION:
            raise FusionError(f"'{path}' is not a version {INDEX_VERSION} BM25 index")
        terms = tuple(str(term) for term in archive["terms"])
        labels = tuple(str(label) for label in archive["labels"])
        postings = sparse.csr_matrix(
            (archive["data"], archive["indices"], archive["indptr"]), shape=(len(terms), len(labels))
        )
        doc_types = meta["doc_types"]
        return InvertedIndex(
            kind=IndexKind(meta["kind"]),
            terms=terms,
            postings=postings,
            doc_lengths=archive["doc_lengths"],
            labels=labels,
            doc_types=tuple(tuple(types) for types in doc_types) if doc_types is not None else None,
            k1=meta["params"]["k1"],
            b=meta["params"]["b"],
            skipped=meta["skipped"],
        )
