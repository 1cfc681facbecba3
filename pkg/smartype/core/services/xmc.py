"""
Extreme multi-label type prediction.

Semantic label indexing clusters the labels by their positive-instance
embeddings (balanced spherical k-means, applied recursively). A cluster-level
one-vs-rest model picks the most promising clusters for a question, per-cluster
one-vs-rest models score the labels inside them, and a linear ensemble ranker
combines cluster score, label score and label prior into the final order.
"""

import json
import logging
import math
from collections import Counter
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

import numpy as np
from ortools.graph.python.min_cost_flow import SimpleMinCostFlow
from scipy import sparse

from smartype.core.exceptions import DatasetError, ModelError
from smartype.core.models.ranking_models import RankedTypeList
from smartype.core.models.text_models import SparseVector
from smartype.core.serializers.base_serializers import flatten_errors
from smartype.core.serializers.prediction_serializers import MatcherScoresSerializer
from smartype.core.services.dataset import read_json
from smartype.core.services.linear import fit_hinge, one_vs_rest_targets
from smartype.core.services.textproc import row_vector

logger = logging.getLogger(__name__)

FALLBACK_WEIGHTS = (1.0, 1.0, 0.1)
MIN_RANKER_QUESTIONS = 50
MATCHER_FORMAT = "smartype.xmc-matcher"
MATCHER_VERSION = 1
KMEANS_MAX_ITER = 20
FLOW_COST_SCALE = 1_000_000


@dataclass(frozen=True, eq=False)
class LabelEmbedding:
    """Label → L2-normalized sum of the TF-IDF vectors of its positive questions (rows of `matrix`)."""
    labels: tuple[str, ...]
    matrix: sparse.csr_matrix

    def vector(self, label: str) -> SparseVector:
        return row_vector(self.matrix, self.labels.index(label))

    def row_norms(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.matrix.multiply(self.matrix).sum(axis=1)).ravel())


@dataclass(frozen=True)
class LabelIndex:
    """Leaf clusters of the label tree; the clusters partition the label set."""
    clusters: tuple[tuple[str, ...], ...]
    branching: int
    max_leaf: int
    depth: int
    seed: int
    overflow: bool = False
    _cluster_of: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cluster_of = {}
        for index, cluster in enumerate(self.clusters):
            if not cluster:
                raise ModelError("Label clusters cannot be empty")
            for label in cluster:
                if label in cluster_of:
                    raise ModelError(f"Label '{label}' appears in more than one cluster")
                cluster_of[label] = index
        object.__setattr__(self, "_cluster_of", MappingProxyType(cluster_of))

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def labels(self) -> list[str]:
        return [label for cluster in self.clusters for label in cluster]

    def cluster_of(self, label: str) -> int | None:
        return self._cluster_of.get(label)

    def to_dict(self) -> dict:
        return {
            "clusters": [list(cluster) for cluster in self.clusters],
            "branching": self.branching,
            "max_leaf": self.max_leaf,
            "depth": self.depth,
            "seed": self.seed,
            "overflow": self.overflow,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "LabelIndex":
        return cls(
            clusters=tuple(tuple(cluster) for cluster in payload["clusters"]),
            branching=payload["branching"],
            max_leaf=payload["max_leaf"],
            depth=payload["depth"],
            seed=payload["seed"],
            overflow=payload["overflow"],
        )


@dataclass(frozen=True, eq=False)
class LinearScorer:
    weights: np.ndarray
    bias: np.ndarray

    def decision(self, x: SparseVector) -> np.ndarray:
        return x.dot(self.weights) + self.bias


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * values))


@dataclass(frozen=True, eq=False)
class MatcherModel:
    """
    Cluster-level scorer plus one label scorer per cluster. A cluster without
    training questions has no label scorer and its labels rely on the prior.
    Scores are squashed to (0, 1).
    """
    index: LabelIndex
    cluster_model: LinearScorer | None
    label_models: tuple[LinearScorer | None, ...]
    label_prior: Mapping[str, float]
    dim: int

    def __post_init__(self):
        if len(self.label_models) != self.index.n_clusters:
            raise ModelError("A matcher needs one label model slot per cluster")
        if self.cluster_model is not None and self.cluster_model.weights.shape[0] != self.index.n_clusters:
            raise ModelError("The cluster model must score every cluster")
        for cluster, model in zip(self.index.clusters, self.label_models):
            if model is not None and model.weights.shape[0] != len(cluster):
                raise ModelError("Label models must score every label of their cluster")

    def _check(self, x: SparseVector):
        if x.max_index() >= self.dim:
            raise ModelError(f"Term id {x.max_index()} is outside the matcher dimension {self.dim}")

    def cluster_scores(self, x: SparseVector) -> np.ndarray:
        self._check(x)
        if self.cluster_model is None:
            return np.ones(self.index.n_clusters)
        return _sigmoid(self.cluster_model.decision(x))

    def label_scores(self, x: SparseVector, cluster: int) -> np.ndarray:
        self._check(x)
        model = self.label_models[cluster]
        if model is None:
            return np.zeros(len(self.index.clusters[cluster]))
        return _sigmoid(model.decision(x))


@dataclass(frozen=True)
class EnsembleRanker:
    """Linear scorer over (cluster score, label score, label prior)."""
    weights: tuple[float, float, float] = FALLBACK_WEIGHTS
    fallback: bool = True
    loss_history: tuple[float, ...] = ()

    def score(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ np.asarray(self.weights)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "fallback": self.fallback, "loss_history": list(self.loss_history)}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "EnsembleRanker":
        return cls(
            weights=tuple(payload["weights"]),
            fallback=payload["fallback"],
            loss_history=tuple(payload["loss_history"]),
        )


def label_matrix(label_lists: Sequence[Sequence[str]], labels: Sequence[str]) -> sparse.csr_matrix:
    """Binary questions × labels matrix; labels outside `labels` are ignored."""
    column = {label: index for index, label in enumerate(labels)}
    rows, cols = [], []
    for row, gold in enumerate(label_lists):
        for label in dict.fromkeys(gold):
            if label in column:
                rows.append(row)
                cols.append(column[label])
    return sparse.csr_matrix(
        (np.ones(len(rows)), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(label_lists), len(labels)),
    )


def _normalize_rows(matrix: sparse.spmatrix) -> sparse.csr_matrix:
    matrix = sparse.csr_matrix(matrix, dtype=np.float64)
    norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    normalized = sparse.diags(scale) @ matrix
    normalized = sparse.csr_matrix(normalized)
    normalized.eliminate_zeros()
    normalized.sort_indices()
    return normalized


def build_label_embeddings(
    X: sparse.spmatrix,
    label_lists: Sequence[Sequence[str]],
    labels: Sequence[str] | None = None,
) -> LabelEmbedding:
    """
    embedding(l) = normalize(sum of the vectors of questions whose gold list contains l).
    Labels from `labels` without positives keep a zero embedding.
    """
    if X.shape[0] == 0 or X.shape[0] != len(label_lists):
        raise ModelError("Label embeddings need at least one question and one gold list per question")
    if labels is None:
        labels = sorted({label for gold in label_lists for label in gold})
    membership = label_matrix(label_lists, labels)
    return LabelEmbedding(labels=tuple(labels), matrix=_normalize_rows(membership.T @ sparse.csr_matrix(X)))


def _farthest_first(vectors: sparse.csr_matrix, k: int, rng: np.random.Generator) -> list[int]:
    chosen = [int(rng.integers(vectors.shape[0]))]
    while len(chosen) < k:
        similarity = np.asarray((vectors @ vectors[chosen].T).todense()).max(axis=1)
        similarity[chosen] = np.inf
        chosen.append(int(np.argmin(similarity)))
    return chosen


def size_bounded_assign(similarity: np.ndarray, size_min: int, size_max: int) -> np.ndarray:
    """
    Assignment of items to clusters maximizing total similarity with every cluster
    size in [size_min, size_max], solved as a min-cost flow:
    item → cluster slot (capacity 1) → cluster (capacity size_max, demand size_min) → sink.
    """
    n_items, k = similarity.shape
    if size_min * k > n_items or size_max * k < n_items or size_min > size_max:
        raise ModelError(f"Cannot place {n_items} labels into {k} clusters of {size_min}..{size_max}")
    slots = n_items + np.arange(k)
    clusters = n_items + k + np.arange(k)
    sink = n_items + 2 * k
    tails = np.concatenate([np.repeat(np.arange(n_items), k), slots, clusters])
    heads = np.concatenate([np.tile(slots, n_items), clusters, np.full(k, sink)])
    capacities = np.concatenate([np.ones(n_items * k), np.full(k, size_max), np.full(k, n_items)])
    costs = np.concatenate([
        np.rint((1.0 - similarity.ravel()) * FLOW_COST_SCALE),
        np.zeros(2 * k),
    ])
    supplies = np.concatenate([np.ones(n_items), np.zeros(k), np.full(k, -size_min), [size_min * k - n_items]])

    flow = SimpleMinCostFlow()
    flow.add_arcs_with_capacity_and_unit_cost(
        tails.astype(np.int32), heads.astype(np.int32), capacities.astype(np.int64), costs.astype(np.int64)
    )
    for node, supply in enumerate(supplies.astype(np.int64)):
        flow.set_node_supply(node, int(supply))
    if flow.solve() != flow.OPTIMAL:
        raise ModelError("The size-bounded label assignment has no optimal solution")
    placed = np.array([flow.flow(arc) for arc in range(n_items * k)]).reshape(n_items, k)
    return placed.argmax(axis=1)


def _centroids(vectors: sparse.csr_matrix, assignment: np.ndarray, k: int, centroids: np.ndarray) -> np.ndarray:
    n_items = vectors.shape[0]
    indicator = sparse.csr_matrix((np.ones(n_items), (assignment, np.arange(n_items))), shape=(k, n_items))
    sums = np.asarray((indicator @ vectors).todense())
    norms = np.linalg.norm(sums, axis=1)
    updated = centroids.copy()
    for cluster in range(k):
        if norms[cluster] > 0:
            updated[cluster] = sums[cluster] / norms[cluster]
    return updated


def _spherical_kmeans(
    vectors: sparse.csr_matrix, centroids: np.ndarray, size_min: int, size_max: int
) -> tuple[np.ndarray, np.ndarray]:
    k = centroids.shape[0]
    assignment = None
    for _ in range(KMEANS_MAX_ITER):
        updated = size_bounded_assign(np.asarray(vectors @ centroids.T), size_min, size_max)
        if assignment is not None and np.array_equal(updated, assignment):
            break
        assignment = updated
        centroids = _centroids(vectors, assignment, k, centroids)
    return assignment, centroids


def balance_bounds(n_items: int, k: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """
    (strict, relaxed) size bounds: strict sizes differ by at most one, relaxed sizes
    lie in [m, 2m] with m = ceil(n / 2k), so no cluster is more than twice another.
    """
    strict = (n_items // k, -(-n_items // k))
    relaxed = (-(-n_items // (2 * k)), 2 * -(-n_items // (2 * k)))
    return strict, relaxed


def balanced_spherical_kmeans(vectors: sparse.csr_matrix, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Split unit-norm rows into k clusters. The strictly balanced solution seeds a
    reassignment pass that lets sizes drift up to a factor of two.
    """
    if not 1 <= k <= vectors.shape[0]:
        raise ModelError(f"Cannot split {vectors.shape[0]} labels into {k} clusters")
    strict, relaxed = balance_bounds(vectors.shape[0], k)
    centroids = vectors[_farthest_first(vectors, k, rng)].toarray()
    _, centroids = _spherical_kmeans(vectors, centroids, *strict)
    assignment, _ = _spherical_kmeans(vectors, centroids, *relaxed)
    return assignment


def cluster_labels(emb: LabelEmbedding, branching: int = 8, max_leaf: int = 64, seed: int = 0) -> LabelIndex:
    """
    Recursively split the labels into min(branching, ceil(n / max_leaf)) balanced
    spherical k-means clusters until every leaf holds at most max_leaf labels.
    Labels with a zero embedding go to a trailing overflow cluster.
    """
    if max_leaf < 1:
        raise ModelError("max_leaf must be at least 1")
    if branching < 2:
        raise ModelError("The branching factor must be at least 2")

    norms = emb.row_norms()
    active = np.flatnonzero(norms > 0)
    empty = np.flatnonzero(norms == 0)
    leaves: list[np.ndarray] = []
    depth = 0
    node_counter = 0

    def split(members: np.ndarray, level: int):
        nonlocal depth, node_counter
        if len(members) <= max_leaf:
            leaves.append(members)
            depth = max(depth, level)
            return
        node_counter += 1
        k = max(2, min(branching, math.ceil(len(members) / max_leaf)))
        rng = np.random.default_rng([seed, node_counter])
        assignment = balanced_spherical_kmeans(emb.matrix[members], k, rng)
        for cluster in range(k):
            split(members[assignment == cluster], level + 1)

    if active.size:
        split(active, 1)
    clusters = [tuple(emb.labels[i] for i in leaf) for leaf in leaves]
    if empty.size:
        logger.warning("%d labels have no positive questions; they form the overflow cluster", empty.size)
        clusters.append(tuple(emb.labels[i] for i in empty))
    logger.info("Indexed %d labels into %d clusters (depth %d)", len(emb.labels), len(clusters), depth)
    return LabelIndex(
        clusters=tuple(clusters),
        branching=branching,
        max_leaf=max_leaf,
        depth=max(depth, 1),
        seed=seed,
        overflow=bool(empty.size),
    )


def train_matchers(
    index: LabelIndex,
    X: sparse.spmatrix,
    label_lists: Sequence[Sequence[str]],
    C: float = 1.0,
    epochs: int = 20,
    seed: int = 0,
    batch_size: int = 32,
    n_jobs: int = 1,
) -> MatcherModel:
    """
    Cluster model: multi-positive one-vs-rest over the clusters holding any gold label.
    Label models: one-vs-rest over the labels of each cluster, trained on the questions routed there by their gold labels.
    """
    X = sparse.csr_matrix(X, dtype=np.float64)
    if X.shape[0] == 0 or X.shape[0] != len(label_lists):
        raise ModelError("Matchers need at least one question and one gold list per question")
    routed = [{index.cluster_of(label) for label in gold if index.cluster_of(label) is not None} for gold in label_lists]

    cluster_model = None
    if index.n_clusters > 1:
        fit = fit_hinge(
            X, one_vs_rest_targets(routed, index.n_clusters), C=C, epochs=epochs, seed=seed, batch_size=batch_size
        )
        cluster_model = LinearScorer(fit.weights, fit.bias)

    def train_cluster(cluster: int) -> LinearScorer | None:
        rows = [row for row, clusters in enumerate(routed) if cluster in clusters]
        if not rows:
            logger.warning("Cluster %d has no training questions; its labels are scored by prior only", cluster)
            return None
        position = {label: column for column, label in enumerate(index.clusters[cluster])}
        positives = [{position[label] for label in label_lists[row] if label in position} for row in rows]
        fit = fit_hinge(
            X[rows],
            one_vs_rest_targets(positives, len(position)),
            C=C,
            epochs=epochs,
            seed=seed + cluster + 1,
            batch_size=batch_size,
        )
        return LinearScorer(fit.weights, fit.bias)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as executor:
            label_models = tuple(executor.map(train_cluster, range(index.n_clusters)))
    else:
        label_models = tuple(train_cluster(cluster) for cluster in range(index.n_clusters))

    counts = Counter(label for gold in label_lists for label in dict.fromkeys(gold))
    prior = {label: counts.get(label, 0) / X.shape[0] for label in index.labels}
    logger.info("Trained matchers for %d clusters on %d questions", index.n_clusters, X.shape[0])
    return MatcherModel(
        index=index,
        cluster_model=cluster_model,
        label_models=label_models,
        label_prior=MappingProxyType(prior),
        dim=X.shape[1],
    )


def top_clusters(model: MatcherModel, x: SparseVector, beam: int) -> tuple[list[int], np.ndarray]:
    if beam < 1:
        raise ModelError("The beam must be at least 1")
    scores = model.cluster_scores(x)
    order = sorted(range(len(scores)), key=lambda cluster: (-scores[cluster], cluster))
    return order[:beam], scores


def candidate_features(model: MatcherModel, x: SparseVector, clusters: Sequence[int], cluster_scores: np.ndarray) -> tuple[list[str], np.ndarray]:
    """Labels of the given clusters with their (cluster score, label score, prior) rows."""
    labels, rows = [], []
    for cluster in clusters:
        label_scores = model.label_scores(x, cluster)
        for label, label_score in zip(model.index.clusters[cluster], label_scores):
            labels.append(label)
            rows.append((cluster_scores[cluster], label_score, model.label_prior[label]))
    return labels, np.asarray(rows, dtype=np.float64).reshape(-1, 3)


def predict_types_xmc(model: MatcherModel, ranker: EnsembleRanker, x: SparseVector, beam: int = 4, k: int = 10) -> RankedTypeList:
    """Score the top-beam clusters, rank their labels with the ensemble ranker, keep the top k."""
    if k < 1:
        raise ModelError("k must be at least 1")
    clusters, cluster_scores = top_clusters(model, x, beam)
    labels, features = candidate_features(model, x, clusters, cluster_scores)
    return RankedTypeList.from_scores(zip(labels, ranker.score(features)), k=k)


def fit_pairwise_ranker(differences: np.ndarray, C: float = 1.0, epochs: int = 10, seed: int = 0) -> EnsembleRanker:
    """Pairwise hinge loss on (relevant − irrelevant) feature differences, no intercept."""
    differences = np.asarray(differences, dtype=np.float64)
    fit = fit_hinge(
        sparse.csr_matrix(differences),
        np.ones(len(differences)),
        C=C,
        epochs=epochs,
        seed=seed,
        fit_intercept=False,
    )
    return EnsembleRanker(weights=tuple(float(w) for w in fit.weights[0]), fallback=False, loss_history=fit.loss_history)


def train_ensemble_ranker(
    model: MatcherModel,
    X: sparse.spmatrix,
    label_lists: Sequence[Sequence[str]],
    beam: int = 4,
    epochs: int = 10,
    seed: int = 0,
    max_negatives: int = 20,
    min_questions: int = MIN_RANKER_QUESTIONS,
) -> EnsembleRanker:
    """
    Fit the ranker on a held-out fold. Negatives per question are the highest
    scoring irrelevant candidates under the fallback weights. Folds with fewer
    than `min_questions` usable questions keep the fallback weights.
    """
    X = sparse.csr_matrix(X, dtype=np.float64)
    usable = [row for row, gold in enumerate(label_lists) if any(model.index.cluster_of(label) is not None for label in gold)]
    if not usable:
        logger.warning("Empty ranker fold; using fallback weights %s", FALLBACK_WEIGHTS)
        return EnsembleRanker()
    if len(usable) < min_questions:
        logger.warning("Ranker fold has %d questions (< %d); using fallback weights", len(usable), min_questions)
        return EnsembleRanker()

    fallback = EnsembleRanker()
    differences = []
    for row in usable:
        x = row_vector(X, row)
        gold = set(label_lists[row])
        clusters, cluster_scores = top_clusters(model, x, beam)
        clusters = list(dict.fromkeys(clusters + sorted(
            model.index.cluster_of(label) for label in gold if model.index.cluster_of(label) is not None
        )))
        labels, features = candidate_features(model, x, clusters, cluster_scores)
        relevant = [i for i, label in enumerate(labels) if label in gold]
        irrelevant = [i for i, label in enumerate(labels) if label not in gold]
        base = fallback.score(features)
        irrelevant = sorted(irrelevant, key=lambda i: (-base[i], labels[i]))[:max_negatives]
        for positive in relevant:
            for negative in irrelevant:
                differences.append(features[positive] - features[negative])
    if not differences:
        logger.warning("Ranker fold yields no (relevant, irrelevant) pairs; using fallback weights")
        return EnsembleRanker()
    ranker = fit_pairwise_ranker(np.asarray(differences), epochs=epochs, seed=seed)
    logger.info("Trained ensemble ranker on %d pairs: weights %s", len(differences), ranker.weights)
    return ranker


class ImportedMatcherScores:
    """Label scores computed elsewhere (question id → label → score), ranked per question."""

    def __init__(self, scores: Mapping[str, Mapping[str, float]]):
        self.scores = {question_id: dict(labels) for question_id, labels in scores.items()}

    @classmethod
    def load(cls, path: str | Path) -> "ImportedMatcherScores":
        serializer = MatcherScoresSerializer(data={"scores": read_json(path)})
        if not serializer.is_valid():
            raise DatasetError(f"{path}: {flatten_errors(serializer.errors)}")
        return cls(serializer.validated_data["scores"])

    def rank(self, question_id: str, k: int) -> RankedTypeList:
        return RankedTypeList.from_scores(self.scores.get(question_id, {}), k=k)


def save_xmc(model: MatcherModel, ranker: EnsembleRanker, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "label_index.json").write_text(json.dumps(model.index.to_dict(), indent=2), encoding="utf-8")
    (directory / "ranker.json").write_text(json.dumps(ranker.to_dict(), indent=2), encoding="utf-8")
    arrays = {
        "prior": np.array([model.label_prior[label] for label in model.index.labels]),
        "meta": np.array(json.dumps({
            "format": MATCHER_FORMAT,
            "version": MATCHER_VERSION,
            "dim": model.dim,
            "trained_clusters": [model_ is not None for model_ in model.label_models],
        })),
    }
    if model.cluster_model is not None:
        arrays["cluster_weights"] = model.cluster_model.weights
        arrays["cluster_bias"] = model.cluster_model.bias
    for cluster, scorer in enumerate(model.label_models):
        if scorer is not None:
            arrays[f"label_weights_{cluster}"] = scorer.weights
            arrays[f"label_bias_{cluster}"] = scorer.bias
    with open(directory / "matcher.npz", "wb") as handle:
        np.savez_compressed(handle, **arrays)


def load_xmc(directory: str | Path) -> tuple[MatcherModel, EnsembleRanker]:
    directory = Path(directory)
    index = LabelIndex.from_dict(json.loads((directory / "label_index.json").read_text(encoding="utf-8")))
    ranker = EnsembleRanker.from_dict(json.loads((directory / "ranker.json").read_text(encoding="utf-8")))
    with np.load(directory / "matcher.npz", allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        if meta.get("format") != MATCHER_FORMAT or meta.get("version") != MATCHER_VERSION:
            raise ModelError(f"'{directory}' does not hold a version {MATCHER_VERSION} matcher")
        cluster_model = None
        if "cluster_weights" in archive.files:
            cluster_model = LinearScorer(archive["cluster_weights"], archive["cluster_bias"])
        label_models = tuple(
            LinearScorer(archive[f"label_weights_{cluster}"], archive[f"label_bias_{cluster}"]) if trained else None
            for cluster, trained in enumerate(meta["trained_clusters"])
        )
        prior = dict(zip(index.labels, (float(value) for value in archive["prior"])))
    model = MatcherModel(
        index=index,
        cluster_model=cluster_model,
        label_models=label_models,
        label_prior=MappingProxyType(prior),
        dim=meta["dim"],
    )
    return model, ranker
