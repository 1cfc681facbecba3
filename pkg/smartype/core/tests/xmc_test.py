"""
Tests for the extreme multi-label type ranker.
"""

from itertools import combinations, product
from types import MappingProxyType

import numpy as np
from scipy import sparse

from smartype.core.exceptions import DatasetError, ModelError
from smartype.core.models.ranking_models import RankedTypeList
from smartype.core.models.text_models import SparseVector
from smartype.core.services.linear import hinge_objective
from smartype.core.services.textproc import row_vector
from smartype.core.services.xmc import (
    FALLBACK_WEIGHTS,
    EnsembleRanker,
    ImportedMatcherScores,
    LabelEmbedding,
    LabelIndex,
    LinearScorer,
    MatcherModel,
    balance_bounds,
    balanced_spherical_kmeans,
    build_label_embeddings,
    cluster_labels,
    fit_pairwise_ranker,
    load_xmc,
    predict_types_xmc,
    save_xmc,
    size_bounded_assign,
    train_ensemble_ranker,
    train_matchers,
)
from smartype.core.tests.helper import BaseTestCase


def separable_data(n_labels: int = 6, per_label: int = 10):
    """One indicator feature per label; question i carries label i mod n_labels."""
    n = n_labels * per_label
    columns = np.arange(n) % n_labels
    X = sparse.csr_matrix((np.ones(n), (np.arange(n), columns)), shape=(n, n_labels + 2))
    return X, [(f"L{column}",) for column in columns]


def exhaustive_ranking(model: MatcherModel, ranker: EnsembleRanker, x: SparseVector, k: int) -> RankedTypeList:
    """Score every label of every cluster straight from the weights."""
    dense = np.zeros(model.dim)
    dense[x.indices] = x.values

    def squash(value):
        return 1.0 / (1.0 + np.exp(-value))

    scores = {}
    for cluster, labels in enumerate(model.index.clusters):
        if model.cluster_model is None:
            cluster_score = 1.0
        else:
            cluster_score = squash(model.cluster_model.weights[cluster] @ dense + model.cluster_model.bias[cluster])
        for position, label in enumerate(labels):
            scorer = model.label_models[cluster]
            label_score = 0.0 if scorer is None else squash(scorer.weights[position] @ dense + scorer.bias[position])
            features = (cluster_score, label_score, model.label_prior[label])
            scores[label] = sum(weight * value for weight, value in zip(ranker.weights, features))
    return RankedTypeList.from_scores(scores, k=k)


def orthogonal_groups(sizes: tuple[int, ...]) -> LabelEmbedding:
    """Label g{group}_{member}: a shared group axis plus a weak axis of its own."""
    dim = len(sizes) + sum(sizes)
    rows, labels = [], []
    for group, size in enumerate(sizes):
        for member in range(size):
            row = np.zeros(dim)
            row[group] = 1.0
            row[len(sizes) + sum(sizes[:group]) + member] = 0.2
            rows.append(row / np.linalg.norm(row))
            labels.append(f"g{group}_{member}")
    return LabelEmbedding(labels=tuple(labels), matrix=sparse.csr_matrix(np.array(rows)))


def random_instance(rng: np.random.Generator):
    n_labels = int(rng.integers(2, 51))
    n_clusters = int(rng.integers(1, min(8, n_labels) + 1))
    dim = 20
    labels = [f"T{i}" for i in rng.permutation(n_labels)]
    clusters = tuple(tuple(str(label) for label in chunk) for chunk in np.array_split(np.array(labels), n_clusters))
    index = LabelIndex(clusters=clusters, branching=8, max_leaf=64, depth=2, seed=0)
    cluster_model = None
    if n_clusters > 1:
        cluster_model = LinearScorer(rng.normal(size=(n_clusters, dim)), rng.normal(size=n_clusters))
    label_models = tuple(
        None if rng.random() < 0.2 else LinearScorer(rng.normal(size=(len(cluster), dim)), rng.normal(size=len(cluster)))
        for cluster in clusters
    )
    prior = MappingProxyType({label: float(rng.random()) for label in labels})
    model = MatcherModel(index=index, cluster_model=cluster_model, label_models=label_models, label_prior=prior, dim=dim)
    indices = np.sort(rng.choice(dim, size=int(rng.integers(1, dim)), replace=False))
    x = SparseVector(indices, rng.uniform(0.1, 1.0, size=indices.size))
    ranker = EnsembleRanker(weights=tuple(float(w) for w in rng.normal(size=3)), fallback=False)
    return model, ranker, x, int(rng.integers(1, n_labels + 1))


class LabelEmbeddingTest(BaseTestCase):
    """Test label embeddings built from positive questions."""

    def test_single_positive_equals_normalized_question(self):
        X = np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 2.0]])
        emb = build_label_embeddings(X, [("a",), ("b",)])
        np.testing.assert_allclose(emb.vector("a").to_dict()[0], 0.6)
        np.testing.assert_allclose(emb.vector("a").to_dict()[1], 0.8)

    def test_duplicate_positives_do_not_change_the_direction(self):
        X = np.array([[3.0, 4.0, 0.0], [3.0, 4.0, 0.0]])
        once = build_label_embeddings(X[:1], [("a",)])
        twice = build_label_embeddings(X, [("a",), ("a",)])
        np.testing.assert_allclose(once.matrix.toarray(), twice.matrix.toarray())

    def test_matches_hand_summation(self):
        """Test embeddings against summed and normalized question vectors."""
        rng = np.random.default_rng(2)
        X = rng.uniform(0.0, 1.0, size=(3, 5))
        emb = build_label_embeddings(X, [("a", "b"), ("a",), ("b", "c")])
        expected = {"a": X[0] + X[1], "b": X[0] + X[2], "c": X[2]}
        self.assertEqual(emb.labels, ("a", "b", "c"))
        for row, label in enumerate(emb.labels):
            vector = expected[label] / np.linalg.norm(expected[label])
            np.testing.assert_allclose(emb.matrix[row].toarray().ravel(), vector, atol=1e-9)

    def test_labels_without_positives_get_zero_rows(self):
        """Test labels without positive questions get a zero embedding."""
        emb = build_label_embeddings(np.eye(2), [("a",), ("b",)], labels=["a", "b", "z"])
        np.testing.assert_allclose(emb.row_norms(), [1.0, 1.0, 0.0])

    def test_shape_mismatch(self):
        with self.assertRaises(ModelError):
            build_label_embeddings(np.eye(2), [("a",)])


class ClusterLabelsTest(BaseTestCase):
    """Test recursive balanced label clustering."""

    def test_small_label_set_is_one_cluster(self):
        """Test a label set within max_leaf stays one cluster."""
        X, label_lists = separable_data()
        index = cluster_labels(build_label_embeddings(X, label_lists), branching=8, max_leaf=64)
        self.assertEqual(index.n_clusters, 1)
        self.assertEqual(set(index.clusters[0]), {f"L{i}" for i in range(6)})
        self.assertEqual(index.depth, 1)

    def test_orthogonal_groups_separate_like_the_best_partition(self):
        """Test two equal orthogonal groups split like the best 2-partition."""
        emb = orthogonal_groups((4, 4))
        rows = emb.matrix.toarray()
        labels = emb.labels

        def objective(part):
            rest = [i for i in range(8) if i not in part]
            return sum(np.linalg.norm(np.sum([rows[i] for i in side], axis=0)) for side in (part, rest))

        best = max(combinations(range(8), 4), key=objective)
        expected = {frozenset(labels[i] for i in best), frozenset(labels[i] for i in range(8) if i not in best)}
        for seed in range(5):
            index = cluster_labels(emb, branching=2, max_leaf=4, seed=seed)
            self.assertEqual({frozenset(cluster) for cluster in index.clusters}, expected)
        self.assertIn(frozenset(labels[:4]), expected)

    def test_unequal_orthogonal_groups_separate(self):
        """Groups of 4 and 6 labels end up in their own clusters once sizes may drift."""
        emb = orthogonal_groups((4, 6))
        for seed in range(5):
            index = cluster_labels(emb, branching=2, max_leaf=6, seed=seed)
            self.assertEqual(
                {frozenset(cluster) for cluster in index.clusters},
                {frozenset(f"g0_{member}" for member in range(4)), frozenset(f"g1_{member}" for member in range(6))},
            )

    def test_sibling_sizes_stay_within_a_factor_of_two(self):
        """Test sibling cluster sizes - no cluster more than twice another."""
        rng = np.random.default_rng(7)
        for n_labels, k in ((20, 2), (23, 3), (31, 5), (9, 4)):
            vectors = build_label_embeddings(
                rng.uniform(0.0, 1.0, size=(n_labels, 10)), [(f"L{i:02d}",) for i in range(n_labels)]
            ).matrix
            for seed in range(3):
                sizes = np.bincount(balanced_spherical_kmeans(vectors, k, np.random.default_rng(seed)), minlength=k)
                self.assertEqual(sizes.sum(), n_labels)
                self.assertGreaterEqual(sizes.min(), 1)
                self.assertLessEqual(sizes.max(), 2 * sizes.min())

    def test_recursive_leaves_respect_max_leaf(self):
        """Test every leaf holds at most max_leaf labels."""
        rng = np.random.default_rng(7)
        emb = build_label_embeddings(rng.uniform(0.0, 1.0, size=(20, 10)), [(f"L{i:02d}",) for i in range(20)])
        for branching in (2, 8):
            index = cluster_labels(emb, branching=branching, max_leaf=5, seed=1)
            self.assertTrue(all(1 <= len(cluster) <= 5 for cluster in index.clusters))
            self.assertEqual(sorted(index.labels), sorted(emb.labels))
            self.assertGreaterEqual(index.depth, 2)


    def test_deterministic(self):
        rng = np.random.default_rng(8)
        emb = build_label_embeddings(rng.uniform(size=(30, 6)), [(f"L{i}",) for i in range(30)])
        self.assertEqual(cluster_labels(emb, 3, 4, seed=9), cluster_labels(emb, 3, 4, seed=9))

    def test_zero_embeddings_go_to_overflow_cluster(self):
        """Test labels without positives form a trailing overflow cluster."""
        emb = build_label_embeddings(np.eye(2), [("a",), ("b",)], labels=["a", "b", "z"])
        with self.assertLogs("smartype.core.services.xmc", level="WARNING"):
            index = cluster_labels(emb, max_leaf=64)
        self.assertTrue(index.overflow)
        self.assertEqual(index.clusters[-1], ("z",))
        self.assertEqual(index.cluster_of("z"), index.n_clusters - 1)

    def test_invalid_parameters(self):
        emb = build_label_embeddings(np.eye(2), [("a",), ("b",)])
        with self.assertRaises(ModelError):
            cluster_labels(emb, max_leaf=0)
        with self.assertRaises(ModelError):
            cluster_labels(emb, branching=1)

    def test_partition_is_enforced(self):
        with self.assertRaises(ModelError):
            LabelIndex(clusters=(("a", "b"), ("b",)), branching=2, max_leaf=2, depth=2, seed=0)
        with self.assertRaises(ModelError):
            LabelIndex(clusters=(("a",), ()), branching=2, max_leaf=2, depth=2, seed=0)


class SizeBoundedAssignTest(BaseTestCase):
    """Test the size-bounded assignment of labels to clusters."""

    def test_bounds(self):
        """Test strict and relaxed size bounds."""
        self.assertEqual(balance_bounds(10, 2), ((5, 5), (3, 6)))
        self.assertEqual(balance_bounds(7, 3), ((2, 3), (2, 4)))
        self.assertEqual(balance_bounds(6, 3), ((2, 2), (1, 2)))

    def test_matches_exhaustive_search(self):
        """The flow solution reaches the best total similarity among all assignments within the bounds."""
        rng = np.random.default_rng(3)
        for trial in range(20):
            n_items, k = int(rng.integers(3, 8)), int(rng.integers(2, 4))
            if k > n_items:
                continue
            similarity = rng.uniform(-1.0, 1.0, size=(n_items, k))
            for size_min, size_max in balance_bounds(n_items, k):
                assignment = size_bounded_assign(similarity, size_min, size_max)
                sizes = np.bincount(assignment, minlength=k)
                self.assertTrue(np.all((sizes >= size_min) & (sizes <= size_max)))
                best = max(
                    similarity[np.arange(n_items), candidate].sum()
                    for candidate in map(np.array, product(range(k), repeat=n_items))
                    if np.all(
                        (np.bincount(candidate, minlength=k) >= size_min)
                        & (np.bincount(candidate, minlength=k) <= size_max)
                    )
                )
                self.assertAlmostEqual(similarity[np.arange(n_items), assignment].sum(), best, places=4)

    def test_infeasible_bounds(self):
        with self.assertRaises(ModelError):
            size_bounded_assign(np.zeros((5, 2)), 3, 3)


class MatcherTest(BaseTestCase):
    """Test cluster and label matchers on separable data."""

    def setUp(self):
        """Set up six separable labels in three clusters of two."""
        super().setUp()
        self.X, self.label_lists = separable_data()
        self.index = cluster_labels(build_label_embeddings(self.X, self.label_lists), branching=3, max_leaf=2, seed=0)

    def test_three_clusters_of_two(self):
        self.assertEqual([len(cluster) for cluster in self.index.clusters], [2, 2, 2])

    def test_separable_data_top_one_accuracy(self):
        """Test the top label of every training question is its gold label."""
        model = train_matchers(self.index, self.X, self.label_lists, epochs=30, seed=1)
        ranker = EnsembleRanker()
        for row, gold in enumerate(self.label_lists):
            ranking = predict_types_xmc(model, ranker, row_vector(self.X, row), beam=1, k=1)
            self.assertEqual(ranking.labels, list(gold))

    def test_single_cluster_has_no_cluster_model(self):
        index = cluster_labels(build_label_embeddings(self.X, self.label_lists), max_leaf=64)
        model = train_matchers(index, self.X, self.label_lists, seed=1)
        self.assertIsNone(model.cluster_model)
        self.assertEqual(model.label_models[0].weights.shape, (6, self.X.shape[1]))
        np.testing.assert_array_equal(model.cluster_scores(row_vector(self.X, 0)), [1.0])

    def test_deterministic_and_thread_count_independent(self):
        """Test threads do not change the trained models."""
        first = train_matchers(self.index, self.X, self.label_lists, seed=4)
        second = train_matchers(self.index, self.X, self.label_lists, seed=4, n_jobs=3)
        np.testing.assert_array_equal(first.cluster_model.weights, second.cluster_model.weights)
        for one, other in zip(first.label_models, second.label_models):
            np.testing.assert_array_equal(one.weights, other.weights)

    def test_cluster_without_questions_is_prior_only(self):
        """Test a cluster without questions warns and scores its labels by prior."""
        index = LabelIndex(clusters=(("L0", "L1"), ("unused",)), branching=2, max_leaf=2, depth=2, seed=0)
        rows = [row for row, gold in enumerate(self.label_lists) if gold[0] in ("L0", "L1")]
        with self.assertLogs("smartype.core.services.xmc", level="WARNING"):
            model = train_matchers(index, self.X[rows], [self.label_lists[row] for row in rows], seed=0)
        self.assertIsNone(model.label_models[1])
        np.testing.assert_array_equal(model.label_scores(row_vector(self.X, 0), 1), [0.0])
        self.assertEqual(model.label_prior["unused"], 0.0)
        self.assertEqual(model.label_prior["L0"], 0.5)

    def test_dimension_check(self):
        model = train_matchers(self.index, self.X, self.label_lists, seed=0)
        with self.assertRaises(ModelError):
            model.cluster_scores(SparseVector.from_dict({100: 1.0}))


class PredictTypesTest(BaseTestCase):
    """Test beam search over the label clusters."""

    def test_full_beam_equals_exhaustive_scoring(self):
        """Test a beam over all clusters ranks like scoring every label."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            model, ranker, x, k = random_instance(rng)
            predicted = predict_types_xmc(model, ranker, x, beam=model.index.n_clusters, k=k)
            expected = exhaustive_ranking(model, ranker, x, k)
            self.assertEqual(predicted.labels, expected.labels)
            for (_, score), (_, oracle) in zip(predicted, expected):
                self.assertAlmostEqual(score, oracle, places=9)

    def test_prefix_property(self):
        """Test a larger k extends the ranking without reordering it."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            model, ranker, x, _ = random_instance(rng)
            beam = model.index.n_clusters
            short = predict_types_xmc(model, ranker, x, beam=beam, k=3)
            long = predict_types_xmc(model, ranker, x, beam=beam, k=10)
            self.assertEqual(long.labels[:len(short)], short.labels)

    def test_beam_limits_candidates_to_top_clusters(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            model, ranker, x, _ = random_instance(rng)
            scores = model.cluster_scores(x)
            top = sorted(range(len(scores)), key=lambda cluster: (-scores[cluster], cluster))[:2]
            allowed = {label for cluster in top for label in model.index.clusters[cluster]}
            ranking = predict_types_xmc(model, ranker, x, beam=2, k=50)
            self.assertTrue(set(ranking.labels) <= allowed)

    def test_invalid_arguments(self):
        model, ranker, x, _ = random_instance(np.random.default_rng(1))
        with self.assertRaises(ModelError):
            predict_types_xmc(model, ranker, x, k=0)
        with self.assertRaises(ModelError):
            predict_types_xmc(model, ranker, x, beam=0)


class EnsembleRankerTest(BaseTestCase):
    """Test the pairwise ensemble ranker."""

    def setUp(self):
        super().setUp()
        self.X, self.label_lists = separable_data()
        labels = tuple(f"L{i}" for i in range(6))
        index = LabelIndex(clusters=(labels,), branching=8, max_leaf=64, depth=1, seed=0)
        self.model = train_matchers(index, self.X, self.label_lists, seed=2)

    def test_small_fold_uses_fallback_weights(self):
        """Test a fold under 50 questions falls back to fixed weights."""
        with self.assertLogs("smartype.core.services.xmc", level="WARNING"):
            ranker = train_ensemble_ranker(self.model, self.X[:10], self.label_lists[:10])
        self.assertEqual(ranker.weights, FALLBACK_WEIGHTS)
        self.assertTrue(ranker.fallback)

    def test_empty_fold_uses_fallback_weights(self):
        with self.assertLogs("smartype.core.services.xmc", level="WARNING"):
            ranker = train_ensemble_ranker(self.model, self.X[:0], [])
        self.assertEqual(ranker.weights, (1.0, 1.0, 0.1))

    def test_label_score_dominates_when_it_orders_every_pair(self):
        """Test only the label score gets weight when it alone orders the pairs."""
        ranker = train_ensemble_ranker(self.model, self.X, self.label_lists, epochs=10, seed=3)
        self.assertFalse(ranker.fallback)
        # one cluster and uniform priors: only the label score differs within a pair
        self.assertEqual(ranker.weights[0], 0.0)
        self.assertEqual(ranker.weights[2], 0.0)
        self.assertGreater(ranker.weights[1], 0.0)
        self.assertEqual(len(ranker.loss_history), 10)

    def test_pairwise_ranker_keeps_its_lowest_objective(self):
        """The stored weights reach the lowest pairwise hinge objective recorded over the epochs."""
        rng = np.random.default_rng(4)
        differences = np.column_stack([rng.normal(0.0, 0.1, 80), rng.uniform(0.1, 1.0, 80), rng.normal(0.0, 0.1, 80)])
        ranker = fit_pairwise_ranker(differences, C=1.0, epochs=8, seed=1)
        objective = hinge_objective(
            sparse.csr_matrix(differences), np.ones((80, 1)), np.array([ranker.weights]), np.zeros(1), 1.0 / 80
        )
        self.assertEqual(len(ranker.loss_history), 8)
        self.assertAlmostEqual(objective, min(ranker.loss_history), places=10)

    def test_round_trip_through_bundle_files(self):
        ranker = train_ensemble_ranker(self.model, self.X, self.label_lists, seed=3)
        save_xmc(self.model, ranker, self.tmp_path / "xmc")
        model, loaded = load_xmc(self.tmp_path / "xmc")
        self.assertEqual(loaded, ranker)
        x = row_vector(self.X, 4)
        self.assertEqual(
            predict_types_xmc(model, loaded, x, beam=1, k=6),
            predict_types_xmc(self.model, ranker, x, beam=1, k=6),
        )


class ImportedMatcherScoresTest(BaseTestCase):
    """Test type scores read from a file."""

    def test_load_and_rank(self):
        path = self.write_json("scores.json", {"q1": {"dbo:Person": 0.5, "dbo:Agent": 0.5, "dbo:Film": 0.9}})
        scores = ImportedMatcherScores.load(path)
        self.assertEqual(scores.rank("q1", 2).labels, ["dbo:Film", "dbo:Agent"])
        self.assertEqual(len(scores.rank("missing", 5)), 0)

    def test_rejects_non_numeric_scores(self):
        path = self.write_json("scores.json", {"q1": {"dbo:Person": "high"}})
        with self.assertRaises(DatasetError):
            ImportedMatcherScores.load(path)
