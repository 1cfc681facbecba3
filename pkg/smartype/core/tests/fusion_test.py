"""
Tests for BM25 type ranking.
"""

import math

from smartype.core.exceptions import FusionError
from smartype.core.models.ranking_models import IndexKind, RankedTypeList
from smartype.core.services.fusion import (
    EntityRecord,
    bm25_idf,
    bm25_rank,
    build_entity_index,
    build_type_index,
    load_index,
    rank_types_ec,
    rank_types_tc,
    read_entities,
    save_index,
)
from smartype.core.services.textproc import tokenize
from smartype.core.tests.helper import ENTITY_ROWS, BaseTestCase

TOY_ENTITIES = [
    EntityRecord("e1", "apple banana", ("A",)),
    EntityRecord("e2", "apple apple cherry", ("B",)),
    EntityRecord("e3", "durian", ("A", "C")),
    EntityRecord("e4", "banana split with cherry", ("C",)),
]


def brute_force_bm25(documents: dict[str, list[str]], query: list[str], k1=1.2, b=0.75) -> dict[str, float]:
    n_docs = len(documents)
    avg_length = sum(len(tokens) for tokens in documents.values()) / n_docs
    scores = {}
    for label, tokens in documents.items():
        total, matched = 0.0, False
        for term in set(query):
            tf = tokens.count(term)
            if not tf:
                continue
            matched = True
            df = sum(1 for other in documents.values() if term in other)
            idf = max(0.0, math.log(1 + (n_docs - df + 0.5) / (df + 0.5)))
            total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(tokens) / avg_length))
        if matched:
            scores[label] = total
    return scores


class EntityFileTest(BaseTestCase):
    """Test reading the entity abstracts file."""

    def test_read_entities(self):
        """Test every line becomes a record; untyped entities keep an empty type list."""
        entities = list(read_entities(self.write_entities()))
        self.assertEqual(len(entities), len(ENTITY_ROWS))
        self.assertEqual(entities[0].types, ("dbo:Gymnast", "dbo:Athlete", "dbo:Person", "dbo:Agent"))
        self.assertEqual(entities[-1].types, ())

    def test_bad_line(self):
        with self.assertRaises(FusionError):
            list(read_entities(self.write_text("bad.tsv", "only\ttwo\n")))

    def test_non_utf8_file(self):
        """Latin-1 abstracts raise a FusionError that names the file."""
        path = self.write_latin1("latin1.tsv", "dbr:Zürich\tA city in Switzerland\tdbo:City\n")
        with self.assertRaises(FusionError) as context:
            list(read_entities(path))
        self.assertIn("not valid UTF-8", str(context.exception))

    def test_missing_file(self):
        with self.assertRaises(FusionError):
            list(read_entities(self.tmp_path / "missing.tsv"))


class Bm25Test(BaseTestCase):
    """Test BM25 scoring against a direct summation."""

    def test_idf_floor(self):
        """Test terms in most documents get idf 0, never a negative value."""
        self.assertGreater(bm25_idf(10, 1), 0.0)
        self.assertGreaterEqual(bm25_idf(2, 2), 0.0)

    def test_entity_index_matches_direct_summation(self):
        """Test entity documents score like the direct BM25 formula."""
        index = build_entity_index(TOY_ENTITIES)
        documents = {entity.entity_id: tokenize(entity.abstract) for entity in TOY_ENTITIES}
        for query in (["apple"], ["apple", "cherry"], ["banana", "banana", "durian"], ["kiwi"]):
            expected = brute_force_bm25(documents, query)
            ranked = dict(bm25_rank(index, query))
            self.assertEqual(set(ranked), set(expected))
            for label, score in expected.items():
                self.assertAlmostEqual(ranked[label], score, places=9)

    def test_type_index_matches_direct_summation(self):
        """Test type documents concatenate their entities' abstracts."""
        index = build_type_index(TOY_ENTITIES)
        documents = {
            "A": tokenize("apple banana") + tokenize("durian"),
            "B": tokenize("apple apple cherry"),
            "C": tokenize("durian") + tokenize("banana split with cherry"),
        }
        self.assertEqual(index.labels, ("A", "B", "C"))
        query = tokenize("cherry and durian")
        ranking = rank_types_tc("cherry and durian", index)
        expected = RankedTypeList.from_scores(brute_force_bm25(documents, query))
        self.assertEqual(ranking.labels, expected.labels)
        for (_, score), (_, oracle) in zip(ranking, expected):
            self.assertAlmostEqual(score, oracle, places=9)

    def test_ties_sort_by_label(self):
        """Test equal scores are ordered by label."""
        index = build_entity_index([
            EntityRecord("zeta", "same words", ("T",)),
            EntityRecord("alpha", "same words", ("T",)),
        ])
        self.assertEqual([label for label, _ in bm25_rank(index, ["same"])], ["alpha", "zeta"])

    def test_cutoff(self):
        index = build_entity_index(TOY_ENTITIES)
        self.assertEqual(len(bm25_rank(index, ["apple", "banana", "cherry"], cutoff=2)), 2)
        with self.assertRaises(FusionError):
            bm25_rank(index, ["apple"], cutoff=0)


class FusionRankingTest(BaseTestCase):
    """Test type-centric and entity-centric type ranking."""

    def setUp(self):
        super().setUp()
        entities = list(read_entities(self.write_entities()))
        with self.assertLogs("smartype.core.services.fusion", level="WARNING"):
            self.type_index = build_type_index(entities)
        self.entity_index = build_entity_index(entities)

    def test_untyped_entities_are_skipped(self):
        self.assertEqual(self.type_index.skipped, 1)
        self.assertEqual(self.entity_index.skipped, 1)
        self.assertNotIn("dbr:Untyped", self.entity_index.labels)

    def test_type_centric_ranks_matching_types(self):
        ranking = rank_types_tc("Which city is located in Bavaria?", self.type_index)
        # the four place types share one pseudo-document, so they tie and sort by label
        self.assertEqual(ranking.labels[:4], ["dbo:City", "dbo:Place", "dbo:PopulatedPlace", "dbo:Settlement"])
        self.assertEqual(len(rank_types_tc("Which city is located in Bavaria?", self.type_index, cutoff=2)), 2)

    def test_entity_centric_types_come_from_top_entities(self):
        """Test entity-centric types all come from the top k entities."""
        question = "Which gymnast was coached by Amanda Reddin?"
        for k in (1, 2, 3):
            top_entities = [label for label, _ in bm25_rank(self.entity_index, tokenize(question), cutoff=k)]
            allowed = {
                label
                for entity_id, types in zip(self.entity_index.labels, self.entity_index.doc_types)
                if entity_id in top_entities
                for label in types
            }
            ranking = rank_types_ec(question, self.entity_index, k=k)
            self.assertTrue(set(ranking.labels) <= allowed)
        self.assertEqual(rank_types_ec(question, self.entity_index, k=1).labels[0], "dbo:Agent")

    def test_sum_and_max_aggregation(self):
        """Test sum and max aggregation of entity scores onto types."""
        index = build_entity_index(TOY_ENTITIES)
        scores = dict(bm25_rank(index, ["apple", "banana"]))
        summed = dict(rank_types_ec("apple banana", index, k=4))
        maxed = dict(rank_types_ec("apple banana", index, k=4, aggregation="max"))
        self.assertAlmostEqual(summed["C"], scores["e4"])
        self.assertAlmostEqual(summed["A"], scores["e1"])
        self.assertAlmostEqual(maxed["B"], scores["e2"])
        self.assertEqual(set(summed), {"A", "B", "C"})

    def test_unknown_terms_give_empty_ranking(self):
        self.assertEqual(len(rank_types_tc("zzz qqq", self.type_index)), 0)
        self.assertEqual(len(rank_types_ec("zzz qqq", self.entity_index)), 0)

    def test_argument_errors(self):
        with self.assertRaises(FusionError):
            rank_types_ec("gymnast", self.entity_index, k=0)
        with self.assertRaises(FusionError):
            rank_types_ec("gymnast", self.entity_index, aggregation="mean")
        with self.assertRaises(FusionError):
            rank_types_ec("gymnast", self.type_index)
        with self.assertRaises(FusionError):
            rank_types_tc("gymnast", self.entity_index)

    def test_duplicate_entity(self):
        with self.assertRaises(FusionError):
            build_entity_index([TOY_ENTITIES[0], TOY_ENTITIES[0]])

    def test_save_and_load(self):
        """Test a reloaded index ranks like the original."""
        path = self.tmp_path / "entities.npz"
        save_index(self.entity_index, path)
        loaded = load_index(path)
        self.assertEqual(loaded.kind, IndexKind.ENTITY)
        question = "Which singer recorded albums?"
        self.assertEqual(rank_types_ec(question, loaded), rank_types_ec(question, self.entity_index))
