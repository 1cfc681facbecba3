"""
Question datasets: raw and flattened answer categories, question sets, folds.
"""

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from django.db import models

from smartype.core.exceptions import DatasetValidationError


class Category(models.TextChoices):
    """Raw answer category of a SMART question."""
    BOOLEAN = "boolean"
    LITERAL = "literal"
    RESOURCE = "resource"


class LiteralType(models.TextChoices):
    """Subtype of a literal answer."""
    DATE = "date"
    NUMBER = "number"
    STRING = "string"


class FlatCategory(models.TextChoices):
    """
    Five-way category used by the first pipeline phase.
    Member order is the tie-break order of the category classifier.
    """
    BOOLEAN = "boolean"
    LITERAL_DATE = "literal-date"
    LITERAL_NUMBER = "literal-number"
    LITERAL_STRING = "literal-string"
    RESOURCE = "resource"


class Source(models.TextChoices):
    DBPEDIA = "dbpedia"
    WIKIDATA = "wikidata"


class Split(models.TextChoices):
    TRAIN = "train"
    TEST = "test"


SOURCE_PREFIXES = {
    Source.DBPEDIA: "dbp:",
    Source.WIKIDATA: "wd:",
}

BOOLEAN_TYPE = "boolean"


_LITERAL_FLAT = {
    LiteralType.DATE: FlatCategory.LITERAL_DATE,
    LiteralType.NUMBER: FlatCategory.LITERAL_NUMBER,
    LiteralType.STRING: FlatCategory.LITERAL_STRING,
}


def flatten_category(category: str, types: Iterable[str]) -> FlatCategory:
    """Map a raw category and its gold type list onto the five flat categories."""
    types = tuple(types)
    if category == Category.BOOLEAN:
        return FlatCategory.BOOLEAN
    if category == Category.RESOURCE:
        return FlatCategory.RESOURCE
    if category == Category.LITERAL:
        subtype = types[0] if len(types) == 1 else None
        if subtype not in LiteralType.values:
            raise DatasetValidationError(
                f"Literal answers need exactly one type out of {LiteralType.values}, got {list(types)}"
            )
        return _LITERAL_FLAT[LiteralType(subtype)]
    raise DatasetValidationError(f"Unknown category '{category}'")


def unflatten_category(flat: str) -> tuple[Category, LiteralType | None]:
    """Inverse of flatten_category: (raw category, literal subtype or None)."""
    flat = FlatCategory(flat)
    if flat == FlatCategory.BOOLEAN:
        return Category.BOOLEAN, None
    if flat == FlatCategory.RESOURCE:
        return Category.RESOURCE, None
    subtype = next(literal for literal, value in _LITERAL_FLAT.items() if value == flat)
    return Category.LITERAL, subtype


@dataclass(frozen=True)
class Question:
    """One SMART record. `category` is None for unlabeled (test) questions."""
    id: str
    text: str
    category: Category | None = None
    types: tuple[str, ...] = ()

    @property
    def usable(self) -> bool:
        """Questions without text are kept but never used for training."""
        return bool(self.text and self.text.strip())

    @property
    def flat_category(self) -> FlatCategory | None:
        if self.category is None:
            return None
        return flatten_category(self.category, self.types)


@dataclass(frozen=True)
class QuestionSet:
    """
    An ordered set of questions from one source and split.
    `source` is None for sets combined from several sources.
    """
    source: Source | None
    split: Split
    questions: tuple[Question, ...] = ()
    _by_id: Mapping[str, Question] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_id = {}
        for question in self.questions:
            if question.id in by_id:
                raise DatasetValidationError(f"Duplicate question id '{question.id}'")
            by_id[question.id] = question
        object.__setattr__(self, "_by_id", MappingProxyType(by_id))

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self) -> Iterator[Question]:
        return iter(self.questions)

    def __contains__(self, question_id: str) -> bool:
        return question_id in self._by_id

    def get(self, question_id: str) -> Question | None:
        return self._by_id.get(question_id)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(question.id for question in self.questions)

    def usable(self) -> list[Question]:
        return [question for question in self.questions if question.usable]

    def resource_questions(self) -> list[Question]:
        """Usable resource questions with at least one gold type."""
        return [
            question for question in self.questions
            if question.usable and question.category == Category.RESOURCE and question.types
        ]

    def subset(self, ids: Iterable[str]) -> "QuestionSet":
        """Questions with the given ids, in the set's own order."""
        wanted = set(ids)
        return QuestionSet(
            source=self.source,
            split=self.split,
            questions=tuple(question for question in self.questions if question.id in wanted),
        )


@dataclass(frozen=True)
class FoldAssignment:
    """Question id → fold index in [0, n_folds)."""
    seed: int
    n_folds: int
    assignment: Mapping[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [question_id for question_id, index in self.assignment.items() if index == fold]

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.n_folds
        for index in self.assignment.values():
            sizes[index] += 1
        return sizes

    def split(self, questions: QuestionSet, fold: int) -> tuple[QuestionSet, QuestionSet]:
        """Return (training part, held-out fold) for one fold index."""
        held_out = set(self.fold_ids(fold))
        train_ids = [question_id for question_id in questions.ids if question_id not in held_out]
        return questions.subset(train_ids), questions.subset(held_out)


@dataclass(frozen=True)
class DatasetStats:
    """Counts per raw category and flat category, in the layout of the dataset statistics table."""
    total: int
    per_category: Mapping[str, int]
    per_flat_category: Mapping[str, int]
    unlabeled: int
    unusable: int

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "per_category": dict(self.per_category),
            "per_flat_category": dict(self.per_flat_category),
            "unlabeled": self.unlabeled,
            "unusable": self.unusable,
        }

    def to_tsv(self) -> str:
        rows = [("total", self.total)]
        rows += [(f"category:{name}", count) for name, count in self.per_category.items()]
        rows += [(f"flat:{name}", count) for name, count in self.per_flat_category.items()]
        rows += [("unlabeled", self.unlabeled), ("unusable", self.unusable)]
        return "\n".join(f"{name}\t{count}" for name, count in rows) + "\n"
