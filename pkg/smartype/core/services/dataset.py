"""
Ingest SMART JSON datasets, flatten categories, build folds and statistics.
"""

import json
import logging
from collections import Counter
from pathlib import Path

import numpy as np

from smartype.core.exceptions import DatasetError, DatasetValidationError
from smartype.core.models.dataset_models import (
    SOURCE_PREFIXES,
    Category,
    DatasetStats,
    FlatCategory,
    FoldAssignment,
    Question,
    QuestionSet,
    Source,
    Split,
    flatten_category,
    unflatten_category,
)
from smartype.core.serializers.base_serializers import validate_records
from smartype.core.serializers.question_serializers import QuestionRecordSerializer

logger = logging.getLogger(__name__)

__all__ = [
    "combine_sets",
    "dataset_stats",
    "flatten_category",
    "load_dataset",
    "load_questions",
    "read_json",
    "split_folds",
    "unflatten_category",
    "write_dataset",
]


def read_json(path: str | Path):
    """Parse a JSON file; syntax errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"Cannot read '{path}': {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DatasetError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1].strip() if 0 < exc.lineno <= len(lines) else ""
        raise DatasetError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg} near: {context[:120]!r}") from exc


def _load(path: str | Path, source: Source | None, split: Split, require_labels: bool) -> QuestionSet:
    records = read_json(path)
    if not isinstance(records, list):
        raise DatasetError(f"{path}: expected a JSON array of question records")
    validated = validate_records(QuestionRecordSerializer, records, str(path), require_labels=require_labels)
    questions = tuple(
        Question(
            id=record["id"],
            text=record.get("question") or "",
            category=Category(record["category"]) if record.get("category") else None,
            types=tuple(record.get("type") or ()),
        )
        for record in validated
    )
    question_set = QuestionSet(source=Source(source) if source else None, split=Split(split), questions=questions)
    unusable = len(question_set) - len(question_set.usable())
    logger.info("Loaded %d questions from %s (%d without text)", len(question_set), path, unusable)
    return question_set


def load_dataset(path: str | Path, source: Source | str, split: Split | str) -> QuestionSet:
    """Load a labeled SMART dataset file. Unknown categories and duplicate ids are rejected."""
    return _load(path, source, split, require_labels=True)


def load_questions(path: str | Path, source: Source | str | None = None) -> QuestionSet:
    """Load a question file for prediction; category and type may be absent."""
    return _load(path, source, Split.TEST, require_labels=False)


def write_dataset(questions: QuestionSet, path: str | Path) -> None:
    records = [
        {
            "id": question.id,
            "question": question.text or None,
            "category": str(question.category) if question.category else None,
            "type": list(question.types),
        }
        for question in questions
    ]
    Path(path).write_text(json.dumps(records, indent=2, ensure_ascii=False), encoding="utf-8")


def combine_sets(first: QuestionSet, second: QuestionSet) -> QuestionSet:
    """
    Concatenate two sets of the same split. Ids are prefixed with their source
    ('dbp:' / 'wd:') so ids shared by both sets stay distinct.
    """
    if first.split != second.split:
        raise DatasetValidationError(f"Cannot combine a {first.split} set with a {second.split} set")

    def prefixed(question_set: QuestionSet) -> list[Question]:
        if question_set.source is None:
            return list(question_set)
        prefix = SOURCE_PREFIXES[question_set.source]
        return [
            Question(id=prefix + question.id, text=question.text, category=question.category, types=question.types)
            for question in question_set
        ]

    return QuestionSet(source=None, split=first.split, questions=tuple(prefixed(first) + prefixed(second)))


def split_folds(questions: QuestionSet, n: int, seed: int) -> FoldAssignment:
    """
    Stratified n-fold assignment. Questions are grouped by flat category (unlabeled
    questions form their own group), shuffled per group with the seed and dealt
    round-robin with a running offset, so fold sizes differ by at most one overall
    and per category.
    """
    if n < 2:
        raise DatasetValidationError("Cross-validation needs at least 2 folds")
    if n > len(questions):
        raise DatasetValidationError(f"Cannot split {len(questions)} questions into {n} folds")

    groups: dict[str, list[str]] = {str(flat): [] for flat in FlatCategory}
    groups["unlabeled"] = []
    for question in questions:
        flat = question.flat_category
        groups["unlabeled" if flat is None else str(flat)].append(question.id)

    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    offset = 0
    for ids in groups.values():
        for position, index in enumerate(rng.permutation(len(ids))):
            assignment[ids[index]] = (offset + position) % n
        offset += len(ids)
    # keep the dataset order in the mapping
    assignment = {question_id: assignment[question_id] for question_id in questions.ids}
    return FoldAssignment(seed=seed, n_folds=n, assignment=assignment)


def dataset_stats(questions: QuestionSet) -> DatasetStats:
    per_category = Counter({str(category): 0 for category in Category})
    per_flat = Counter({str(flat): 0 for flat in FlatCategory})
    unlabeled = 0
    for question in questions:
        if question.category is None:
            unlabeled += 1
            continue
        per_category[str(question.category)] += 1
        per_flat[str(question.flat_category)] += 1
    return DatasetStats(
        total=len(questions),
        per_category=dict(per_category),
        per_flat_category=dict(per_flat),
        unlabeled=unlabeled,
        unusable=len(questions) - len(questions.usable()),
    )
