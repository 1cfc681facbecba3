"""
Prediction runs and evaluation reports.
"""

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from smartype.core.exceptions import DatasetValidationError
from smartype.core.models.dataset_models import (
    BOOLEAN_TYPE,
    Category,
    FlatCategory,
    LiteralType,
    flatten_category,
)

NDCG_CAP_NOTE = (
    "NDCG is capped at 1.0 when lenient ancestor credit lifts DCG above the ideal DCG "
    "(ideal = gain 1 per gold type, truncated at k)."
)
MATCHER_NOTE = (
    "Type prediction uses sparse linear matchers; scores of transformer-based matchers are not reproduced."
)


@dataclass(frozen=True)
class Prediction:
    """Predicted raw category and ranked type list of one question."""
    id: str
    category: Category
    types: tuple[str, ...]

    def __post_init__(self):
        if self.category == Category.BOOLEAN and self.types != (BOOLEAN_TYPE,):
            raise DatasetValidationError(f"Boolean prediction '{self.id}' must carry ['boolean']")
        if self.category == Category.LITERAL and (len(self.types) != 1 or self.types[0] not in LiteralType.values):
            raise DatasetValidationError(f"Literal prediction '{self.id}' must carry one of {LiteralType.values}")
        if self.category == Category.RESOURCE and not self.types:
            raise DatasetValidationError(f"Resource prediction '{self.id}' must carry at least one type")

    @property
    def flat_category(self) -> FlatCategory:
        return flatten_category(self.category, self.types)

    def to_dict(self) -> dict:
        return {"id": self.id, "category": str(self.category), "type": list(self.types)}


@dataclass(frozen=True)
class PredictionRun:
    """Predictions keyed by question id plus run metadata (methods, config hash, seeds)."""
    predictions: tuple[Prediction, ...]
    meta: Mapping = field(default_factory=dict)
    _by_id: Mapping[str, Prediction] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_id = {}
        for prediction in self.predictions:
            if prediction.id in by_id:
                raise DatasetValidationError(f"Duplicate prediction for question '{prediction.id}'")
            by_id[prediction.id] = prediction
        object.__setattr__(self, "_by_id", MappingProxyType(by_id))

    def __len__(self) -> int:
        return len(self.predictions)

    def __iter__(self) -> Iterator[Prediction]:
        return iter(self.predictions)

    def get(self, question_id: str) -> Prediction | None:
        return self._by_id.get(question_id)

    def to_submission(self) -> list[dict]:
        return [prediction.to_dict() for prediction in self.predictions]


@dataclass(frozen=True)
class CategoryBreakdown:
    count: int
    accuracy: float
    type_score: float | None

    def to_dict(self) -> dict:
        return {"count": self.count, "accuracy": self.accuracy, "type_score": self.type_score}


@dataclass(frozen=True)
class EvalReport:
    """
    Accuracy (3- and 5-way) over all gold questions and type metrics over gold
    literal and resource questions: NDCG@5/@10 in dbpedia mode, MRR in wikidata mode.
    """
    mode: str
    n_questions: int
    n_missing: int
    n_unusable: int
    n_type_questions: int
    accuracy: float
    accuracy_flat: float
    ndcg_at_5: float | None = None
    ndcg_at_10: float | None = None
    mrr: float | None = None
    per_category: Mapping[str, CategoryBreakdown] = field(default_factory=dict)
    per_flat_category: Mapping[str, CategoryBreakdown] = field(default_factory=dict)
    meta: Mapping = field(default_factory=dict)

    def metrics(self) -> dict[str, float]:
        values = {"accuracy": self.accuracy, "accuracy_flat": self.accuracy_flat}
        for name in ("ndcg_at_5", "ndcg_at_10", "mrr"):
            value = getattr(self, name)
            if value is not None:
                values[name] = value
        return values

    def to_dict(self) -> dict:
        return {
            "notes": [NDCG_CAP_NOTE, MATCHER_NOTE],
            "mode": self.mode,
            "meta": dict(self.meta),
            "n_questions": self.n_questions,
            "n_missing": self.n_missing,
            "n_unusable": self.n_unusable,
            "n_type_questions": self.n_type_questions,
            "metrics": self.metrics(),
            "per_category": {name: row.to_dict() for name, row in self.per_category.items()},
            "per_flat_category": {name: row.to_dict() for name, row in self.per_flat_category.items()},
        }

    def to_table(self) -> str:
        lines = [f"# {NDCG_CAP_NOTE}", f"# {MATCHER_NOTE}"]
        for key in ("method", "stage1", "stage2", "config_hash", "seed"):
            if key in self.meta:
                lines.append(f"# {key}: {self.meta[key]}")
        lines.append(
            f"# questions: {self.n_questions}  missing: {self.n_missing}  "
            f"unusable: {self.n_unusable}  type-scored: {self.n_type_questions}"
        )
        metrics = self.metrics()
        width = max(len(name) for name in metrics)
        lines += [f"{name:<{width}}  {value:.4f}" for name, value in metrics.items()]
        lines.append("")
        lines.append(f"{'category':<22}{'count':>8}{'accuracy':>10}{'type':>8}")
        rows = [(name, row) for name, row in self.per_category.items()]
        rows += [(f"flat:{name}", row) for name, row in self.per_flat_category.items()]
        for name, row in rows:
            type_score = "-" if row.type_score is None else f"{row.type_score:.4f}"
            lines.append(f"{name:<22}{row.count:>8}{row.accuracy:>10.4f}{type_score:>8}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TypeMiss:
    """Error analysis row: gold type, gold occurrences, occurrences missing from the predictions."""
    type: str
    total: int
    errors: int


@dataclass(frozen=True)
class MistakeExample:
    id: str
    question: str
    gold_types: tuple[str, ...]
    predicted_types: tuple[str, ...]


@dataclass(frozen=True)
class CrossValidationReport:
    """Per-fold evaluation reports of one pipeline configuration and their means."""
    folds: tuple[EvalReport, ...]
    meta: Mapping = field(default_factory=dict)

    def mean(self) -> dict[str, float]:
        """Mean of every metric over the folds that report it."""
        per_fold = [report.metrics() for report in self.folds]
        names = dict.fromkeys(name for metrics in per_fold for name in metrics)
        return {
            name: sum(metrics[name] for metrics in per_fold if name in metrics)
            / sum(1 for metrics in per_fold if name in metrics)
            for name in names
        }

    def to_dict(self) -> dict:
        return {
            "notes": [NDCG_CAP_NOTE, MATCHER_NOTE],
            "meta": dict(self.meta),
            "folds": [report.to_dict() for report in self.folds],
            "mean": self.mean(),
        }

    def to_table(self) -> str:
        lines = [f"# {NDCG_CAP_NOTE}", f"# {MATCHER_NOTE}"]
        for key in ("method", "config_hash", "seed"):
            if key in self.meta:
                lines.append(f"# {key}: {self.meta[key]}")
        mean = self.mean()
        lines.append("fold  " + "".join(f"{name:>14}" for name in mean))
        for index, report in enumerate(self.folds):
            metrics = report.metrics()
            cells = [f"{metrics[name]:>14.4f}" if name in metrics else f"{'-':>14}" for name in mean]
            lines.append(f"{index:<6}" + "".join(cells))
        lines.append("mean  " + "".join(f"{value:>14.4f}" for value in mean.values()))
        return "\n".join(lines) + "\n"
