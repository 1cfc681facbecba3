"""
SMART evaluation protocol: category accuracy, lenient NDCG@k, MRR and error analysis.
"""

import json
import logging
import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

from smartype.core.exceptions import EvaluationError
from smartype.core.models.dataset_models import Category, FlatCategory, QuestionSet, Source
from smartype.core.models.hierarchy_models import TypeHierarchy
from smartype.core.models.ranking_models import RankedTypeList
from smartype.core.models.run_models import (
    CategoryBreakdown,
    EvalReport,
    MistakeExample,
    Prediction,
    PredictionRun,
    TypeMiss,
)
from smartype.core.serializers.base_serializers import validate_records
from smartype.core.serializers.prediction_serializers import PredictionRecordSerializer
from smartype.core.services.dataset import read_json
from smartype.core.services.typehier import lenient_gain

logger = logging.getLogger(__name__)


def _labels(predicted: RankedTypeList | Sequence[str]) -> list[str]:
    return predicted.labels if isinstance(predicted, RankedTypeList) else list(predicted)


def uncapped_ndcg(predicted: RankedTypeList | Sequence[str], gold: Iterable[str], hier: TypeHierarchy, k: int) -> float:
    """
    DCG over the first k predictions with lenient gains and a log2(i + 1)
    discount, divided by the ideal DCG that gives gain 1 to each gold type,
    truncated at k. Ancestor credit can lift the ratio above 1.
    """
    gold = set(gold)
    if not gold:
        raise EvaluationError("NDCG needs at least one gold type")
    if k < 1:
        raise EvaluationError("k must be at least 1")
    dcg = sum(
        lenient_gain(label, gold, hier) / math.log2(rank + 1)
        for rank, label in enumerate(_labels(predicted)[:k], start=1)
    )
    idcg = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(k, len(gold)) + 1))
    return dcg / idcg


def ndcg_at_k(predicted: RankedTypeList | Sequence[str], gold: Iterable[str], hier: TypeHierarchy, k: int) -> float:
    """Lenient NDCG@k capped at 1."""
    value = uncapped_ndcg(predicted, gold, hier, k)
    if value > 1.0:
        logger.debug("NDCG@%d capped at 1.0 (uncapped %.4f)", k, value)
        return 1.0
    return value


def reciprocal_rank(predicted: RankedTypeList | Sequence[str], gold: Iterable[str]) -> float:
    gold = set(gold)
    for rank, label in enumerate(_labels(predicted), start=1):
        if label in gold:
            return 1.0 / rank
    return 0.0


def mrr(runs: Sequence[tuple[RankedTypeList | Sequence[str], Iterable[str]]]) -> float:
    if not runs:
        raise EvaluationError("MRR needs at least one question")
    return sum(reciprocal_rank(predicted, gold) for predicted, gold in runs) / len(runs)


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


def evaluate_run(
    run: PredictionRun,
    gold: QuestionSet,
    hier: TypeHierarchy | None = None,
    mode: Source | str = Source.DBPEDIA,
) -> EvalReport:
    """
    Accuracy over every gold question; type metrics over gold literal and
    resource questions. A question whose predicted category is wrong gets a
    type score of 0. Missing predictions and questions without text count as wrong.
    """
    if mode not in Source.values:
        raise EvaluationError(f"Unknown evaluation mode '{mode}'")
    mode = Source(mode)
    if mode == Source.DBPEDIA and hier is None:
        raise EvaluationError("DBpedia evaluation needs a type hierarchy")
    labeled = [question for question in gold if question.category is not None]
    if not labeled:
        raise EvaluationError("The gold set has no labeled questions")

    n_missing = n_unusable = capped = 0
    correct, correct_flat = [], []
    ndcg5, ndcg10, rr = {}, {}, {}
    for question in labeled:
        prediction = run.get(question.id)
        if prediction is None:
            n_missing += 1
        if not question.usable:
            n_unusable += 1
            prediction = None
        correct.append(prediction is not None and prediction.category == question.category)
        correct_flat.append(prediction is not None and prediction.flat_category == question.flat_category)

        if question.category == Category.BOOLEAN or (question.category == Category.RESOURCE and not question.types):
            continue
        if question.category == Category.LITERAL:
            hit = float(
                prediction is not None
                and prediction.category == Category.LITERAL
                and prediction.types[0] == question.types[0]
            )
            ndcg5[question.id] = ndcg10[question.id] = rr[question.id] = hit
        elif prediction is None or prediction.category != Category.RESOURCE:
            ndcg5[question.id] = ndcg10[question.id] = rr[question.id] = 0.0
        elif mode == Source.DBPEDIA:
            raw5 = uncapped_ndcg(prediction.types, question.types, hier, 5)
            raw10 = uncapped_ndcg(prediction.types, question.types, hier, 10)
            if max(raw5, raw10) > 1.0:
                capped += 1
                logger.debug("Question '%s': uncapped NDCG@5 %.4f, NDCG@10 %.4f", question.id, raw5, raw10)
            ndcg5[question.id] = min(1.0, raw5)
            ndcg10[question.id] = min(1.0, raw10)
        else:
            rr[question.id] = reciprocal_rank(prediction.types, question.types)

    if n_missing:
        logger.warning("%d gold questions have no prediction and are scored 0", n_missing)
    if capped:
        logger.warning("NDCG was capped at 1.0 for %d questions", capped)

    primary = ndcg5 if mode == Source.DBPEDIA else rr

    def breakdown(key) -> dict[str, CategoryBreakdown]:
        rows = {}
        for name in (Category.values if key == "category" else FlatCategory.values):
            members = [
                (index, question) for index, question in enumerate(labeled)
                if str(getattr(question, key)) == name
            ]
            if not members:
                continue
            hits = correct if key == "category" else correct_flat
            scores = [primary[question.id] for _, question in members if question.id in primary]
            rows[name] = CategoryBreakdown(
                count=len(members),
                accuracy=sum(hits[index] for index, _ in members) / len(members),
                type_score=_mean(scores),
            )
        return rows

    report = EvalReport(
        mode=str(mode),
        n_questions=len(labeled),
        n_missing=n_missing,
        n_unusable=n_unusable,
        n_type_questions=len(primary),
        accuracy=sum(correct) / len(labeled),
        accuracy_flat=sum(correct_flat) / len(labeled),
        ndcg_at_5=_mean(list(ndcg5.values())) if mode == Source.DBPEDIA else None,
        ndcg_at_10=_mean(list(ndcg10.values())) if mode == Source.DBPEDIA else None,
        mrr=_mean(list(rr.values())) if mode == Source.WIKIDATA else None,
        per_category=breakdown("category"),
        per_flat_category=breakdown("flat_category"),
        meta=dict(run.meta),
    )
    logger.info("Evaluated %d questions: %s", report.n_questions, report.metrics())
    return report


def _resource_gold(gold: QuestionSet):
    return [question for question in gold if question.category == Category.RESOURCE and question.types]


def error_analysis(run: PredictionRun, gold: QuestionSet, n: int = 10) -> list[TypeMiss]:
    """Gold types of resource questions that are absent from the predicted list, most missed first."""
    if n < 1:
        raise EvaluationError("n must be at least 1")
    totals, errors = Counter(), Counter()
    for question in _resource_gold(gold):
        prediction = run.get(question.id)
        predicted = set(prediction.types) if prediction is not None else set()
        for label in dict.fromkeys(question.types):
            totals[label] += 1
            errors[label] += label not in predicted
    rows = [TypeMiss(type=label, total=totals[label], errors=errors[label]) for label in totals]
    rows.sort(key=lambda row: (-row.errors, -row.total, row.type))
    return rows[:n]


def mistake_examples(run: PredictionRun, gold: QuestionSet, n: int = 10) -> list[MistakeExample]:
    """Resource questions whose predictions miss at least one gold type, in dataset order."""
    if n < 1:
        raise EvaluationError("n must be at least 1")
    examples = []
    for question in _resource_gold(gold):
        prediction = run.get(question.id)
        predicted = prediction.types if prediction is not None else ()
        if set(question.types) - set(predicted):
            examples.append(MistakeExample(
                id=question.id,
                question=question.text,
                gold_types=question.types,
                predicted_types=tuple(predicted),
            ))
            if len(examples) == n:
                break
    return examples


def meta_path(path: str | Path) -> Path:
    """Sidecar holding the run metadata: run.json → run.meta.json."""
    return Path(path).with_suffix(".meta.json")


def save_run(run: PredictionRun, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(run.to_submission(), indent=2, ensure_ascii=False), encoding="utf-8")
    meta_path(path).write_text(json.dumps(dict(run.meta), indent=2, sort_keys=True), encoding="utf-8")


def load_run(path: str | Path, meta: Mapping | None = None) -> PredictionRun:
    """Read a SMART submission file; metadata comes from `meta` or the sidecar next to it."""
    records = read_json(path)
    if not isinstance(records, list):
        raise EvaluationError(f"{path}: expected a JSON array of predictions")
    validated = validate_records(PredictionRecordSerializer, records, str(path))
    if meta is None:
        sidecar = meta_path(path)
        meta = read_json(sidecar) if sidecar.exists() else {}
    return PredictionRun(
        predictions=tuple(
            Prediction(id=record["id"], category=Category(record["category"]), types=tuple(record["type"]))
            for record in validated
        ),
        meta=meta,
    )
