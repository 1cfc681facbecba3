"""
Two-phase answer type prediction: category classification, then type ranking
for questions predicted to be resources.
"""

import logging
from collections import Counter
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from django.conf import settings

from smartype.core.exceptions import ConfigError, DatasetError, ModelError
from smartype.core.models.config_models import PipelineConfig
from smartype.core.models.dataset_models import BOOLEAN_TYPE, Category, Question, QuestionSet, Source, Split
from smartype.core.models.ranking_models import RankedTypeList
from smartype.core.models.run_models import CrossValidationReport, Prediction, PredictionRun
from smartype.core.serializers.base_serializers import flatten_errors
from smartype.core.serializers.config_serializers import PipelineConfigSerializer
from smartype.core.services.bundle import TrainedPipeline
from smartype.core.services.catclf import (
    CategoryPredictor,
    ImportedCategoryPredictions,
    LinearCategoryClassifier,
    LinearHyperParams,
    train_category_classifier,
)
from smartype.core.services.dataset import combine_sets, load_dataset, read_json, split_folds, unflatten_category
from smartype.core.services.evaluation import evaluate_run
from smartype.core.services.fusion import (
    build_entity_index,
    build_type_index,
    rank_types_ec,
    rank_types_tc,
    read_entities,
)
from smartype.core.services.textproc import fit_vocabulary, vectorize, vectorize_many, vocabulary_hash
from smartype.core.services.typehier import load_hierarchy
from smartype.core.services.xmc import (
    EnsembleRanker,
    ImportedMatcherScores,
    build_label_embeddings,
    cluster_labels,
    predict_types_xmc,
    train_ensemble_ranker,
    train_matchers,
)

logger = logging.getLogger(__name__)

FALLBACK_TYPE_COUNT = 100


def _lower_keys(value):
    if isinstance(value, Mapping):
        return {key.lower(): _lower_keys(item) for key, item in value.items()}
    return value


def default_config() -> dict:
    """Pipeline defaults from settings.SMARTYPE, keys lowercased."""
    return {
        "mode": str(Source.DBPEDIA),
        "stage1": "linear",
        "stage2": "xmc",
        "output_dir": str(Path(settings.DATA_DIR) / "bundle"),
        **_lower_keys(settings.SMARTYPE),
    }


def merge_config(base: Mapping, override: Mapping) -> dict:
    """Recursive merge; None values in `override` leave the base value in place."""
    merged = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: str | Path | None = None, overrides: Mapping | None = None) -> PipelineConfig:
    """settings defaults ← JSON config file ← overrides (command-line flags win)."""
    data = default_config()
    if path is not None:
        try:
            payload = read_json(path)
        except DatasetError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(payload, Mapping):
            raise ConfigError(f"{path}: the pipeline config must be a JSON object")
        data = merge_config(data, payload)
    data = merge_config(data, overrides or {})
    serializer = PipelineConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigError(flatten_errors(serializer.errors))
    return PipelineConfig.from_validated(serializer.validated_data)


def load_training_sets(config: PipelineConfig) -> tuple[QuestionSet, QuestionSet]:
    """
    (stage-1 set, stage-2 set). Stage 1 trains on every configured training set
    combined; stage 2 on the set of the evaluation mode only.
    """
    sets = {}
    for source, path in ((Source.DBPEDIA, config.dbpedia_train), (Source.WIKIDATA, config.wikidata_train)):
        if path:
            sets[source] = load_dataset(path, source, Split.TRAIN)
    stage2_set = sets[config.mode]
    if len(sets) == 2:
        return combine_sets(sets[Source.DBPEDIA], sets[Source.WIKIDATA]), stage2_set
    return stage2_set, stage2_set


def fallback_types(questions: QuestionSet, n: int = FALLBACK_TYPE_COUNT) -> tuple[str, ...]:
    """Most frequent gold types of resource questions; used when a ranker returns nothing."""
    counts = Counter(label for question in questions.resource_questions() for label in dict.fromkeys(question.types))
    return tuple(label for label, _ in sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:n])


def _train_xmc(config: PipelineConfig, vocabulary, questions: QuestionSet):
    resource = QuestionSet(
        source=questions.source, split=questions.split, questions=tuple(questions.resource_questions())
    )
    if not len(resource):
        raise ModelError("XMC training needs resource questions with gold types")
    params = config.xmc
    held_out = None
    if len(resource) >= params["holdout_folds"]:
        folds = split_folds(resource, params["holdout_folds"], config.seed)
        resource, held_out = folds.split(resource, 0)
    else:
        logger.warning("Too few resource questions for a ranker hold-out fold; ranker uses fallback weights")

    labels = sorted({label for question in questions.resource_questions() for label in question.types})
    X = vectorize_many(vocabulary, [question.text for question in resource])
    label_lists = [question.types for question in resource]
    index = cluster_labels(
        build_label_embeddings(X, label_lists, labels),
        branching=params["branching"],
        max_leaf=config.max_leaf,
        seed=config.seed,
    )
    matcher = train_matchers(
        index,
        X,
        label_lists,
        C=params["c"],
        epochs=params["epochs"],
        seed=config.seed,
        batch_size=config.svm["batch_size"],
        n_jobs=params["n_jobs"],
    )
    if held_out is None:
        return matcher, EnsembleRanker()
    ranker = train_ensemble_ranker(
        matcher,
        vectorize_many(vocabulary, [question.text for question in held_out]),
        [question.types for question in held_out],
        beam=params["beam"],
        epochs=params["ranker_epochs"],
        seed=config.seed,
        max_negatives=params["max_negatives"],
    )
    return matcher, ranker


def fit_pipeline(config: PipelineConfig, stage1_set: QuestionSet, stage2_set: QuestionSet) -> TrainedPipeline:
    labeled = [question for question in stage1_set.usable() if question.category is not None]
    if not labeled:
        raise ModelError("No usable labeled training questions")
    excluded = len(stage1_set) - len(labeled)
    if excluded:
        logger.info("Excluded %d training questions without text or category", excluded)
    vocabulary = fit_vocabulary([question.text for question in labeled])

    category_model = None
    if config.stage1 == "linear":
        category_model = train_category_classifier(
            [vectorize(vocabulary, question.text) for question in labeled],
            [question.flat_category for question in labeled],
            LinearHyperParams(
                C=config.svm["c"],
                epochs=config.svm["epochs"],
                seed=config.seed,
                batch_size=config.svm["batch_size"],
            ),
            dim=len(vocabulary),
            vocabulary_hash=vocabulary_hash(vocabulary),
        )

    type_index = entity_index = matcher = ranker = None
    fusion = config.fusion
    if config.stage2 == "tc":
        type_index = build_type_index(read_entities(config.entities), k1=fusion["k1"], b=fusion["b"])
    elif config.stage2 == "ec":
        entity_index = build_entity_index(read_entities(config.entities), k1=fusion["k1"], b=fusion["b"])
    elif config.stage2 == "xmc":
        matcher, ranker = _train_xmc(config, vocabulary, stage2_set)

    return TrainedPipeline(
        config=config,
        vocabulary=vocabulary,
        fallback_types=fallback_types(stage2_set),
        category_model=category_model,
        type_index=type_index,
        entity_index=entity_index,
        matcher=matcher,
        ranker=ranker,
    )


def train_pipeline(config: PipelineConfig) -> TrainedPipeline:
    stage1_set, stage2_set = load_training_sets(config)
    logger.info(
        "Training %s on %d stage-1 and %d stage-2 questions", config.method, len(stage1_set), len(stage2_set)
    )
    return fit_pipeline(config, stage1_set, stage2_set)


def category_predictor(trained: TrainedPipeline, stage1_predictions: str | Path | None = None) -> CategoryPredictor:
    config = trained.config
    if config.stage1 == "imported":
        path = stage1_predictions or config.stage1_predictions
        if not path:
            raise ConfigError("Imported category predictions need a file")
        return ImportedCategoryPredictions.load(path)
    if trained.category_model is None:
        raise ModelError("The bundle holds no category model")
    if trained.category_model.vocabulary_hash != vocabulary_hash(trained.vocabulary):
        raise ModelError("The category model was trained on a different vocabulary")
    return LinearCategoryClassifier(trained.category_model, trained.vocabulary)


def type_ranker(
    trained: TrainedPipeline, top_k: int, stage2_scores: str | Path | None = None
) -> Callable[[Question], RankedTypeList]:
    config = trained.config
    if config.stage2 == "tc":
        return lambda question: rank_types_tc(question.text, trained.type_index, cutoff=top_k)
    if config.stage2 == "ec":
        return lambda question: rank_types_ec(
            question.text,
            trained.entity_index,
            k=config.fusion["ec_k"],
            aggregation=config.fusion["aggregation"],
            cutoff=top_k,
        )
    if config.stage2 == "xmc":
        if trained.matcher is None:
            raise ModelError("The bundle holds no XMC matcher")
        if trained.matcher.dim != len(trained.vocabulary):
            raise ModelError("The XMC matcher was trained on a different vocabulary")
        ranker = trained.ranker or EnsembleRanker()
        return lambda question: predict_types_xmc(
            trained.matcher, ranker, vectorize(trained.vocabulary, question.text), beam=config.xmc["beam"], k=top_k
        )
    path = stage2_scores or config.stage2_scores
    if not path:
        raise ConfigError("Imported type scores need a file")
    scores = ImportedMatcherScores.load(path)
    return lambda question: scores.rank(question.id, top_k)


def predict_questions(
    trained: TrainedPipeline,
    questions: QuestionSet,
    top_k: int | None = None,
    stage1_predictions: str | Path | None = None,
    stage2_scores: str | Path | None = None,
) -> PredictionRun:
    """
    Predict category and types for every question with text. Boolean answers
    carry ['boolean'], literal answers their subtype and resource answers the
    top-k ranked types.
    """
    config = trained.config
    top_k = config.top_k if top_k is None else top_k
    if top_k < 1:
        raise ConfigError("top_k must be at least 1")
    predictor = category_predictor(trained, stage1_predictions)
    rank_types = type_ranker(trained, top_k, stage2_scores)

    def predict_one(question: Question) -> Prediction:
        category, subtype = unflatten_category(predictor.predict(question))
        if category == Category.BOOLEAN:
            types = (BOOLEAN_TYPE,)
        elif category == Category.LITERAL:
            types = (str(subtype),)
        else:
            types = tuple(rank_types(question).labels) or trained.fallback_types[:top_k]
            if not types:
                raise ModelError(f"No type ranking for resource question '{question.id}'")
        return Prediction(id=question.id, category=category, types=types)

    usable = questions.usable()
    skipped = len(questions) - len(usable)
    if skipped:
        logger.warning("Skipped %d questions without text", skipped)
    n_jobs = config.xmc["n_jobs"]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as executor:
            predictions = tuple(executor.map(predict_one, usable))
    else:
        predictions = tuple(predict_one(question) for question in usable)
    logger.info("Predicted %d questions with %s", len(predictions), config.method)
    return PredictionRun(predictions=predictions, meta={**config.run_meta(), "top_k": top_k})


def cross_validate(config: PipelineConfig, n_folds: int | None = None) -> CrossValidationReport:
    """
    Stratified n-fold cross-validation of the full pipeline on the training set
    of the configured mode. Another configured training set joins stage-1 training in every fold.
    """
    n_folds = n_folds or config.n_folds
    stage1_set, questions = load_training_sets(config)
    other = None
    if stage1_set is not questions:
        other_source = Source.WIKIDATA if config.mode == Source.DBPEDIA else Source.DBPEDIA
        other_path = config.wikidata_train if other_source == Source.WIKIDATA else config.dbpedia_train
        other = load_dataset(other_path, other_source, Split.TRAIN)
    hierarchy = load_hierarchy(config.hierarchy) if config.hierarchy else None
    if config.mode == Source.DBPEDIA and hierarchy is None:
        raise ConfigError("DBpedia cross-validation needs a type hierarchy")

    folds = split_folds(questions, n_folds, config.seed)
    reports = []
    for fold in range(n_folds):
        train, held_out = folds.split(questions, fold)
        fold_stage1 = train
        if other is not None:
            pair = (train, other) if config.mode == Source.DBPEDIA else (other, train)
            fold_stage1 = combine_sets(*pair)
        trained = fit_pipeline(config, fold_stage1, train)
        run = predict_questions(trained, held_out)
        report = evaluate_run(run, held_out, hierarchy, config.mode)
        logger.info("Fold %d/%d: %s", fold + 1, n_folds, report.metrics())
        reports.append(report)
    return CrossValidationReport(folds=tuple(reports), meta={**config.run_meta(), "n_folds": n_folds})
