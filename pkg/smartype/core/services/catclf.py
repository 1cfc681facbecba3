"""
Phase one: five-way answer category classification with one-vs-rest linear max-margin models.
"""

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from smartype.core.exceptions import DatasetError, ModelError
from smartype.core.models.dataset_models import FlatCategory, Question, unflatten_category
from smartype.core.models.text_models import SparseVector, Vocabulary
from smartype.core.serializers.prediction_serializers import ExternalCategorySerializer
from smartype.core.serializers.base_serializers import flatten_errors
from smartype.core.services.dataset import read_json
from smartype.core.services.linear import fit_hinge, one_vs_rest_targets
from smartype.core.services.textproc import to_matrix, vectorize

logger = logging.getLogger(__name__)

CLASSES: tuple[FlatCategory, ...] = tuple(FlatCategory)
MODEL_FORMAT = "smartype.linear-category-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class LinearHyperParams:
    C: float = 1.0
    epochs: int = 20
    seed: int = 0
    batch_size: int = 32


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Per-class weight vectors over the vocabulary plus biases, in FlatCategory order."""
    weights: np.ndarray
    bias: np.ndarray
    hyper: LinearHyperParams
    classes: tuple[FlatCategory, ...] = CLASSES
    vocabulary_hash: str = ""
    loss_history: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.classes) != len(CLASSES) or self.weights.shape[0] != len(self.classes):
            raise ModelError("A category model has exactly one weight vector per flat category")
        if self.bias.shape != (len(self.classes),):
            raise ModelError("A category model has exactly one bias per flat category")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class CategoryPrediction:
    category: FlatCategory
    scores: Mapping[FlatCategory, float] = field(default_factory=dict)


class CategoryPredictor(Protocol):
    """Anything that assigns a flat category to a question."""

    def predict(self, question: Question) -> FlatCategory:
        ...


def train_category_classifier(
    X: Sequence[SparseVector],
    y: Sequence[FlatCategory],
    hyper: LinearHyperParams = LinearHyperParams(),
    dim: int | None = None,
    vocabulary_hash: str = "",
) -> LinearModel:
    """
    One-vs-rest hinge loss over the five flat categories.
    `dim` defaults to the vocabulary size implied by the largest term id.
    """
    if not X or len(X) != len(y):
        raise ModelError(f"Need as many labels as vectors (got {len(X)} vectors, {len(y)} labels)")
    present = {FlatCategory(label) for label in y}
    if len(present) < 2:
        raise ModelError("Category training data must contain at least two classes")
    needed = max(vector.max_index() for vector in X) + 1
    dim = needed if dim is None else dim
    if needed > dim:
        raise ModelError(f"Vector term id {needed - 1} exceeds the feature dimension {dim}")

    targets = one_vs_rest_targets([CLASSES.index(FlatCategory(label)) for label in y], len(CLASSES))
    fit = fit_hinge(
        to_matrix(list(X), dim),
        targets,
        C=hyper.C,
        epochs=hyper.epochs,
        seed=hyper.seed,
        batch_size=hyper.batch_size,
    )
    logger.info("Trained category classifier on %d questions (%d classes present)", len(X), len(present))
    return LinearModel(
        weights=fit.weights,
        bias=fit.bias,
        hyper=hyper,
        vocabulary_hash=vocabulary_hash,
        loss_history=fit.loss_history,
    )


def predict_category(model: LinearModel, x: SparseVector) -> CategoryPrediction:
    """Argmax of w·x + b; np.argmax keeps the first maximum, i.e. the FlatCategory order."""
    if x.max_index() >= model.dim:
        raise ModelError(f"Term id {x.max_index()} is outside the model dimension {model.dim}")
    scores = x.dot(model.weights) + model.bias
    best = int(np.argmax(scores))
    return CategoryPrediction(
        category=model.classes[best],
        scores={label: float(score) for label, score in zip(model.classes, scores)},
    )


def accuracy(pred: Sequence[str], gold: Sequence[str]) -> float:
    if len(pred) != len(gold):
        raise ModelError(f"Cannot compare {len(pred)} predictions with {len(gold)} gold labels")
    if not gold:
        raise ModelError("Accuracy needs at least one label")
    return sum(1 for p, g in zip(pred, gold) if p == g) / len(gold)


def collapsed_accuracy(pred: Sequence[FlatCategory], gold: Sequence[FlatCategory]) -> float:
    """Accuracy after mapping flat categories back onto the three raw categories."""
    return accuracy([unflatten_category(p)[0] for p in pred], [unflatten_category(g)[0] for g in gold])


def per_class_accuracy(pred: Sequence[FlatCategory], gold: Sequence[FlatCategory]) -> dict[str, tuple[int, float]]:
    """Gold flat category → (count, accuracy on that category)."""
    if len(pred) != len(gold):
        raise ModelError(f"Cannot compare {len(pred)} predictions with {len(gold)} gold labels")
    rows = {}
    for label in CLASSES:
        pairs = [(p, g) for p, g in zip(pred, gold) if g == label]
        if pairs:
            rows[str(label)] = (len(pairs), sum(1 for p, g in pairs if p == g) / len(pairs))
    return rows


class LinearCategoryClassifier:
    """Category predictor backed by a trained linear model and its vocabulary."""

    def __init__(self, model: LinearModel, vocab: Vocabulary):
        self.model = model
        self.vocab = vocab

    def predict(self, question: Question) -> FlatCategory:
        return predict_category(self.model, vectorize(self.vocab, question.text)).category


class ImportedCategoryPredictions:
    """Category predictions made elsewhere (e.g. by a fine-tuned transformer), read from a JSON map."""

    def __init__(self, predictions: Mapping[str, FlatCategory]):
        self.predictions = dict(predictions)

    @classmethod
    def load(cls, path: str | Path) -> "ImportedCategoryPredictions":
        serializer = ExternalCategorySerializer(data={"predictions": read_json(path)})
        if not serializer.is_valid():
            raise DatasetError(f"{path}: {flatten_errors(serializer.errors)}")
        predictions = serializer.validated_data["predictions"]
        return cls({question_id: FlatCategory(label) for question_id, label in predictions.items()})

    def predict(self, question: Question) -> FlatCategory:
        try:
            return self.predictions[question.id]
        except KeyError:
            raise DatasetError(f"No imported category prediction for question '{question.id}'") from None


def save_linear_model(model: LinearModel, path: str | Path) -> None:
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "classes": [str(label) for label in model.classes],
        "vocabulary_hash": model.vocabulary_hash,
        "hyper": {"C": model.hyper.C, "epochs": model.hyper.epochs, "seed": model.hyper.seed,
                  "batch_size": model.hyper.batch_size},
        "loss_history": list(model.loss_history),
    }
    with open(path, "wb") as handle:
        np.savez_compressed(handle, weights=model.weights, bias=model.bias, meta=np.array(json.dumps(meta)))


def load_linear_model(path: str | Path) -> LinearModel:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        if meta.get("format") != MODEL_FORMAT or meta.get("version") != MODEL_VERSION:
            raise ModelError(f"'{path}' is not a version {MODEL_VERSION} category model")
        return LinearModel(
            weights=archive["weights"],
            bias=archive["bias"],
            hyper=LinearHyperParams(**meta["hyper"]),
            classes=tuple(FlatCategory(label) for label in meta["classes"]),
            vocabulary_hash=meta["vocabulary_hash"],
            loss_history=tuple(meta["loss_history"]),
        )
