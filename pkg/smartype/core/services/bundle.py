"""
Model bundle directory: vocabulary, stage-1 model, stage-2 artifacts and a manifest.

The manifest records the config (with its hash and seed), the vocabulary hash
and a content digest per artifact. Digests of npz archives cover the stored
arrays, not the zip container, so retraining with the same config and seed
reproduces the manifest exactly apart from `created_at`.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from smartype.core.exceptions import ModelError
from smartype.core.models.config_models import PipelineConfig
from smartype.core.models.ranking_models import InvertedIndex
from smartype.core.models.text_models import Vocabulary
from smartype.core.services.catclf import LinearModel, load_linear_model, save_linear_model
from smartype.core.services.fusion import load_index, save_index
from smartype.core.services.textproc import load_vocabulary, save_vocabulary, vocabulary_hash
from smartype.core.services.xmc import EnsembleRanker, MatcherModel, load_xmc, save_xmc

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "smartype.bundle"
MANIFEST_VERSION = 1
VOCABULARY_NAME = "vocabulary.json"
CATEGORY_MODEL_NAME = "category_model.npz"
TYPE_INDEX_NAME = "type_index.npz"
ENTITY_INDEX_NAME = "entity_index.npz"
FALLBACK_TYPES_NAME = "fallback_types.json"
XMC_DIR = "xmc"


@dataclass(frozen=True, eq=False)
class TrainedPipeline:
    """Everything `predict` needs. Stage-2 artifacts not used by the configured method are None."""
    config: PipelineConfig
    vocabulary: Vocabulary
    fallback_types: tuple[str, ...] = ()
    category_model: LinearModel | None = None
    type_index: InvertedIndex | None = None
    entity_index: InvertedIndex | None = None
    matcher: MatcherModel | None = None
    ranker: EnsembleRanker | None = None


def content_digest(path: str | Path) -> str:
    """SHA-256 of a file; for npz archives, of the array names, dtypes, shapes and bytes."""
    path = Path(path)
    digest = hashlib.sha256()
    if path.suffix != ".npz":
        digest.update(path.read_bytes())
        return digest.hexdigest()
    with np.load(path, allow_pickle=False) as archive:
        for name in sorted(archive.files):
            array = np.ascontiguousarray(archive[name])
            digest.update(f"{name}:{array.dtype.str}:{array.shape}".encode("utf-8"))
            digest.update(array.tobytes())
    return digest.hexdigest()


def _artifact_digests(directory: Path) -> dict[str, str]:
    return {
        path.relative_to(directory).as_posix(): content_digest(path)
        for path in sorted(directory.rglob("*"))
        if path.is_file() and path.name != MANIFEST_NAME
    }


def save_bundle(trained: TrainedPipeline, directory: str | Path) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_vocabulary(trained.vocabulary, directory / VOCABULARY_NAME)
    (directory / FALLBACK_TYPES_NAME).write_text(json.dumps(list(trained.fallback_types)), encoding="utf-8")
    if trained.category_model is not None:
        save_linear_model(trained.category_model, directory / CATEGORY_MODEL_NAME)
    if trained.type_index is not None:
        save_index(trained.type_index, directory / TYPE_INDEX_NAME)
    if trained.entity_index is not None:
        save_index(trained.entity_index, directory / ENTITY_INDEX_NAME)
    if trained.matcher is not None:
        save_xmc(trained.matcher, trained.ranker or EnsembleRanker(), directory / XMC_DIR)

    config = trained.config
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "created_at": datetime.now(timezone.utc).isoformat(),
        **config.run_meta(),
        "config": config.hash_payload(),
        "vocabulary_hash": vocabulary_hash(trained.vocabulary),
        "files": _artifact_digests(directory),
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.info("Wrote %s bundle to %s (config %s)", config.method, directory, config.config_hash[:12])
    return manifest


def read_manifest(directory: str | Path) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise ModelError(f"'{directory}' is not a model bundle (no {MANIFEST_NAME})")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT or manifest.get("version") != MANIFEST_VERSION:
        raise ModelError(f"'{directory}' holds an unsupported bundle manifest")
    return manifest


def load_bundle(directory: str | Path) -> TrainedPipeline:
    """Load a bundle, verifying artifact digests and the vocabulary hash."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    digests = _artifact_digests(directory)
    for name, expected in manifest["files"].items():
        if digests.get(name) != expected:
            raise ModelError(f"Bundle artifact '{name}' is missing or does not match the manifest")

    vocabulary = load_vocabulary(directory / VOCABULARY_NAME)
    if vocabulary_hash(vocabulary) != manifest["vocabulary_hash"]:
        raise ModelError("The bundle vocabulary does not match the manifest")
    config = PipelineConfig.from_validated({**manifest["config"], "output_dir": str(directory)})
    category_model = None
    if (directory / CATEGORY_MODEL_NAME).exists():
        category_model = load_linear_model(directory / CATEGORY_MODEL_NAME)
    matcher = ranker = None
    if (directory / XMC_DIR).is_dir():
        matcher, ranker = load_xmc(directory / XMC_DIR)
    return TrainedPipeline(
        config=config,
        vocabulary=vocabulary,
        fallback_types=tuple(json.loads((directory / FALLBACK_TYPES_NAME).read_text(encoding="utf-8"))),
        category_model=category_model,
        type_index=load_index(directory / TYPE_INDEX_NAME) if (directory / TYPE_INDEX_NAME).exists() else None,
        entity_index=load_index(directory / ENTITY_INDEX_NAME) if (directory / ENTITY_INDEX_NAME).exists() else None,
        matcher=matcher,
        ranker=ranker,
    )
