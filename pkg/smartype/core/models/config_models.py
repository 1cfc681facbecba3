"""
Validated pipeline configuration.
"""

import hashlib
import json
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field

from smartype.core.models.dataset_models import Source

# run-location keys that never enter the config hash
UNHASHED_KEYS = ("output_dir",)


@dataclass(frozen=True)
class PipelineConfig:
    mode: Source
    stage1: str
    stage2: str
    output_dir: str
    seed: int
    top_k: int
    n_folds: int
    svm: Mapping = field(default_factory=dict)
    fusion: Mapping = field(default_factory=dict)
    xmc: Mapping = field(default_factory=dict)
    dbpedia_train: str | None = None
    wikidata_train: str | None = None
    entities: str | None = None
    hierarchy: str | None = None
    stage1_predictions: str | None = None
    stage2_scores: str | None = None

    @classmethod
    def from_validated(cls, data: Mapping) -> "PipelineConfig":
        values = {key: value for key, value in data.items()}
        values["mode"] = Source(values["mode"])
        for block in ("svm", "fusion", "xmc"):
            values[block] = dict(values[block])
        return cls(**values)

    @property
    def method(self) -> str:
        return f"{self.stage1}-{self.stage2}"

    @property
    def max_leaf(self) -> int:
        """Leaf size of the label tree; the Wikidata label space uses larger leaves."""
        return self.xmc["max_leaf_wikidata"] if self.mode == Source.WIKIDATA else self.xmc["max_leaf"]

    def to_dict(self) -> dict:
        values = asdict(self)
        values["mode"] = str(self.mode)
        for block in ("svm", "fusion", "xmc"):
            values[block] = dict(getattr(self, block))
        return values

    def hash_payload(self) -> dict:
        values = self.to_dict()
        for key in UNHASHED_KEYS:
            values.pop(key)
        return values

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.hash_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def run_meta(self) -> dict:
        """Metadata every output file carries: methods, config hash and seeds."""
        return {
            "method": self.method,
            "stage1": self.stage1,
            "stage2": self.stage2,
            "mode": str(self.mode),
            "config_hash": self.config_hash,
            "seed": self.seed,
        }
