import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from smartype.core.exceptions import ConfigError, SmartTypeError
from smartype.core.models.dataset_models import Source
from smartype.core.serializers.config_serializers import STAGE1_METHODS, STAGE2_METHODS

USAGE_EXIT_CODE = 2
DATA_EXIT_CODE = 3


class PipelineCommand(BaseCommand):
    """
    Base class of the pipeline commands. Subclasses implement `run`; usage and
    config errors exit with code 2, data errors with code 3.
    """

    def run(self, *args, **options):
        raise NotImplementedError("subclasses of PipelineCommand must provide a run() method")

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=USAGE_EXIT_CODE) from exc
        except SmartTypeError as exc:
            raise CommandError(str(exc), returncode=DATA_EXIT_CODE) from exc

    def existing_path(self, value: str | None, name: str) -> Path | None:
        if value is None:
            return None
        path = Path(value)
        if not path.exists():
            raise ConfigError(f"{name}: file '{value}' does not exist")
        return path

    def write_json(self, payload, path: str | Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")


def add_config_arguments(parser):
    """Flags shared by the commands that build a pipeline config."""
    parser.add_argument("--config", type=str, help="Pipeline config JSON file")
    parser.add_argument("--mode", choices=Source.values, help="Knowledge base the types come from")
    parser.add_argument("--stage1", choices=STAGE1_METHODS, help="Category classification method")
    parser.add_argument("--stage2", choices=STAGE2_METHODS, help="Type ranking method")
    parser.add_argument("--dbpedia-train", type=str, help="SMART DBpedia training set")
    parser.add_argument("--wikidata-train", type=str, help="SMART Wikidata training set")
    parser.add_argument("--entities", type=str, help="Entity abstracts TSV for the fusion rankers")
    parser.add_argument("--hierarchy", type=str, help="Type hierarchy TSV (child<TAB>parent)")
    parser.add_argument("--stage1-predictions", type=str, help="Imported category predictions JSON")
    parser.add_argument("--stage2-scores", type=str, help="Imported type scores JSON")
    parser.add_argument("--output-dir", type=str, help="Model bundle directory")
    parser.add_argument("--seed", type=int, help="Seed for every random choice")
    parser.add_argument("--top-k", type=int, help="Types returned per resource question")
    parser.add_argument("--n-jobs", type=int, help="Threads for per-cluster matcher training")


def config_overrides(options: dict) -> dict:
    """Command-line flags as a config override; flags that were not given are None."""
    keys = (
        "mode", "stage1", "stage2", "dbpedia_train", "wikidata_train", "entities", "hierarchy",
        "stage1_predictions", "stage2_scores", "output_dir", "seed", "top_k",
    )
    overrides = {key: options.get(key) for key in keys}
    overrides["xmc"] = {"n_jobs": options.get("n_jobs")}
    return overrides
