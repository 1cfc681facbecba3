from pathlib import Path

from django.conf import settings

from smartype.core.exceptions import ConfigError
from smartype.core.management.base import PipelineCommand
from smartype.core.models.dataset_models import Source, Split
from smartype.core.services.dataset import combine_sets, dataset_stats, load_dataset, load_questions, write_dataset


class Command(PipelineCommand):
    help = "Validate SMART dataset files, combine them with source prefixes and write normalized copies plus statistics"

    def add_arguments(self, parser):
        parser.add_argument("--dbpedia", type=str, help="SMART DBpedia dataset file")
        parser.add_argument("--wikidata", type=str, help="SMART Wikidata dataset file")
        parser.add_argument(
            "--split",
            choices=Split.values,
            default=str(Split.TRAIN),
            help="Dataset split; test files may omit category and type",
        )
        parser.add_argument("--output", type=str, help="Output directory (defaults to DATA_DIR)")

    def run(self, *args, **options):
        split = Split(options["split"])
        output = Path(options.get("output") or settings.DATA_DIR)
        sources = {
            Source.DBPEDIA: self.existing_path(options.get("dbpedia"), "--dbpedia"),
            Source.WIKIDATA: self.existing_path(options.get("wikidata"), "--wikidata"),
        }
        sets = {}
        for source, path in sources.items():
            if path is None:
                continue
            if split == Split.TRAIN:
                sets[source] = load_dataset(path, source, split)
            else:
                sets[source] = load_questions(path, source)
        if not sets:
            raise ConfigError("Give at least one of --dbpedia and --wikidata")

        output.mkdir(parents=True, exist_ok=True)
        stats = {}
        for source, question_set in sets.items():
            write_dataset(question_set, output / f"{source}_{split}.json")
            stats[str(source)] = dataset_stats(question_set).to_dict()
            excluded = stats[str(source)]["unusable"]
            self.stdout.write(f"{source}: {len(question_set)} questions, {excluded} excluded (no question text)")
        if len(sets) == 2:
            combined = combine_sets(sets[Source.DBPEDIA], sets[Source.WIKIDATA])
            write_dataset(combined, output / f"combined_{split}.json")
            stats["combined"] = dataset_stats(combined).to_dict()
        self.write_json(stats, output / f"stats_{split}.json")
        self.stdout.write(self.style.SUCCESS(f"Wrote normalized {split} data to {output}"))
