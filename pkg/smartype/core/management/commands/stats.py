from smartype.core.management.base import PipelineCommand
from smartype.core.models.dataset_models import Source, Split
from smartype.core.services.dataset import dataset_stats, load_dataset, load_questions


class Command(PipelineCommand):
    help = "Print per-category statistics of a SMART dataset as TSV"

    def add_arguments(self, parser):
        parser.add_argument("dataset", type=str, help="SMART dataset file")
        parser.add_argument("--source", choices=Source.values, default=str(Source.DBPEDIA))
        parser.add_argument("--split", choices=Split.values, default=str(Split.TRAIN))
        parser.add_argument("--json-output", type=str, help="Also write the statistics as JSON")

    def run(self, *args, **options):
        path = self.existing_path(options["dataset"], "dataset")
        if options["split"] == Split.TRAIN:
            questions = load_dataset(path, options["source"], options["split"])
        else:
            questions = load_questions(path, options["source"])
        stats = dataset_stats(questions)
        self.stdout.write(stats.to_tsv(), ending="")
        if options.get("json_output"):
            self.write_json(stats.to_dict(), options["json_output"])
