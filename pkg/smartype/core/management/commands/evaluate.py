from smartype.core.exceptions import ConfigError
from smartype.core.management.base import PipelineCommand
from smartype.core.models.dataset_models import Source, Split
from smartype.core.services.dataset import load_dataset
from smartype.core.services.evaluation import evaluate_run, load_run
from smartype.core.services.typehier import load_hierarchy


class Command(PipelineCommand):
    help = "Score a prediction run against gold answers (accuracy, lenient NDCG@5/10 or MRR)"

    def add_arguments(self, parser):
        parser.add_argument("run", type=str, help="Prediction run file")
        parser.add_argument("gold", type=str, help="Gold SMART dataset file")
        parser.add_argument("--mode", choices=Source.values, default=str(Source.DBPEDIA))
        parser.add_argument("--hierarchy", type=str, help="Type hierarchy TSV, required in dbpedia mode")
        parser.add_argument("--output", type=str, help="Write the report as JSON")

    def run(self, *args, **options):
        mode = Source(options["mode"])
        hierarchy_path = self.existing_path(options.get("hierarchy"), "--hierarchy")
        if mode == Source.DBPEDIA and hierarchy_path is None:
            raise ConfigError("dbpedia mode needs --hierarchy")
        run = load_run(self.existing_path(options["run"], "run"))
        gold = load_dataset(self.existing_path(options["gold"], "gold"), mode, Split.TEST)
        hierarchy = load_hierarchy(hierarchy_path) if hierarchy_path else None

        report = evaluate_run(run, gold, hierarchy, mode)
        self.stdout.write(report.to_table(), ending="")
        if options.get("output"):
            self.write_json(report.to_dict(), options["output"])
