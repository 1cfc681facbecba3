from smartype.core.management.base import PipelineCommand
from smartype.core.models.dataset_models import Source, Split
from smartype.core.services.dataset import load_dataset
from smartype.core.services.evaluation import error_analysis, load_run, mistake_examples


class Command(PipelineCommand):
    help = "List the gold types most often missing from the predictions, with example questions"

    def add_arguments(self, parser):
        parser.add_argument("run", type=str, help="Prediction run file")
        parser.add_argument("gold", type=str, help="Gold SMART dataset file")
        parser.add_argument("--mode", choices=Source.values, default=str(Source.DBPEDIA))
        parser.add_argument("--top", type=int, default=10, help="Number of types to list")
        parser.add_argument("--examples", type=int, default=5, help="Number of example questions to list")
        parser.add_argument("--output", type=str, help="Write the analysis as JSON")

    def run(self, *args, **options):
        run = load_run(self.existing_path(options["run"], "run"))
        gold = load_dataset(self.existing_path(options["gold"], "gold"), options["mode"], Split.TEST)
        misses = [row for row in error_analysis(run, gold, options["top"]) if row.errors]
        examples = mistake_examples(run, gold, options["examples"])

        for key in ("method", "config_hash", "seed"):
            if key in run.meta:
                self.stdout.write(f"# {key}: {run.meta[key]}")
        if not misses:
            self.stdout.write(self.style.SUCCESS("No gold types are missing from the predictions"))
        else:
            width = max(len("Type"), *(len(row.type) for row in misses))
            self.stdout.write(f"{'Type':<{width}}  {'#Total':>7}  {'#Errors':>7}")
            for row in misses:
                self.stdout.write(f"{row.type:<{width}}  {row.total:>7}  {row.errors:>7}")
        for example in examples:
            self.stdout.write("")
            self.stdout.write(f"{example.id}: {example.question}")
            self.stdout.write(f"  gold:      {', '.join(example.gold_types)}")
            self.stdout.write(f"  predicted: {', '.join(example.predicted_types)}")

        if options.get("output"):
            self.write_json(
                {
                    "meta": dict(run.meta),
                    "mistakes": [{"type": row.type, "total": row.total, "errors": row.errors} for row in misses],
                    "examples": [
                        {
                            "id": example.id,
                            "question": example.question,
                            "gold": list(example.gold_types),
                            "predicted": list(example.predicted_types),
                        }
                        for example in examples
                    ],
                },
                options["output"],
            )
