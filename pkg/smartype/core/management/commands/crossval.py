from smartype.core.management.base import PipelineCommand, add_config_arguments, config_overrides
from smartype.core.services.pipeline import cross_validate, load_config


class Command(PipelineCommand):
    help = "Stratified n-fold cross-validation of the full pipeline on the training data"

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--folds", type=int, help="Number of folds (default 5)")
        parser.add_argument("--output", type=str, help="Write the per-fold reports as JSON")

    def run(self, *args, **options):
        overrides = config_overrides(options)
        overrides["n_folds"] = options.get("folds")
        config = load_config(self.existing_path(options.get("config"), "--config"), overrides)
        report = cross_validate(config)
        self.stdout.write(report.to_table(), ending="")
        if options.get("output"):
            self.write_json(report.to_dict(), options["output"])
