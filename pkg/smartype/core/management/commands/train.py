from smartype.core.management.base import PipelineCommand, add_config_arguments, config_overrides
from smartype.core.services.bundle import save_bundle
from smartype.core.services.pipeline import load_config, train_pipeline


class Command(PipelineCommand):
    help = "Train the category classifier and the configured type ranker and write a model bundle"

    def add_arguments(self, parser):
        add_config_arguments(parser)

    def run(self, *args, **options):
        config = load_config(self.existing_path(options.get("config"), "--config"), config_overrides(options))
        manifest = save_bundle(train_pipeline(config), config.output_dir)
        self.stdout.write(
            self.style.SUCCESS(
                f"Trained {config.method} bundle in {config.output_dir} "
                f"(config {manifest['config_hash'][:12]}, seed {config.seed})"
            )
        )
