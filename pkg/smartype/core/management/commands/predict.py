from pathlib import Path

from smartype.core.management.base import PipelineCommand
from smartype.core.models.dataset_models import Source
from smartype.core.services.bundle import load_bundle
from smartype.core.services.dataset import load_questions
from smartype.core.services.evaluation import meta_path, save_run
from smartype.core.services.pipeline import predict_questions


class Command(PipelineCommand):
    help = "Predict answer categories and types for a question file with a trained bundle"

    def add_arguments(self, parser):
        parser.add_argument("bundle", type=str, help="Model bundle directory")
        parser.add_argument("questions", type=str, help="SMART question file")
        parser.add_argument("--output", type=str, required=True, help="Prediction run file (SMART submission JSON)")
        parser.add_argument("--source", choices=Source.values, help="Knowledge base of the question file")
        parser.add_argument("--top-k", type=int, help="Types returned per resource question (default 10)")
        parser.add_argument("--stage1-predictions", type=str, help="Imported category predictions for these questions")
        parser.add_argument("--stage2-scores", type=str, help="Imported type scores for these questions")

    def run(self, *args, **options):
        bundle = self.existing_path(options["bundle"], "bundle")
        questions = load_questions(self.existing_path(options["questions"], "questions"), options.get("source"))
        run = predict_questions(
            load_bundle(bundle),
            questions,
            top_k=options.get("top_k"),
            stage1_predictions=self.existing_path(options.get("stage1_predictions"), "--stage1-predictions"),
            stage2_scores=self.existing_path(options.get("stage2_scores"), "--stage2-scores"),
        )
        output = Path(options["output"])
        save_run(run, output)
        self.stdout.write(
            self.style.SUCCESS(f"Wrote {len(run)} predictions to {output} (metadata in {meta_path(output)})")
        )
