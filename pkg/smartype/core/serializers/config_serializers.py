"""
Serializers validating the pipeline configuration.
"""

from pathlib import Path

from rest_framework import serializers

from smartype.core.models.dataset_models import Source

STAGE1_METHODS = ("linear", "imported")
STAGE2_METHODS = ("tc", "ec", "xmc", "imported")
AGGREGATIONS = ("sum", "max")


class ExistingPathField(serializers.CharField):
    """A file path that must exist when the config is validated."""

    def to_internal_value(self, data):
        value = super().to_internal_value(data)
        if not Path(value).exists():
            raise serializers.ValidationError(f"File '{value}' does not exist.")
        return value


class SvmConfigSerializer(serializers.Serializer):
    c = serializers.FloatField(min_value=1e-12)
    epochs = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)


class FusionConfigSerializer(serializers.Serializer):
    k1 = serializers.FloatField(min_value=0.0)
    b = serializers.FloatField(min_value=0.0, max_value=1.0)
    ec_k = serializers.IntegerField(min_value=1)
    aggregation = serializers.ChoiceField(choices=AGGREGATIONS)


class XmcConfigSerializer(serializers.Serializer):
    branching = serializers.IntegerField(min_value=2)
    max_leaf = serializers.IntegerField(min_value=1)
    max_leaf_wikidata = serializers.IntegerField(min_value=1)
    beam = serializers.IntegerField(min_value=1)
    c = serializers.FloatField(min_value=1e-12)
    epochs = serializers.IntegerField(min_value=1)
    ranker_epochs = serializers.IntegerField(min_value=1)
    holdout_folds = serializers.IntegerField(min_value=2)
    max_negatives = serializers.IntegerField(min_value=1)
    n_jobs = serializers.IntegerField(min_value=1)


class PipelineConfigSerializer(serializers.Serializer):
    """
    Full pipeline configuration: data files, mode, stage methods,
    hyperparameter blocks, seed and output directory.
    """
    mode = serializers.ChoiceField(choices=Source.choices)
    dbpedia_train = ExistingPathField(required=False, allow_null=True)
    wikidata_train = ExistingPathField(required=False, allow_null=True)
    entities = ExistingPathField(required=False, allow_null=True)
    hierarchy = ExistingPathField(required=False, allow_null=True)
    stage1 = serializers.ChoiceField(choices=STAGE1_METHODS)
    stage1_predictions = ExistingPathField(required=False, allow_null=True)
    stage2 = serializers.ChoiceField(choices=STAGE2_METHODS)
    stage2_scores = ExistingPathField(required=False, allow_null=True)
    output_dir = serializers.CharField()
    seed = serializers.IntegerField()
    top_k = serializers.IntegerField(min_value=1)
    n_folds = serializers.IntegerField(min_value=2)
    svm = SvmConfigSerializer()
    fusion = FusionConfigSerializer()
    xmc = XmcConfigSerializer()

    def validate(self, attrs):
        errors = {}
        train_key = f"{attrs['mode']}_train"
        if not attrs.get(train_key):
            errors[train_key] = f"Mode '{attrs['mode']}' needs its training set."
        if attrs["stage1"] == "imported" and not attrs.get("stage1_predictions"):
            errors["stage1_predictions"] = "Imported category predictions need a file."
        if attrs["stage2"] in ("tc", "ec") and not attrs.get("entities"):
            errors["entities"] = "Fusion rankers need an entity abstracts file."
        if attrs["stage2"] == "imported" and not attrs.get("stage2_scores"):
            errors["stage2_scores"] = "Imported type scores need a file."
        if errors:
            raise serializers.ValidationError(errors)
        return attrs
