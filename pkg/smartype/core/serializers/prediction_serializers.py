"""
Serializers for prediction runs and externally computed scores.
"""

from rest_framework import serializers

from smartype.core.models.dataset_models import BOOLEAN_TYPE, Category, FlatCategory, LiteralType


class PredictionRecordSerializer(serializers.Serializer):
    """One entry of a SMART submission file."""
    id = serializers.CharField(trim_whitespace=False)
    category = serializers.ChoiceField(choices=Category.choices)
    type = serializers.ListField(child=serializers.CharField(), allow_empty=False)

    def validate(self, attrs):
        category, types = attrs["category"], attrs["type"]
        if category == Category.BOOLEAN and types != [BOOLEAN_TYPE]:
            raise serializers.ValidationError({"type": f"Boolean predictions carry ['{BOOLEAN_TYPE}']"})
        if category == Category.LITERAL and (len(types) != 1 or types[0] not in LiteralType.values):
            raise serializers.ValidationError({"type": f"Literal predictions carry exactly one of {LiteralType.values}"})
        if len(set(types)) != len(types):
            raise serializers.ValidationError({"type": "Predicted types must not repeat"})
        return attrs


class ExternalCategorySerializer(serializers.Serializer):
    """Category predictions computed elsewhere: question id → flat category."""
    predictions = serializers.DictField(child=serializers.ChoiceField(choices=FlatCategory.choices))


class MatcherScoresSerializer(serializers.Serializer):
    """Label scores computed elsewhere: question id → label → score."""
    scores = serializers.DictField(child=serializers.DictField(child=serializers.FloatField()))
