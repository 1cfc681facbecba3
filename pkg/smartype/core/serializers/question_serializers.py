"""
Serializers for SMART question records.
"""

from rest_framework import serializers

from smartype.core.models.dataset_models import BOOLEAN_TYPE, Category, LiteralType


class QuestionRecordSerializer(serializers.Serializer):
    """
    One record of a SMART dataset file: {"id", "question", "category", "type"}.
    Pass context require_labels=False for question files without gold answers.
    """
    id = serializers.CharField(trim_whitespace=False)
    question = serializers.CharField(required=False, allow_null=True, allow_blank=True, trim_whitespace=False)
    category = serializers.ChoiceField(choices=Category.choices)
    type = serializers.ListField(child=serializers.CharField(), required=False, allow_null=True, allow_empty=True)

    def get_fields(self):
        """Make category optional when gold labels are not required."""
        fields = super().get_fields()
        if not self.context.get("require_labels", True):
            fields["category"].required = False
            fields["category"].allow_null = True
        return fields

    def validate(self, attrs):
        category = attrs.get("category")
        types = attrs.get("type") or []
        if category == Category.BOOLEAN and types != [BOOLEAN_TYPE]:
            raise serializers.ValidationError({"type": f"Boolean questions carry ['{BOOLEAN_TYPE}'], got {types}"})
        if category == Category.LITERAL and (len(types) != 1 or types[0] not in LiteralType.values):
            raise serializers.ValidationError({
                "type": f"Literal questions carry exactly one of {LiteralType.values}, got {types}"
            })
        attrs["type"] = types
        return attrs
