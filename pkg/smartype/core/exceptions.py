"""
Domain exceptions of the answer type prediction pipeline.

Commands map ConfigError to exit code 2 and the data-side errors to exit code 3.
"""


class SmartTypeError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(SmartTypeError, ValueError):
    """Invalid pipeline configuration or command usage."""


class DatasetError(SmartTypeError):
    """A dataset file could not be read or parsed."""


class DatasetValidationError(DatasetError, ValueError):
    """A dataset record violates the question invariants."""


class HierarchyError(DatasetError, ValueError):
    """The type hierarchy file is inconsistent (cycles, orphan parents)."""


class TextProcessingError(SmartTypeError, ValueError):
    """Vocabulary fitting or vectorization failed."""


class ModelError(SmartTypeError, ValueError):
    """A model was trained or applied on incompatible inputs."""


class FusionError(SmartTypeError, ValueError):
    """An inverted index could not be built or queried."""


class EvaluationError(SmartTypeError, ValueError):
    """Evaluation inputs do not satisfy the metric preconditions."""
