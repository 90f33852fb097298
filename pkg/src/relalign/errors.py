"""Exception types shared across the toolkit.

Each maps onto one failure class the CLI reports through its exit codes:
ConfigError -> 1, data errors -> 2, Diverged -> 3, CompatibilityError -> 4,
GradCheckFailure -> 5.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


# dataset
class ParseError(ValueError):
    """Malformed cell or line in an input file."""


class InvalidLabel(ValueError):
    """Label matrix violates the rules of its task kind."""


class EmptyDataset(ValueError):
    """File contained no samples."""


class DegenerateSplit(ValueError):
    """Requested split leaves train or test empty."""


# relation
class LengthMismatch(ValueError):
    """Vectors of unequal length where equal length is required."""


class DegenerateTargets(ValueError):
    """Target transform cannot be fitted (e.g. all-zero targets)."""


# network
class BadArchitecture(ValueError):
    """Layer size list is unusable."""


class DimensionMismatch(ValueError):
    """Input dimension does not match the model or metric."""


class TraceMismatch(ValueError):
    """Forward trace does not belong to the given model."""


class SchemaError(ValueError):
    """Serialized model or report file does not match the expected schema."""


# trainer
class TooFewSamples(ValueError):
    """Not enough samples for the requested operation."""


class EmptyPairs(ValueError):
    """Pair batch is empty."""


class Diverged(RuntimeError):
    """Training loss became NaN/Inf."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"training diverged at step {step}")


# linear metric
class SingularSystem(ValueError):
    """Normal equations are singular; add ridge or more pairs."""


# evaluators
class EmptyIndex(ValueError):
    """Neighbor index has no reference points."""


# metrics
class ShapeMismatch(ValueError):
    """Metric inputs have incongruent shapes."""


class LabelMismatch(ValueError):
    """Predicted and true label sequences have different lengths."""


class NotADistribution(ValueError):
    """Rows are expected to be probability distributions but are not."""


class NoValidSamples(ValueError):
    """Every sample was excluded from a ranking metric."""


class CompatibilityError(ValueError):
    """Evaluator incompatible with the dataset task kind."""


class GradCheckFailure(RuntimeError):
    """Finite-difference gradient check exceeded tolerance."""
