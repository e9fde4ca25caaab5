"""Exception types shared across the toolkit."""


class ConceptorKitError(Exception):
    """Base class for all toolkit errors."""


class NonSquareError(ConceptorKitError):
    """A square matrix was required."""


class NonFiniteError(ConceptorKitError):
    """NaN or Inf encountered where finite values are required."""


class NotPositiveDefiniteError(ConceptorKitError):
    """Cholesky factorization hit a nonpositive pivot."""


class ZeroDimensionError(ConceptorKitError):
    """Matrix dimensions must be at least 1."""


class DegenerateWeightsError(ConceptorKitError):
    """Random recurrent weights had numerically zero spectral radius."""


class DimensionMismatchError(ConceptorKitError):
    """Operand shapes are incompatible."""


class TooShortError(ConceptorKitError):
    """Input sequence is too short for the requested operation."""


class SingularGramError(ConceptorKitError):
    """Readout normal equations are singular and no ridge was given."""


class EmptyStatesError(ConceptorKitError):
    """A state sequence with at least one column is required."""


class NonPositiveApertureError(ConceptorKitError):
    """Aperture must be strictly positive."""


class EmptyInputError(ConceptorKitError):
    """A nonempty collection was required."""


class ChannelMismatchError(ConceptorKitError):
    """Series channel counts disagree."""


class BadDegreeError(ConceptorKitError):
    """Polynomial degree must be at least 1."""


class NonPowerOfTwoFrameError(ConceptorKitError):
    """Frame length must be a power of two."""


class EmptyClassError(ConceptorKitError):
    """Every class needs at least one training sample."""


class SingleClassError(ConceptorKitError):
    """At least two classes are required."""


class TooFewSamplesPerClassError(ConceptorKitError):
    """Each class needs at least as many samples as folds."""


class EmptyTestSetError(ConceptorKitError):
    """Evaluation requires a nonempty test set."""


class InsufficientDataError(ConceptorKitError):
    """Dataset is too small for the requested protocol."""


class MissingFileError(ConceptorKitError):
    """A referenced file does not exist."""


class ParseError(ConceptorKitError):
    """A text input failed to parse.

    Carries the offending location so batch tools can report
    `file:line` without string surgery.
    """

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where = f"{path}: "
        if line is not None:
            where += f"line {line}: "
        if column is not None:
            where += f"column {column}: "
        super().__init__(where + message)


class SchemaMismatchError(ConceptorKitError):
    """Loaded data does not match the declared channel schema."""


class EmptyDatasetError(ConceptorKitError):
    """Manifest contains no entries."""


class BadSpecError(ConceptorKitError):
    """Synthetic dataset specification is invalid."""
