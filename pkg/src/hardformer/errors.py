"""Exception hierarchy for the hardformer project.

Every failure the library can signal derives from HardformerError so the
command-line layer can map exception classes onto exit codes without
catching unrelated errors.
"""


class HardformerError(Exception):
    """Base class for all errors raised by hardformer."""


class InvalidParameterError(HardformerError, ValueError):
    """A numeric parameter is outside its admissible range."""


class DimensionMismatchError(HardformerError, ValueError):
    """Vectors or matrices do not share the expected dimension."""


class NotSymmetricError(HardformerError, ValueError):
    """A matrix expected to be symmetric is not."""


class NotPositiveDefiniteError(HardformerError, ValueError):
    """A triangular factorization met a non-positive pivot."""


class SingularMatrixError(HardformerError, ValueError):
    """A matrix that must be inverted is singular."""


class SingularSystemError(HardformerError, ValueError):
    """The optimality system of a face is singular.

    Raised when the candidate vertices of a face are affinely dependent.
    """


class NotConvergedError(HardformerError):
    """An analysis requires a converged trajectory."""


class PersistenceViolationError(HardformerError):
    """A detected leader stopped attending only to itself.

    Attributes:
        token_index: Index of the offending token.
        step: First step at which the attention set changed.
    """

    def __init__(self, token_index: int, step: int):
        """Initializes the error with the offending token and step.

        Args:
            token_index: Index of the token whose set changed.
            step: Step at which the change was observed.
        """
        super().__init__(
            f"Leader {token_index} lost its singleton attention set at "
            f"step {step}; the tie tolerance is probably too coarse."
        )
        self.token_index = token_index
        self.step = step


class AmbiguousClusteringError(HardformerError):
    """Two cluster representatives are too close for the chosen radius."""


class EmptyCorpusError(HardformerError, ValueError):
    """A corpus or dataset without any review was supplied."""


class NonFiniteLossError(HardformerError, ArithmeticError):
    """Training produced a NaN or infinite loss.

    Attributes:
        batch_index: Global index of the batch that produced the loss.
    """

    def __init__(self, batch_index: int, value: float):
        """Initializes the error with the offending batch.

        Args:
            batch_index: Global index of the mini-batch.
            value: The non-finite loss value.
        """
        super().__init__(
            f"Non-finite loss {value} at batch {batch_index}."
        )
        self.batch_index = batch_index
        self.value = value


class ConfigError(HardformerError, ValueError):
    """A configuration file or command-line option is malformed."""


class TrajectoryFormatError(HardformerError, ValueError):
    """Exported trajectory files are missing or inconsistent."""


class DatasetFormatError(HardformerError, ValueError):
    """A dataset line is not ``label<TAB>text`` with a 0/1 label."""


class ModelFormatError(HardformerError, ValueError):
    """A model file has a bad magic, header or parameter block."""
