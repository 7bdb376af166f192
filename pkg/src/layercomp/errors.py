"""Exception types shared across the package."""


class LayerCompError(Exception):
    """Base class for all layercomp errors."""


class InvalidInputError(LayerCompError, ValueError):
    """An argument violates a documented precondition (shape, range, emptiness)."""


class EmptyLayoutError(InvalidInputError):
    """An operation that needs at least one instance got an empty layout."""


class EmptyMaskError(InvalidInputError):
    """An operation that needs at least one occupied pixel got an all-zero mask."""


class OutOfFrameError(InvalidInputError):
    """An affine transform moved every mask pixel outside the frame."""


class ContractError(LayerCompError, AssertionError):
    """A caller broke an inter-module contract (e.g. unmasked input to the fg net)."""


class CheckpointError(LayerCompError):
    """A checkpoint archive is malformed or inconsistent with its manifest."""


class ConfigHashMismatchError(CheckpointError):
    """Checkpoint was written under a different network configuration."""


class TrainingDivergenceError(LayerCompError):
    """Training produced non-finite or runaway losses."""


class NumericalStabilityError(LayerCompError):
    """A numerical routine left its supported regime (e.g. badly non-PSD covariance)."""
