from typing import Optional, Tuple


class PrebenchError(Exception):
    """Base class for every error raised by the toolkit."""


class EmptyRegionError(PrebenchError):
    """A mask or boundary band selected no pixels.

    Metric code catches this and records the frame (or the whole metric) as absent.
    """


class InputError(PrebenchError):
    """Malformed numeric input: wrong shapes, bad rotations, mismatched lengths."""


class ConfigError(PrebenchError):
    """Invalid configuration or parameters that cannot be honoured."""


class UndefinedStatisticError(PrebenchError):
    """A statistic has no defined value for the given sample."""


class CaseError(PrebenchError):
    """A case directory or bundle is malformed."""

    def __init__(self, message: str, case_id: Optional[str] = None):
        self.case_id = case_id
        prefix = f"[{case_id}] " if case_id else ""
        super().__init__(prefix + message)


class PartitionError(CaseError):
    """Preserve/Reveal/Expand masks do not partition the frame."""

    def __init__(self, frame: int, pixel: Tuple[int, int], reason: str, case_id: Optional[str] = None):
        self.frame = frame
        self.pixel = pixel
        row, col = pixel
        super().__init__(
            f"partition violated at frame {frame}, pixel (row={row}, col={col}): {reason}",
            case_id=case_id,
        )
