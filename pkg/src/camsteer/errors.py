"""Exception types shared across the workbench."""


class WorkbenchError(Exception):
    """Base class for all camsteer errors."""


class IngestError(WorkbenchError):
    """A dataset could not be loaded (missing files, malformed structure)."""


class LabelFileError(WorkbenchError):
    """A label file row failed validation; carries the offending row index."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class NonFiniteLossError(WorkbenchError):
    """Training produced a NaN/inf loss; names the epoch and batch."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class DegenerateHeatmapError(WorkbenchError):
    """Operation requires a non-constant heatmap."""


class JobConflictError(WorkbenchError):
    """A session already has a running job."""


class NotFoundError(WorkbenchError):
    """Unknown session / image / checkpoint id."""
