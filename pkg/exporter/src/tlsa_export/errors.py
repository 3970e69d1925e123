"""Exception hierarchy for the export tooling."""
from __future__ import annotations


class ExportError(Exception):
    """Base class for everything raised on purpose by this package."""


class ManifestError(ExportError):
    """Manifest missing, malformed, or failing validation."""


class EmptyDataset(ExportError):
    """No exportable inputs (no images found, no labels listed)."""


class ModelUnavailable(ExportError):
    """A requested inference backend could not be constructed."""


class MissingDatabase(ExportError):
    """The lexical database file does not exist."""


class EmptyDatabase(ExportError):
    """The lexical database parsed to zero synonym groups."""
