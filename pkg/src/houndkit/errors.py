"""Exception types shared across the toolkit.

The CLI maps these onto distinct process exit codes; library callers can
catch them individually.
"""


class HoundkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(HoundkitError):
    """Invalid or inconsistent configuration values."""


class BoundsError(HoundkitError, IndexError):
    """A window or index request falls outside the sampled range."""


class FormatVersionError(HoundkitError):
    """An artifact file declares an unexpected format version."""


class StrictHashError(HoundkitError):
    """An input file's content hash disagrees with its recorded provenance."""


class MissingInputError(HoundkitError, FileNotFoundError):
    """A required input artifact does not exist."""
