class ExportError(Exception):
    """Base class for exporter failures."""


class CorpusFormatError(ExportError):
    """The input corpus file is malformed."""


class CorpusDataError(ExportError):
    """The corpus parses but violates a data rule (duplicate ids, empty)."""


class EncoderLoadError(ExportError):
    """The sentence encoder could not be loaded in this environment."""
